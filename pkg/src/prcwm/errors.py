"""Exception types shared across the package."""


class PrcError(Exception):
    """Base class for every error raised by prcwm."""


class LengthMismatch(PrcError, ValueError):
    pass


class AlphabetMismatch(PrcError, ValueError):
    pass


class SymbolOutOfRange(PrcError, ValueError):
    pass


class InvalidFamily(PrcError, ValueError):
    pass


class FamilyMismatch(PrcError, ValueError):
    pass


class InvalidRate(PrcError, ValueError):
    pass


class DemoParamsViolateBlockBound(PrcError, ValueError):
    pass


class InvalidStrategyForKind(PrcError, ValueError):
    pass


class BudgetInfeasible(PrcError, ValueError):
    pass


class ZeroProbabilityToken(PrcError, ValueError):
    pass


class DegenerateResidual(PrcError, ArithmeticError):
    pass


class AlphabetTooSmall(PrcError, ValueError):
    pass


class TooLarge(PrcError, ValueError):
    """Brute-force oracle asked to enumerate beyond its size limit."""


class InvalidParams(PrcError, ValueError):
    pass


class KeyFormatError(PrcError, ValueError):
    """Key file is truncated, has a bad magic header, or an unknown version."""


class KeyKindMismatch(PrcError, ValueError):
    pass


class ParamParse(PrcError, ValueError):
    pass
