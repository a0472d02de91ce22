"""Toy autoregressive token models with a terminal token, and entropy functionals.

All window arguments are 0-indexed and half-open: ``[i, j)`` covers tokens
``i, ..., j-1``. Entropies are in nats.
"""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from functools import cached_property

import numpy as np

from .core import Alphabet, SeedLike, SymbolString, as_generator
from .errors import InvalidParams, ParamParse, ZeroProbabilityToken

NORM_TOL = 1e-9


class TokenDistribution:
    """Immutable next-token distribution over ``alphabet``."""

    def __init__(self, alphabet: Alphabet | int, probs):
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        p = np.array(probs, dtype=np.float64).reshape(-1)
        if p.size != alphabet.size:
            raise InvalidParams(f"expected {alphabet.size} probabilities, got {p.size}")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise InvalidParams("probabilities must be finite and non-negative")
        if abs(math.fsum(p) - 1.0) > NORM_TOL:
            raise InvalidParams(f"probabilities sum to {math.fsum(p)}, not 1")
        p.flags.writeable = False
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "probs", p)

    def __setattr__(self, name, value):
        if name in ("alphabet", "probs"):
            raise AttributeError("TokenDistribution is immutable")
        object.__setattr__(self, name, value)

    @classmethod
    def point_mass(cls, alphabet: Alphabet | int, token: int) -> "TokenDistribution":
        size = alphabet if isinstance(alphabet, int) else alphabet.size
        p = np.zeros(size)
        p[token] = 1.0
        return cls(size, p)

    @classmethod
    def uniform_over(cls, alphabet: Alphabet | int, tokens) -> "TokenDistribution":
        size = alphabet if isinstance(alphabet, int) else alphabet.size
        p = np.zeros(size)
        tokens = np.asarray(tokens)
        p[tokens] = 1.0 / tokens.size
        return cls(size, p)

    @cached_property
    def entropy(self) -> float:
        nz = self.probs[self.probs > 0]
        return float(-math.fsum(nz * np.log(nz)))

    def __repr__(self):
        return f"TokenDistribution(|Σ|={self.alphabet.size}, H={self.entropy:.4g})"


def pushforward(dist: TokenDistribution, phi: np.ndarray, size: int) -> np.ndarray:
    """``(phi o P)(s) = P(phi^{-1}(s))`` as a length-``size`` vector."""
    return np.bincount(np.asarray(phi), weights=dist.probs, minlength=size)[:size]


class LanguageModel(ABC):
    """Next-token interface. After the terminal token every step is a point mass on it."""

    alphabet: Alphabet
    terminal: int

    def next(self, prefix) -> TokenDistribution:
        pre = prefix.symbols if isinstance(prefix, SymbolString) else np.asarray(prefix, dtype=np.int64)
        if pre.size and np.any(pre == self.terminal):
            return self._terminal_dist
        return self._next(pre)

    @abstractmethod
    def _next(self, prefix: np.ndarray) -> TokenDistribution:
        ...

    @cached_property
    def _terminal_dist(self) -> TokenDistribution:
        return TokenDistribution.point_mass(self.alphabet, self.terminal)

    @abstractmethod
    def to_dict(self) -> dict:
        ...


class UniformSubsetModel(LanguageModel):
    """Uniform over a fixed subset at every step; emits the terminal only if it is in the subset."""

    def __init__(self, alphabet_size: int, subset, terminal: int | None = None):
        self.alphabet = Alphabet(alphabet_size)
        self.terminal = alphabet_size - 1 if terminal is None else terminal
        self.subset = tuple(sorted(int(s) for s in subset))
        if not self.subset or self.subset[0] < 0 or self.subset[-1] >= alphabet_size:
            raise InvalidParams("subset must be a non-empty set of valid symbols")
        self._dist = TokenDistribution.uniform_over(self.alphabet, self.subset)

    def _next(self, prefix):
        return self._dist

    def to_dict(self):
        return {"kind": "uniform-subset", "alphabet_size": self.alphabet.size,
                "terminal": self.terminal, "subset": list(self.subset)}


class MarkovModel(LanguageModel):
    """First-order chain: ``initial`` for the first token, then row ``prefix[-1]`` of ``transition``."""

    def __init__(self, transition, initial=None, terminal: int | None = None):
        T = np.array(transition, dtype=np.float64)
        if T.ndim != 2 or T.shape[0] != T.shape[1]:
            raise InvalidParams("transition must be a square matrix")
        k = T.shape[0]
        self.alphabet = Alphabet(k)
        self.terminal = k - 1 if terminal is None else terminal
        init = np.full(k, 1.0 / k) if initial is None else np.asarray(initial, dtype=np.float64)
        self._init = TokenDistribution(k, init)
        self._rows = [TokenDistribution(k, row) for row in T]
        self.transition = np.array([r.probs for r in self._rows])
        self.transition.flags.writeable = False

    def _next(self, prefix):
        return self._init if prefix.size == 0 else self._rows[int(prefix[-1])]

    def to_dict(self):
        return {"kind": "markov", "terminal": self.terminal,
                "initial": self._init.probs.tolist(), "transition": self.transition.tolist()}


class FixedLengthUniformModel(LanguageModel):
    """Uniform over every non-terminal symbol for ``length`` steps, then the terminal."""

    def __init__(self, alphabet_size: int, length: int, terminal: int | None = None):
        if alphabet_size < 2:
            raise InvalidParams("need at least one non-terminal symbol")
        self.alphabet = Alphabet(alphabet_size)
        self.terminal = alphabet_size - 1 if terminal is None else terminal
        self.length = int(length)
        others = np.setdiff1d(np.arange(alphabet_size), [self.terminal])
        self._dist = TokenDistribution.uniform_over(self.alphabet, others)

    def _next(self, prefix):
        return self._dist if prefix.size < self.length else self._terminal_dist

    def to_dict(self):
        return {"kind": "fixed-length-uniform", "alphabet_size": self.alphabet.size,
                "terminal": self.terminal, "length": self.length}


def model_from_dict(d: dict) -> LanguageModel:
    try:
        kind = d["kind"]
        if kind == "uniform-subset":
            return UniformSubsetModel(int(d["alphabet_size"]), d["subset"], d.get("terminal"))
        if kind == "markov":
            return MarkovModel(d["transition"], d.get("initial"), d.get("terminal"))
        if kind == "fixed-length-uniform":
            return FixedLengthUniformModel(int(d["alphabet_size"]), int(d["length"]), d.get("terminal"))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParamParse(f"bad model spec: {exc}") from None
    raise ParamParse(f"unknown model kind {d.get('kind')!r}")


def model_from_json(text: str) -> LanguageModel:
    try:
        return model_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ParamParse(f"model spec is not JSON: {exc}") from None


def model_to_json(model: LanguageModel) -> str:
    return json.dumps(model.to_dict(), sort_keys=True)


# -- sampling and functionals ----------------------------------------------

def sample_sequence(model: LanguageModel, seed: SeedLike, cap: int) -> SymbolString:
    """Sample until the terminal token (kept in the output) or ``cap`` tokens."""
    if cap < 1:
        raise InvalidParams("cap must be at least 1")
    rng = as_generator(seed)
    out = np.empty(cap, dtype=np.int64)
    last, cdf = None, None
    for i in range(cap):
        dist = model.next(out[:i])
        if dist is not last:
            last, cdf = dist, np.cumsum(dist.probs)
        tok = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), cdf.size - 1)
        out[i] = tok
        if tok == model.terminal:
            return SymbolString(model.alphabet, out[:i + 1])
    return SymbolString(model.alphabet, out)


def conditionals(model: LanguageModel, tok: SymbolString, i: int, j: int):
    """The distributions ``P_a`` for ``a`` in ``[i, j)`` along the realized prefix."""
    if not 0 <= i <= j <= len(tok):
        raise InvalidParams(f"window [{i}, {j}) outside a string of length {len(tok)}")
    s = tok.symbols
    return [model.next(s[:a]) for a in range(i, j)]


def token_logprobs(model: LanguageModel, tok: SymbolString, i: int = 0, j: int | None = None) -> np.ndarray:
    j = len(tok) if j is None else j
    dists = conditionals(model, tok, i, j)
    p = np.array([d.probs[t] for d, t in zip(dists, tok.symbols[i:j])], dtype=np.float64)
    if np.any(p <= 0):
        a = i + int(np.flatnonzero(p <= 0)[0])
        raise ZeroProbabilityToken(f"token {tok[a]} at position {a} has probability 0")
    return np.log(p)


def empirical_entropy(model: LanguageModel, tok: SymbolString, i: int, j: int) -> float:
    """``-ln`` of the probability of ``tok[i:j]`` given ``tok[:i]``."""
    return float(-math.fsum(token_logprobs(model, tok, i, j)))


def mean_entropy(model: LanguageModel, tok: SymbolString, i: int, j: int) -> float:
    """Sum of the Shannon entropies of the conditionals along ``tok[i:j]``."""
    return math.fsum(d.entropy for d in conditionals(model, tok, i, j))


def spread(model: LanguageModel, phi, tok: SymbolString, a: int, b: int, size: int | None = None) -> float:
    """``sum_i sum_s min(1/|S'|, (phi o P_i)(s))`` over ``i`` in ``[a, b)``."""
    phi = np.asarray(phi)
    size = int(phi.max()) + 1 if size is None else size
    total = []
    for d in conditionals(model, tok, a, b):
        total.extend(np.minimum(1.0 / size, pushforward(d, phi, size)))
    return math.fsum(total)
