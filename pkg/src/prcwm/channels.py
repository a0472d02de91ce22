"""Budgeted adversarial channels and budget audits.

Every channel is hard-budgeted: at most ``floor(rate * len(x))`` operations,
so ``verify_budget`` can check any output exactly. Channels never see a key;
the greedy strategy may be handed an attacker's guess of ``psi``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import Seed, SeedLike, SymbolString, as_generator, edit_distance, hamming_distance
from .errors import (BudgetInfeasible, InvalidRate, InvalidStrategyForKind, LengthMismatch,
                     ParamParse, PrcError, SymbolOutOfRange)


class ChannelKind(str, Enum):
    SUBSTITUTION = "substitution"
    EDIT = "edit"


class Strategy(str, Enum):
    IID_RANDOM = "iid-random"
    BURST = "burst"
    GREEDY_TARGETED = "greedy-targeted"
    DUPLICATION = "duplication"
    CUSTOM_SCRIPT = "custom-script"


@dataclass(frozen=True)
class EditOp:
    op: str  # "S", "I" or "D"
    pos: int
    sym: int | None = None


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """A bounded channel.

    Substitution rates live in ``[0, 1]``. Edit rates may exceed 1 because
    insertions are not limited by the input length.
    """

    kind: ChannelKind
    rate: float
    strategy: Strategy = Strategy.IID_RANDOM
    seed: Seed = Seed(0, "channel")
    psi_guess: np.ndarray | None = None
    script: tuple[EditOp, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "kind", ChannelKind(self.kind))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        hi = 1.0 if self.kind is ChannelKind.SUBSTITUTION else math.inf
        if not (0.0 <= self.rate <= hi) or math.isnan(self.rate):
            raise InvalidRate(f"rate {self.rate} outside [0, {hi}] for {self.kind.value} channels")
        if self.strategy is Strategy.DUPLICATION and self.kind is ChannelKind.SUBSTITUTION:
            raise InvalidStrategyForKind("duplication changes length; it needs the edit kind")
        if self.kind is ChannelKind.SUBSTITUTION and any(o.op != "S" for o in self.script):
            raise InvalidStrategyForKind("substitution channels accept only S operations")

    def budget(self, length: int) -> int:
        return math.floor(self.rate * length + 1e-9)


def apply_channel(spec: ChannelSpec, x: SymbolString, seed: SeedLike | None = None) -> SymbolString:
    """Corrupt ``x`` within the channel budget; ``seed`` overrides ``spec.seed``."""
    rng = as_generator(spec.seed if seed is None else seed)
    out = apply_channel_array(spec, x.symbols, x.alphabet.size, rng)
    return SymbolString(x.alphabet, out)


def apply_channel_array(spec: ChannelSpec, x: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    k = spec.budget(x.size)
    strat = spec.strategy
    if strat is Strategy.CUSTOM_SCRIPT:
        if len(spec.script) > k:
            raise BudgetInfeasible(f"script has {len(spec.script)} ops, budget is {k}")
        return run_script(x, spec.script, q)
    if k == 0:
        return x.copy()
    sub = spec.kind is ChannelKind.SUBSTITUTION
    if strat is Strategy.IID_RANDOM:
        return _iid_substitute(x, k, q, rng) if sub else _iid_edit(x, k, q, rng)
    if strat is Strategy.BURST:
        return _burst(x, k, q, rng, sub)
    if strat is Strategy.GREEDY_TARGETED:
        return _greedy(x, k, q, rng, sub, spec.psi_guess)
    return _duplicate(x, k, rng)


def _fresh_symbols(old: np.ndarray, q: int, rng) -> np.ndarray:
    """A different symbol at each position (identity when q = 1)."""
    if q < 2:
        return old.copy()
    return (old + rng.integers(1, q, size=old.size)) % q


def _iid_substitute(x, k, q, rng):
    out = x.copy()
    pos = rng.choice(x.size, size=min(k, x.size), replace=False)
    out[pos] = _fresh_symbols(x[pos], q, rng)
    return out


def _iid_edit(x, k, q, rng):
    """``k`` operations, each S/I/D with equal odds, at distinct original positions.

    S and D together touch at most ``len(x)`` symbols; any surplus becomes
    insertions, placed in uniformly random gaps.
    """
    L = x.size
    ops = rng.integers(0, 3, size=k)
    n_s, n_i, n_d = (int(np.count_nonzero(ops == t)) for t in range(3))
    excess = max(0, n_s + n_d - L)
    take_d = min(n_d, excess)
    n_d -= take_d
    n_s -= excess - take_d
    n_i += excess
    touched = rng.choice(L, size=n_s + n_d, replace=False) if L else np.empty(0, np.int64)
    out = x.copy()
    s_pos, d_pos = touched[:n_s], touched[n_s:]
    out[s_pos] = _fresh_symbols(x[s_pos], q, rng)
    keep = np.ones(L, dtype=bool)
    keep[d_pos] = False
    # gap g means "before original position g"; g = L appends
    gaps = np.sort(rng.integers(0, L + 1, size=n_i))
    ins = rng.integers(0, q, size=n_i)
    return _merge(out, keep, gaps, ins)


def _merge(base, keep, gaps, ins):
    L = base.size
    counts = np.bincount(gaps, minlength=L + 1)
    sizes = keep.astype(np.int64) + counts[:L]
    total = int(sizes.sum() + counts[L])
    out = np.empty(total, dtype=np.int64)
    # insertions go first within each gap, then the surviving original
    starts = np.concatenate(([0], np.cumsum(sizes)))
    orig_at = starts[:L] + counts[:L]
    out[orig_at[keep]] = base[keep]
    gap_start = np.concatenate((starts[:L], [starts[L]]))
    rank = np.arange(gaps.size) - np.searchsorted(gaps, gaps, side="left")
    out[gap_start[gaps] + rank] = ins
    return out


def _burst(x, k, q, rng, sub):
    L = x.size
    if sub:
        w = min(k, L)
        start = int(rng.integers(0, L - w + 1))
        out = x.copy()
        out[start:start + w] = _fresh_symbols(x[start:start + w], q, rng)
        return out
    w = min(k, L)
    start = int(rng.integers(0, L - w + 1)) if L else 0
    inner = _iid_edit(x[start:start + w], k, q, rng)
    return np.concatenate([x[:start], inner, x[start + w:]])


def _greedy(x, k, q, rng, sub, psi):
    """Delete (or overwrite) the symbols whose projected index occurs only once."""
    L = x.size
    k = min(k, L)
    if psi is None:
        victims = rng.choice(L, size=k, replace=False)
    else:
        img = np.asarray(psi)[x]
        counts = np.bincount(img)
        singles = np.flatnonzero(counts[img] == 1)
        rest = np.setdiff1d(np.arange(L), singles)
        singles = rng.permutation(singles)
        victims = singles[:k]
        if victims.size < k:
            victims = np.concatenate([victims, rng.permutation(rest)[:k - victims.size]])
    if sub:
        # overwrite victims with copies of symbols that stay
        out = x.copy()
        keep = np.ones(L, dtype=bool)
        keep[victims] = False
        donors = x[keep] if keep.any() else x
        out[victims] = donors[rng.integers(0, donors.size, size=victims.size)]
        return out
    keep = np.ones(L, dtype=bool)
    keep[victims] = False
    return x[keep]


def _duplicate(x, k, rng):
    L = x.size
    if L == 0:
        return x.copy()
    src = rng.integers(0, L, size=k)
    gaps = np.sort(rng.integers(0, L + 1, size=k))
    return _merge(x.copy(), np.ones(L, dtype=bool), gaps, x[src])


# -- scripts ----------------------------------------------------------------

def run_script(x: np.ndarray, script, q: int) -> np.ndarray:
    """Apply ops in order to the evolving string."""
    cur = list(np.asarray(x, dtype=np.int64).tolist())
    for op in script:
        if op.op == "D":
            if not 0 <= op.pos < len(cur):
                raise LengthMismatch(f"delete position {op.pos} outside string of length {len(cur)}")
            del cur[op.pos]
            continue
        if op.sym is None or not 0 <= op.sym < q:
            raise SymbolOutOfRange(f"symbol {op.sym} outside [0, {q})")
        if op.op == "S":
            if not 0 <= op.pos < len(cur):
                raise LengthMismatch(f"substitute position {op.pos} outside string of length {len(cur)}")
            cur[op.pos] = op.sym
        elif op.op == "I":
            if not 0 <= op.pos <= len(cur):
                raise LengthMismatch(f"insert position {op.pos} outside [0, {len(cur)}]")
            cur.insert(op.pos, op.sym)
        else:
            raise ParamParse(f"unknown op {op.op!r}")
    return np.asarray(cur, dtype=np.int64)


def parse_script(text: str) -> tuple[EditOp, ...]:
    ops = []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        try:
            if parts[0] == "D" and len(parts) == 2:
                ops.append(EditOp("D", int(parts[1])))
            elif parts[0] in ("S", "I") and len(parts) == 3:
                ops.append(EditOp(parts[0], int(parts[1]), int(parts[2])))
            else:
                raise ValueError(line)
        except ValueError:
            raise ParamParse(f"bad edit script line {lineno}: {line!r}") from None
    return tuple(ops)


def format_script(ops) -> str:
    return "".join(f"D {o.pos}\n" if o.op == "D" else f"{o.op} {o.pos} {o.sym}\n" for o in ops)


# -- audits -----------------------------------------------------------------

def verify_budget(spec: ChannelSpec, x: SymbolString, y: SymbolString) -> bool:
    k = spec.budget(len(x))
    if x.alphabet != y.alphabet:
        return False
    if spec.kind is ChannelKind.SUBSTITUTION:
        return len(x) == len(y) and hamming_distance(x, y) <= k
    return edit_distance(x, y, max_dist=k) <= k


# -- spec files -------------------------------------------------------------

def spec_from_json(text: str, base_dir=None) -> ChannelSpec:
    """Parse ``{"kind", "rate", "strategy", "seed", "script"|"script_file", "psi_guess"}``."""
    try:
        d = json.loads(text)
        seed = d.get("seed", 0)
        script = ()
        if "script" in d:
            script = parse_script(d["script"] if isinstance(d["script"], str) else "\n".join(d["script"]))
        elif "script_file" in d:
            path = Path(base_dir or ".") / d["script_file"]
            script = parse_script(path.read_text())
        psi = np.asarray(d["psi_guess"], dtype=np.int64) if "psi_guess" in d else None
        return ChannelSpec(d["kind"], float(d["rate"]), d.get("strategy", "iid-random"),
                           Seed(int(seed), d.get("stream", "channel")), psi, script)
    except PrcError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParamParse(f"bad channel spec: {exc}") from None
