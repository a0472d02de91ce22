"""Embedding indexing-PRC codewords into sampled text, and substring detection.

A random hash ``phi`` sends tokens to code symbols. Each step nudges the
model's pushforward ``phi o p`` towards the current codeword symbol as far as
the model's own mass allows, then samples a token from ``p`` restricted to
the chosen fiber. Averaged over a uniform codeword symbol the token law is
exactly ``p``.
"""
from __future__ import annotations

import math
import struct
import weakref
from dataclasses import dataclass, field

import numba
import numpy as np

from . import prc_indexing as idx
from ._records import FLAG_PROFILES, PROFILE_FLAGS, expect_magic, pack_u32
from .core import SeedLike, SymbolString, as_generator, sub_seed
from .errors import (AlphabetTooSmall, DegenerateResidual, InvalidParams, KeyFormatError,
                     SymbolOutOfRange)
from .lm import LanguageModel, TokenDistribution, pushforward

RESIDUAL_EPS = 1e-12


@dataclass(frozen=True)
class WatermarkParams:
    n: int
    alpha: float
    sigma_size: int
    L_max: int
    profile: str = "demo"

    def __post_init__(self):
        if self.profile not in PROFILE_FLAGS:
            raise InvalidParams(f"unknown profile {self.profile!r}")
        if not 0.0 <= self.alpha < 1.0:
            raise InvalidParams(f"alpha must lie in [0, 1), got {self.alpha}")
        if self.n < 1 or self.L_max < 1 or self.sigma_size < 1:
            raise InvalidParams("n, L_max and sigma_size must be positive")


def min_alphabet_size(alpha: float, prc_alphabet: int) -> float:
    """Theory lower bound ``(8 |S_prc| / alpha)^(2 / alpha)``."""
    return (8.0 / alpha * prc_alphabet) ** (2.0 / alpha)


def beta_threshold(params: WatermarkParams, ell: float) -> float:
    """Entropy budget in units of ``ln |Sigma|`` a window of length ``ell`` needs."""
    if ell < 0:
        raise InvalidParams("ell must be non-negative")
    return 8.0 * params.n + 6.0 * params.alpha * ell


@dataclass(frozen=True, eq=False)
class WatermarkKey:
    prc_key: idx.IdxKey
    idx_params: idx.IdxParams
    phi: np.ndarray
    _plans: weakref.WeakKeyDictionary = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=np.int64).reshape(-1)
        if phi.size and (phi.min() < 0 or phi.max() >= self.idx_params.q_out):
            raise ValueError("phi must map into the code alphabet")
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "_plans", weakref.WeakKeyDictionary())

    @property
    def prc_alphabet(self) -> int:
        return self.idx_params.q_out

    def plan(self, dist: TokenDistribution) -> "EmbedPlan":
        p = self._plans.get(dist)
        if p is None:
            p = self._plans[dist] = EmbedPlan(dist, self.phi, self.prc_alphabet)
        return p

    def __eq__(self, other) -> bool:
        return (isinstance(other, WatermarkKey) and self.prc_key == other.prc_key
                and self.idx_params == other.idx_params and np.array_equal(self.phi, other.phi))

    def __hash__(self):
        return hash((self.prc_key, self.idx_params, self.phi.tobytes()))


def setup(params: WatermarkParams, idx_params: idx.IdxParams, family, seed: SeedLike) -> WatermarkKey:
    if params.n != idx_params.m_out:
        raise InvalidParams(f"watermark block length {params.n} != code length {idx_params.m_out}")
    K = idx_params.q_out
    if params.profile == "theory" and (params.alpha <= 0 or params.sigma_size < min_alphabet_size(params.alpha, K)):
        raise AlphabetTooSmall(f"|Sigma| = {params.sigma_size} is below the theory bound for alpha = {params.alpha}")
    prc_key = idx.keygen_idx(idx_params, family, sub_seed(seed, "prc"))
    phi = as_generator(sub_seed(seed, "phi")).integers(0, K, size=params.sigma_size, dtype=np.int64)
    return WatermarkKey(prc_key, idx_params, phi)


class EmbedPlan:
    """Precomputed pushforward, residual and per-fiber cumulative masses for one distribution."""

    def __init__(self, dist: TokenDistribution, phi: np.ndarray, K: int):
        if dist.alphabet.size != phi.size:
            raise InvalidParams("distribution alphabet and phi domain differ")
        self.K = K
        self.pbar = pushforward(dist, phi, K)
        self.accept = np.minimum(1.0, K * self.pbar)
        resid = np.maximum(self.pbar - 1.0 / K, 0.0)
        self.resid_cdf = np.cumsum(resid)
        self.order = np.argsort(phi, kind="stable")
        self.cum = np.cumsum(dist.probs[self.order])
        sorted_phi = phi[self.order]
        self.lo = np.searchsorted(sorted_phi, np.arange(K), side="left")
        self.hi = np.searchsorted(sorted_phi, np.arange(K), side="right")

    def fiber_mass(self, y: int) -> tuple[float, float]:
        lo, hi = self.lo[y], self.hi[y]
        if hi == lo:
            return 0.0, 0.0
        base = self.cum[lo - 1] if lo else 0.0
        return base, self.cum[hi - 1] - base

    def choose_symbol(self, x: int, u1: float, u2: float) -> int:
        if u1 < self.accept[x]:
            return x
        total = self.resid_cdf[-1]
        if total <= RESIDUAL_EPS:
            return x  # only reachable through rounding
        return min(int(np.searchsorted(self.resid_cdf, u2 * total, side="right")), self.K - 1)

    def sample_in_fiber(self, y: int, u: float) -> int:
        base, mass = self.fiber_mass(y)
        if mass <= 0.0:
            raise DegenerateResidual(f"code symbol {y} has no model mass")
        k = int(np.searchsorted(self.cum, base + u * mass, side="right"))
        k = min(max(k, self.lo[y]), self.hi[y] - 1)
        return int(self.order[k])

    def sample(self, x: int, rng: np.random.Generator) -> int:
        u = rng.random(3)
        return self.sample_in_fiber(self.choose_symbol(x, u[0], u[1]), u[2])


def embed_token(x: int, p: TokenDistribution, phi, seed: SeedLike, prc_alphabet: int) -> int:
    phi = np.asarray(phi)
    if not 0 <= x < prc_alphabet:
        raise SymbolOutOfRange(f"code symbol {x} outside [0, {prc_alphabet})")
    return EmbedPlan(p, phi, prc_alphabet).sample(x, as_generator(seed))


def embed_token_distribution(x: int, p: TokenDistribution, phi, prc_alphabet: int) -> np.ndarray:
    """Exact law of :func:`embed_token` for a fixed code symbol ``x``."""
    phi = np.asarray(phi)
    plan = EmbedPlan(p, phi, prc_alphabet)
    resid = np.maximum(plan.pbar - 1.0 / prc_alphabet, 0.0)
    ylaw = np.zeros(prc_alphabet)
    if resid.sum() > RESIDUAL_EPS:
        ylaw += (1.0 - plan.accept[x]) * resid / resid.sum()
        ylaw[x] += plan.accept[x]
    else:
        ylaw[x] = 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(plan.pbar[phi] > 0, p.probs / plan.pbar[phi], 0.0)
    return ylaw[phi] * cond


def wat(key: WatermarkKey, params: WatermarkParams, model: LanguageModel, seed: SeedLike) -> SymbolString:
    """Sample up to ``L_max`` tokens, embedding a fresh codeword every ``n`` tokens."""
    if model.alphabet.size != params.sigma_size:
        raise InvalidParams("model alphabet differs from the watermark alphabet")
    rng = as_generator(seed)
    out = np.empty(params.L_max, dtype=np.int64)
    code = None
    for i in range(params.L_max):
        j = i % params.n
        if j == 0:
            code = idx.encode_idx_array(key.prc_key, key.idx_params, rng)
        tok = key.plan(model.next(out[:i])).sample(int(code[j]), rng)
        out[i] = tok
        if tok == model.terminal:
            return SymbolString(model.alphabet, out[:i + 1])
    return SymbolString(model.alphabet, out)


# -- detection --------------------------------------------------------------

@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    witness: tuple[int, int] | None = None  # half-open token window [i, j)
    statistic: int = 0  # W at the witness, else the largest W seen
    threshold: float = 0.0

    def __post_init__(self):
        if self.detected != (self.witness is not None):
            raise ValueError("a detection must carry exactly one witness")

    def __bool__(self) -> bool:
        return self.detected


@numba.njit(cache=True)
def _scan_windows(b, fwd, idx0, w0, tt, offset_bit, n1, thr_int, win):
    """First window ``[i, j]`` (j - i < win) whose agreement count reaches ``thr_int``.

    ``b[t]`` is the inner-codeword index named by token ``t``. A newly named
    index flips one unmasked coordinate, which changes at most one sample.
    """
    L = b.size
    m = idx0.size
    payload = m * n1
    seen = np.zeros(fwd.size, dtype=np.bool_)
    stack = np.empty(min(win, L) + 1, dtype=np.int64)
    cur_idx = idx0.copy()
    cur_w = w0.copy()
    base = 0
    for s in range(m):
        if tt[idx0[s]] == w0[s]:
            base += 1
    best = -1
    for i in range(L):
        for s in range(m):
            cur_idx[s] = idx0[s]
            cur_w[s] = w0[s]
        W = base
        cnt = 0
        stop = min(i + win, L)
        for j in range(i, stop):
            bj = b[j]
            if not seen[bj]:
                seen[bj] = True
                stack[cnt] = bj
                cnt += 1
                k = fwd[bj]
                if k < payload:
                    s = k // n1
                    o = k - s * n1
                    before = 1 if tt[cur_idx[s]] == cur_w[s] else 0
                    if o == n1 - 1:
                        cur_w[s] ^= 1
                    elif offset_bit[o] >= 0:
                        cur_idx[s] ^= 1 << offset_bit[o]
                    after = 1 if tt[cur_idx[s]] == cur_w[s] else 0
                    W += after - before
            if W > best:
                best = W
            if W >= thr_int:
                for c in range(cnt):
                    seen[stack[c]] = False
                return i, j + 1, W, best
        for c in range(cnt):
            seen[stack[c]] = False
    return -1, -1, 0, best


def _check_tokens(key: WatermarkKey, tok) -> np.ndarray:
    t = tok.symbols if isinstance(tok, SymbolString) else np.asarray(tok, dtype=np.int64)
    if t.size and (t.min() < 0 or t.max() >= key.phi.size):
        raise SymbolOutOfRange(f"tokens must lie in [0, {key.phi.size})")
    return t


def detect(key: WatermarkKey, params: WatermarkParams, tok) -> DetectionResult:
    """Scan every window of at most ``n`` tokens, in order of start then end."""
    t = _check_tokens(key, tok)
    ip = key.idx_params.inner
    thr = ip.threshold
    if t.size == 0:
        return DetectionResult(False, None, 0, thr)
    sk = key.prc_key.inner_key
    prf_key = sk.prf_key
    n1 = ip.n + 1
    u0 = sk.z[:ip.payload_len].reshape(ip.m, n1).astype(np.int64)
    sup = np.asarray(prf_key.support, dtype=np.int64)
    offset_bit = np.full(ip.n, -1, dtype=np.int64)
    offset_bit[sup] = np.arange(sup.size)
    idx0 = (u0[:, sup] << np.arange(sup.size)).sum(axis=1) if sup.size else np.zeros(ip.m, np.int64)
    w0 = u0[:, -1].copy()
    b = key.prc_key.psi[key.phi[t]]
    i, j, W, best = _scan_windows(b, sk.pi.forward, idx0.astype(np.int64), w0,
                                  prf_key.truth_table.astype(np.int64), offset_bit, n1,
                                  math.floor(thr) + 1, params.n)
    if i < 0:
        return DetectionResult(False, None, int(max(best, 0)), thr)
    return DetectionResult(True, (int(i), int(j)), int(W), thr)


def detect_reference(key: WatermarkKey, params: WatermarkParams, tok) -> DetectionResult:
    """Window-by-window detection through the full decoder; slow, for cross-checks."""
    t = _check_tokens(key, tok)
    thr = key.idx_params.inner.threshold
    best = 0
    for i in range(t.size):
        for j in range(i + 1, min(i + params.n, t.size) + 1):
            v = idx.decode_idx(key.prc_key, key.idx_params, key.phi[t[i:j]])
            best = max(best, v.statistic)
            if v.accepted:
                return DetectionResult(True, (i, j), v.statistic, thr)
    return DetectionResult(False, None, best, thr)


# -- key file ---------------------------------------------------------------
# b"PRCWMK" version:u8 profile:u8 | alpha:f64 sigma:u32 L_max:u32 n:u32 | indexing key record | phi: u32*sigma
WM_MAGIC = b"PRCWMK"
_VERSION = 1
_HEAD = "<BBdIII"


def dump_key(key: WatermarkKey, params: WatermarkParams) -> bytes:
    head = struct.pack(_HEAD, _VERSION, PROFILE_FLAGS[params.profile], params.alpha,
                       params.sigma_size, params.L_max, params.n)
    return WM_MAGIC + head + idx.idxkey_to_bytes(key.prc_key, key.idx_params) + pack_u32(key.phi)


def load_key(buf: bytes) -> tuple[WatermarkKey, WatermarkParams]:
    r = expect_magic(buf, WM_MAGIC)
    version, flag, alpha, sigma, L_max, n = r.unpack(_HEAD)
    if version != _VERSION or flag not in FLAG_PROFILES:
        raise KeyFormatError("unsupported watermark key version")
    params = WatermarkParams(n, alpha, sigma, L_max, FLAG_PROFILES[flag])
    prc_key, idx_params = idx.idxkey_from_reader(r)
    phi = r.array("<u4", sigma).astype(np.int64)
    if r.pos != len(buf):
        raise KeyFormatError("trailing bytes after key record")
    try:
        return WatermarkKey(prc_key, idx_params, phi), params
    except ValueError as exc:
        raise KeyFormatError(str(exc)) from None
