"""Edit-robust pseudorandom code over a large alphabet.

Each output symbol names an index of the inner binary codeword through a
balanced map ``psi``; the decoder only asks which indices were named at all.
Order and multiplicity carry no information, so insertions and deletions act
on the inner codeword like a handful of bit flips.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import prc_substitution as sub
from ._records import Reader, expect_magic, pack_u32
from .core import SeedLike, SymbolString, as_generator, sub_seed
from .errors import KeyFormatError, LengthMismatch, SymbolOutOfRange


@dataclass(frozen=True)
class IdxParams:
    inner: sub.SubParams
    rho: int

    def __post_init__(self):
        if int(self.rho) != self.rho or self.rho < 2:
            raise ValueError(f"rho must be an integer >= 2, got {self.rho}")

    @property
    def n(self) -> int:
        """Inner block length."""
        return self.inner.N

    @property
    def m_out(self) -> int:
        return math.ceil(math.log(2) * self.inner.N)

    @property
    def q_out(self) -> int:
        return self.rho * self.inner.N


def make_params(inner: sub.SubParams, rho: int) -> IdxParams:
    return IdxParams(inner, rho)


def default_rho(p0: float) -> int:
    """Smallest integer at least ``8 / p0``."""
    return math.ceil(8.0 / p0 - 1e-12)


@dataclass(frozen=True, eq=False)
class IdxKey:
    inner_key: sub.SubKey
    psi: np.ndarray
    # optional precomputed fibers; rebuilt from psi when absent
    fibers_hint: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        psi = np.array(self.psi, dtype=np.int64).reshape(-1)
        n = self.inner_key.N
        if psi.size % n or psi.size == 0:
            raise ValueError("psi length must be a positive multiple of the inner block length")
        counts = np.bincount(psi, minlength=n) if psi.min() >= 0 else None
        if counts is None or counts.size != n or np.any(counts != psi.size // n):
            raise ValueError("psi must hit every inner index exactly rho times")
        psi.flags.writeable = False
        if self.fibers_hint is None:
            fibers = np.argsort(psi, kind="stable").reshape(n, psi.size // n)
        else:
            fibers = np.array(self.fibers_hint, dtype=np.int64).reshape(n, psi.size // n)
            if not np.array_equal(psi[fibers], np.broadcast_to(np.arange(n)[:, None], fibers.shape)):
                raise ValueError("fibers do not match psi")
        fibers.flags.writeable = False
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "fibers_hint", None)
        object.__setattr__(self, "_fibers", fibers)

    @property
    def fibers(self) -> np.ndarray:
        """Row ``j`` lists the ``rho`` symbols that map to ``j``."""
        return self._fibers

    @property
    def rho(self) -> int:
        return int(self._fibers.shape[1])

    def __eq__(self, other) -> bool:
        return (isinstance(other, IdxKey) and self.inner_key == other.inner_key
                and np.array_equal(self.psi, other.psi))

    def __hash__(self):
        return hash((self.inner_key, self.psi.tobytes()))


def _balanced_map_and_fibers(n: int, rho: int, seed: SeedLike) -> tuple[np.ndarray, np.ndarray]:
    # symbols perm[j*rho:(j+1)*rho] form fiber j
    perm = as_generator(seed).permutation(n * rho)
    psi = np.empty(n * rho, dtype=np.int64)
    psi[perm] = np.arange(n * rho, dtype=np.int64) // rho
    return psi, perm.reshape(n, rho)


def balanced_map(n: int, rho: int, seed: SeedLike) -> np.ndarray:
    """Uniform map ``[rho n] -> [n]`` with every fiber of size exactly ``rho``."""
    return _balanced_map_and_fibers(n, rho, seed)[0]


def keygen_idx(params: IdxParams, family, seed: SeedLike) -> IdxKey:
    inner = sub.keygen(params.inner, family, sub_seed(seed, "inner"))
    psi, fibers = _balanced_map_and_fibers(params.n, params.rho, sub_seed(seed, "psi"))
    return IdxKey(inner, psi, fibers)


def perturb_difference(n: int, m: int, y0, seed: SeedLike) -> np.ndarray:
    """Uniform string over ``[n]^m`` rewritten so its symbol set tracks ``support(y0)``.

    Draw ``y1`` uniformly, then remap the symbols in the smaller of the two
    set differences into the larger one with a uniform injection.
    """
    y0 = y0.symbols if isinstance(y0, SymbolString) else np.asarray(y0)
    if y0.size != n:
        raise LengthMismatch(f"y0 must have length {n}, got {y0.size}")
    if m < 1:
        raise ValueError("m must be positive")
    rng = as_generator(seed)
    y1 = rng.integers(0, n, size=m, dtype=np.int64)
    in_s0 = y0.astype(bool)
    in_s1 = np.zeros(n, dtype=bool)
    in_s1[y1] = True
    only0 = np.flatnonzero(in_s0 & ~in_s1)
    only1 = np.flatnonzero(in_s1 & ~in_s0)
    remap = np.arange(n, dtype=np.int64)
    if only0.size >= only1.size:
        # sigma: S1\S0 -> S0\S1, applied to y1
        remap[only1] = rng.permutation(only0)[:only1.size]
    else:
        # tau: S0\S1 -> S1\S0; every tau(a) in y1 becomes a
        remap[rng.permutation(only1)[:only0.size]] = only0
    return remap[y1]


def encode_idx_array(key: IdxKey, params: IdxParams, seed: SeedLike) -> np.ndarray:
    y0 = sub.encode_bits(key.inner_key, params.inner, sub_seed(seed, "inner"))
    rng = as_generator(sub_seed(seed, "outer"))
    y = perturb_difference(params.n, params.m_out, y0, rng)
    return key.fibers[y, rng.integers(0, params.rho, size=y.size)]


def encode_idx(key: IdxKey, params: IdxParams, seed: SeedLike) -> SymbolString:
    return SymbolString(params.q_out, encode_idx_array(key, params, seed))


def project(psi: np.ndarray, z, n: int | None = None) -> np.ndarray:
    """Indicator of ``psi(z)`` as a length-``n`` bit array."""
    psi = np.asarray(psi)
    if n is None:
        n = int(psi.max()) + 1 if psi.size else 0
    zs = z.symbols if isinstance(z, SymbolString) else np.asarray(z, dtype=np.int64)
    out = np.zeros(n, dtype=np.uint8)
    if zs.size:
        out[psi[zs]] = 1
    return out


def decode_idx(key: IdxKey, params: IdxParams, z) -> sub.Verdict:
    zs = z.symbols if isinstance(z, SymbolString) else np.asarray(z, dtype=np.int64)
    if zs.size and (zs.min() < 0 or zs.max() >= params.q_out):
        raise SymbolOutOfRange(f"symbols must lie in [0, {params.q_out})")
    return sub.decode(key.inner_key, params.inner, project(key.psi, zs, params.n))


def typical_band(q: int, m: int) -> tuple[float, float]:
    center = q * (1.0 - math.exp(-m / q))
    width = 2.0 * math.sqrt(m) * math.log(m) if m > 0 else 0.0
    return center - width, center + width


def is_typical(z, q: int, m: int) -> bool:
    zs = z.symbols if isinstance(z, SymbolString) else np.asarray(z)
    if zs.size != m:
        raise LengthMismatch(f"expected length {m}, got {zs.size}")
    lo, hi = typical_band(q, m)
    u = np.unique(zs).size
    return lo <= u <= hi


# -- key file ---------------------------------------------------------------
# b"PRCIDX" | substitution params | rho:u32 | substitution key | psi: u32*(rho N)
IDX_MAGIC = b"PRCIDX"


def idxkey_to_bytes(key: IdxKey, params: IdxParams) -> bytes:
    return (sub.params_to_bytes(params.inner) + struct.pack("<I", params.rho)
            + sub.subkey_to_bytes(key.inner_key) + pack_u32(key.psi))


def idxkey_from_reader(r: Reader) -> tuple[IdxKey, IdxParams]:
    inner = sub.params_from_reader(r)
    (rho,) = r.unpack("<I")
    params = IdxParams(inner, rho)
    inner_key = sub.subkey_from_reader(r, inner.N)
    psi = r.array("<u4", params.q_out).astype(np.int64)
    try:
        return IdxKey(inner_key, psi), params
    except ValueError as exc:
        raise KeyFormatError(str(exc)) from None


def dump_key(key: IdxKey, params: IdxParams) -> bytes:
    return IDX_MAGIC + idxkey_to_bytes(key, params)


def load_key(buf: bytes) -> tuple[IdxKey, IdxParams]:
    r = expect_magic(buf, IDX_MAGIC)
    key, params = idxkey_from_reader(r)
    if r.pos != len(buf):
        raise KeyFormatError("trailing bytes after key record")
    return key, params

