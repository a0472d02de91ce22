"""Zero-bit binary pseudorandom code built from a local weak PRF.

A codeword hides ``m`` noisy PRF samples ``(x_j, F(x_j) xor e_j)`` under a
one-time pad ``z`` and a secret permutation ``pi``. Decoding unmasks, counts
how many samples agree with ``F`` and accepts when the count clears
``m/2 + ln(m) sqrt(m)``. Without the key the count is ``Bin(m, 1/2)``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import prf
from ._records import FLAG_PROFILES, PROFILE_FLAGS, Reader, expect_magic, pack_bits, pack_u32
from .core import BINARY, Permutation, SeedLike, SymbolString, as_generator, sub_seed
from .errors import (AlphabetMismatch, DemoParamsViolateBlockBound, FamilyMismatch, InvalidRate, KeyFormatError,
                     LengthMismatch)

Profile = Literal["theory", "demo"]


@dataclass(frozen=True)
class SubParams:
    n: int
    m: int
    N: int
    p: float
    q: float
    profile: Profile = "demo"

    def __post_init__(self):
        if self.profile not in PROFILE_FLAGS:
            raise ValueError(f"unknown profile {self.profile!r}")
        if not 0.0 <= self.q < 0.5:
            raise InvalidRate(f"PRF noise q must lie in [0, 1/2), got {self.q}")
        if not 0.0 <= self.p < 0.5:
            raise InvalidRate(f"substitution rate p must lie in [0, 1/2), got {self.p}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if self.N < (self.n + 1) * self.m:
            raise DemoParamsViolateBlockBound(
                f"block length {self.N} < (n+1)m = {(self.n + 1) * self.m}")

    @property
    def payload_len(self) -> int:
        """Coordinates carrying PRF samples; the rest is uniform filler."""
        return (self.n + 1) * self.m

    @property
    def threshold(self) -> float:
        return acceptance_threshold(self.m)


def acceptance_threshold(m: int) -> float:
    return m / 2 + math.log(m) * math.sqrt(m)


def theory_sample_count(n: int, p: float, q: float, C0: float = 1.0) -> int:
    # log base 2 in the exponent
    expo = 4.0 * math.log2(1.0 / (1.0 - 2.0 * p))
    return math.ceil(C0 * (1.0 - 2.0 * q) ** -4 * n ** expo)


def derive_params(n: int, p: float, q: float, C0: float = 1.0, profile: Profile = "theory",
                  m: int | None = None, N: int | None = None) -> SubParams:
    """Theory profile computes ``m`` and ``N = 3m(n+1)^2``; demo takes both from the caller."""
    if not 0.0 < p < 0.5:
        raise InvalidRate(f"p must lie in (0, 1/2), got {p}")
    if not 0.0 <= q < 0.5:
        raise InvalidRate(f"q must lie in [0, 1/2), got {q}")
    if C0 <= 0:
        raise ValueError("C0 must be positive")
    if profile == "theory":
        m = theory_sample_count(n, p, q, C0)
        return SubParams(n, m, 3 * m * (n + 1) ** 2, p, q, "theory")
    if m is None or N is None:
        raise ValueError("demo profile needs explicit m and N")
    return SubParams(n, m, N, p, q, "demo")


@dataclass(frozen=True, eq=False)
class SubKey:
    prf_key: prf.PrfKey
    z: np.ndarray
    pi: Permutation

    def __post_init__(self):
        z = np.array(self.z, dtype=np.uint8).reshape(-1)
        z.flags.writeable = False
        object.__setattr__(self, "z", z)
        if self.pi.size != z.size:
            raise LengthMismatch("pad and permutation sizes differ")

    @property
    def N(self) -> int:
        return int(self.z.size)

    def __eq__(self, other) -> bool:
        return (isinstance(other, SubKey) and self.prf_key == other.prf_key
                and np.array_equal(self.z, other.z) and self.pi == other.pi)

    def __hash__(self):
        return hash((self.prf_key, self.z.tobytes(), self.pi))


def keygen(params: SubParams, family: prf.LocalPrfFamily, seed: SeedLike) -> SubKey:
    if family.input_len != params.n:
        raise FamilyMismatch(f"family input length {family.input_len} != n = {params.n}")
    prf_key = prf.sample_key(family, sub_seed(seed, "prf"))
    z = as_generator(sub_seed(seed, "pad")).integers(0, 2, size=params.N, dtype=np.uint8)
    pi = Permutation.from_forward(as_generator(sub_seed(seed, "perm")).permutation(params.N))
    return SubKey(prf_key, z, pi)


def _check(key: SubKey, params: SubParams):
    if key.N != params.N or key.prf_key.family.input_len != params.n:
        raise FamilyMismatch("key does not match parameters")


def encode_bits(key: SubKey, params: SubParams, seed: SeedLike) -> np.ndarray:
    """Codeword as a uint8 array; see :func:`encode`."""
    _check(key, params)
    rng = as_generator(seed)
    n, m = params.n, params.m
    xs = rng.integers(0, 2, size=(m, n), dtype=np.uint8)
    e = (rng.random(m) < params.q).astype(np.uint8)
    w = prf.eval_batch(key.prf_key, xs) ^ e
    filler = rng.integers(0, 2, size=params.N - params.payload_len, dtype=np.uint8)
    a = np.concatenate([np.hstack([xs, w[:, None]]).reshape(-1), filler])
    return (a ^ key.z)[key.pi.forward]


def encode(key: SubKey, params: SubParams, seed: SeedLike) -> SymbolString:
    return SymbolString(BINARY, encode_bits(key, params, seed))


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    statistic: int
    threshold: float

    def __bool__(self) -> bool:
        return self.accepted


def agreement_count(key: SubKey, params: SubParams, bits: np.ndarray) -> int:
    """Number of unmasked samples whose label matches the PRF."""
    bits = np.asarray(bits)
    if bits.size != params.N:
        raise LengthMismatch(f"decoder expects length {params.N}, got {bits.size}")
    u = (bits[key.pi.inverse[:params.payload_len]].astype(np.uint8)
         ^ key.z[:params.payload_len]).reshape(params.m, params.n + 1)
    return int(np.count_nonzero(prf.eval_batch(key.prf_key, u[:, :-1]) == u[:, -1]))


def decode(key: SubKey, params: SubParams, y: SymbolString | np.ndarray) -> Verdict:
    _check(key, params)
    bits = y.symbols if isinstance(y, SymbolString) else np.asarray(y)
    if isinstance(y, SymbolString) and y.alphabet != BINARY:
        raise AlphabetMismatch("substitution PRC decodes binary strings only")
    W = agreement_count(key, params, bits)
    thr = params.threshold
    return Verdict(W > thr, W, thr)


# -- key file ---------------------------------------------------------------
# b"PRCSUB" version:u8 profile:u8 | n:u32 m:u32 N:u32 p:f64 q:f64
# | prf key record | z: ceil(N/8) bytes | pi.forward: u32*N
SUB_MAGIC = b"PRCSUB"
_VERSION = 1
_PARAMS = "<BBIIIdd"


def params_to_bytes(params: SubParams) -> bytes:
    return struct.pack(_PARAMS, _VERSION, PROFILE_FLAGS[params.profile], params.n, params.m, params.N,
                       params.p, params.q)


def params_from_reader(r: Reader) -> SubParams:
    version, flag, n, m, N, p, q = r.unpack(_PARAMS)
    if version != _VERSION or flag not in FLAG_PROFILES:
        raise KeyFormatError("unsupported substitution key version")
    return SubParams(n, m, N, p, q, FLAG_PROFILES[flag])


def subkey_to_bytes(key: SubKey) -> bytes:
    return prf.key_to_bytes(key.prf_key) + pack_bits(key.z) + pack_u32(key.pi.forward)


def subkey_from_reader(r: Reader, N: int) -> SubKey:
    prf_key, r.pos = prf.key_from_bytes(r.buf, r.pos)
    z = r.bits(N)
    fwd = r.array("<u4", N).astype(np.int64)
    try:
        pi = Permutation.from_forward(fwd)
    except ValueError as exc:
        raise KeyFormatError(str(exc)) from None
    return SubKey(prf_key, z, pi)


def dump_key(key: SubKey, params: SubParams) -> bytes:
    return SUB_MAGIC + params_to_bytes(params) + subkey_to_bytes(key)


def load_key(buf: bytes) -> tuple[SubKey, SubParams]:
    r = expect_magic(buf, SUB_MAGIC)
    params = params_from_reader(r)
    key = subkey_from_reader(r, params.N)
    if r.pos != len(buf):
        raise KeyFormatError("trailing bytes after key record")
    return key, params
