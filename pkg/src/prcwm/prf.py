"""Local weak-PRF families: sparse parity, majority-parity (BFKL) and lookup tables.

A key fixes a support ``J`` of at most ``tau`` input positions and a function
``G`` on those bits, so ``F(x) = G(x[J])``. Every kind can be flattened to a
``2**tau`` truth table indexed by ``sum(x[J[k]] << k)``, which is what the
vectorized and compiled paths use.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import BINARY, SeedLike, SymbolString, as_generator
from .errors import InvalidFamily, KeyFormatError, LengthMismatch


class PrfKind(str, Enum):
    SPARSE_PARITY = "sparse-parity"
    MAJORITY_PARITY = "majority-parity"
    LOOKUP_TABLE = "lookup-table"


_KIND_CODES = {PrfKind.SPARSE_PARITY: 0, PrfKind.MAJORITY_PARITY: 1, PrfKind.LOOKUP_TABLE: 2}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def max_locality(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


@dataclass(frozen=True)
class LocalPrfFamily:
    input_len: int
    locality: int
    noise_level: float = 0.0
    kind: PrfKind = PrfKind.SPARSE_PARITY

    def __post_init__(self):
        object.__setattr__(self, "kind", PrfKind(self.kind))
        if self.input_len < 1:
            raise InvalidFamily("input length must be positive")
        if not 0 <= self.locality <= max_locality(self.input_len):
            raise InvalidFamily(
                f"locality {self.locality} exceeds ceil(log2 {self.input_len}) = {max_locality(self.input_len)}")
        if not 0.0 <= self.noise_level < 0.5:
            raise InvalidFamily(f"noise level must lie in [0, 1/2), got {self.noise_level}")
        if self.kind is PrfKind.MAJORITY_PARITY and self.locality % 2:
            raise InvalidFamily("majority-parity needs an even locality (two halves)")


@dataclass(frozen=True, eq=False)
class PrfKey:
    family: LocalPrfFamily
    support: tuple[int, ...]
    table: np.ndarray | None = None
    # majority-parity only: support[:split] is S1 (majority), support[split:] is S2 (parity)
    split: int = 0
    _tt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        sup = tuple(int(i) for i in self.support)
        object.__setattr__(self, "support", sup)
        n = self.family.input_len
        if len(set(sup)) != len(sup) or any(not 0 <= i < n for i in sup):
            raise InvalidFamily("support indices must be distinct and inside [0, n)")
        if len(sup) > self.family.locality:
            raise InvalidFamily(f"support of size {len(sup)} exceeds locality {self.family.locality}")
        if not 0 <= self.split <= len(sup):
            raise InvalidFamily("majority split must lie inside the support")
        if self.family.kind is PrfKind.LOOKUP_TABLE:
            if self.table is None or len(self.table) != 1 << len(sup):
                raise InvalidFamily("lookup-table key needs a table of 2^|support| bits")
        object.__setattr__(self, "_tt", self._build_truth_table())

    def _build_truth_table(self) -> np.ndarray:
        t = len(self.support)
        idx = np.arange(1 << t, dtype=np.int64)
        bits = (idx[:, None] >> np.arange(t)) & 1 if t else np.zeros((1, 0), dtype=np.int64)
        kind = self.family.kind
        if kind is PrfKind.SPARSE_PARITY:
            tt = bits.sum(axis=1) & 1
        elif kind is PrfKind.MAJORITY_PARITY:
            s1 = bits[:, :self.split].sum(axis=1)
            maj = (2 * s1 > self.split).astype(np.int64)
            tt = maj ^ (bits[:, self.split:].sum(axis=1) & 1)
        else:
            tt = np.asarray(self.table, dtype=np.int64) & 1
        tt = tt.astype(np.uint8)
        tt.flags.writeable = False
        return tt

    @property
    def truth_table(self) -> np.ndarray:
        """Values of ``G`` on all ``2**|support|`` local inputs."""
        return self._tt

    def __eq__(self, other) -> bool:
        return (isinstance(other, PrfKey) and self.family == other.family and self.support == other.support
                and self.split == other.split and np.array_equal(self._tt, other._tt))

    def __hash__(self):
        return hash((self.family, self.support, self.split, self._tt.tobytes()))


def sample_key(family: LocalPrfFamily, seed: SeedLike) -> PrfKey:
    rng = as_generator(seed)
    tau = family.locality
    support = tuple(int(i) for i in rng.choice(family.input_len, size=tau, replace=False))
    if family.kind is PrfKind.SPARSE_PARITY:
        return PrfKey(family, support)
    if family.kind is PrfKind.MAJORITY_PARITY:
        return PrfKey(family, support, split=tau // 2)
    table = rng.integers(0, 2, size=1 << tau, dtype=np.uint8)
    return PrfKey(family, support, table=table)


def _local_index(key: PrfKey, bits: np.ndarray) -> np.ndarray:
    """Pack the supported coordinates of each row of ``bits`` into a table index."""
    sup = np.asarray(key.support, dtype=np.int64)
    if sup.size == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    sel = bits[..., sup].astype(np.int64)
    return (sel << np.arange(sup.size)).sum(axis=-1)


def eval(key: PrfKey, x: SymbolString) -> int:  # noqa: A001 - mirrors the PRF API name
    if len(x) != key.family.input_len:
        raise LengthMismatch(f"PRF input must have {key.family.input_len} bits, got {len(x)}")
    return int(key.truth_table[_local_index(key, x.symbols)])


def eval_batch(key: PrfKey, xs: np.ndarray) -> np.ndarray:
    """Evaluate on each row of an ``(m, n)`` 0/1 array."""
    xs = np.asarray(xs)
    if xs.ndim != 2 or xs.shape[1] != key.family.input_len:
        raise LengthMismatch(f"expected shape (m, {key.family.input_len}), got {xs.shape}")
    return key.truth_table[_local_index(key, xs)]


def eval_noisy(key: PrfKey, x: SymbolString, seed: SeedLike) -> int:
    flip = as_generator(seed).random() < key.family.noise_level
    return eval(key, x) ^ int(flip)


class RandomFunctionOracle:
    """A uniformly random function on ``{0,1}^n``, sampled lazily.

    Stands in for the ideal side of the weak-PRF game in distinguishing tests.
    """

    def __init__(self, n: int, seed: SeedLike):
        self.n = n
        self._rng = as_generator(seed)
        self._values: dict[bytes, int] = {}

    def __call__(self, x: SymbolString) -> int:
        if len(x) != self.n:
            raise LengthMismatch(f"oracle input must have {self.n} bits")
        k = x.symbols.astype(np.uint8).tobytes()
        if k not in self._values:
            self._values[k] = int(self._rng.integers(0, 2))
        return self._values[k]

    def sample(self, m: int) -> tuple[np.ndarray, np.ndarray]:
        """``m`` weak-PRF style queries: uniform inputs with their labels."""
        xs = self._rng.integers(0, 2, size=(m, self.n), dtype=np.int64)
        ys = np.array([self(SymbolString(BINARY, row)) for row in xs], dtype=np.uint8)
        return xs, ys


# -- serialization ----------------------------------------------------------
# layout (little-endian):
#   b"PRF" version:u8 | kind:u8 | n:u32 | tau:u32 | split:u32 | nsup:u32 | q:f64
#   | support:u32*nsup | table_bits:u32 | packed table bytes (LSB-first)
_PRF_MAGIC = b"PRF"
_PRF_VERSION = 1
_HEAD = struct.Struct("<3sBBIIIId")


def key_to_bytes(key: PrfKey) -> bytes:
    fam = key.family
    out = [_HEAD.pack(_PRF_MAGIC, _PRF_VERSION, _KIND_CODES[fam.kind], fam.input_len, fam.locality,
                      key.split, len(key.support), fam.noise_level)]
    out.append(np.asarray(key.support, dtype="<u4").tobytes())
    if fam.kind is PrfKind.LOOKUP_TABLE:
        bits = np.asarray(key.table, dtype=np.uint8)
        out.append(struct.pack("<I", bits.size))
        out.append(np.packbits(bits, bitorder="little").tobytes())
    else:
        out.append(struct.pack("<I", 0))
    return b"".join(out)


def key_from_bytes(buf: bytes, offset: int = 0) -> tuple[PrfKey, int]:
    """Decode a PRF key record starting at ``offset``; returns (key, next offset)."""
    try:
        magic, version, kind_code, n, tau, split, nsup, q = _HEAD.unpack_from(buf, offset)
    except struct.error as exc:
        raise KeyFormatError(f"truncated PRF key: {exc}") from None
    if magic != _PRF_MAGIC or version != _PRF_VERSION or kind_code not in _CODE_KINDS:
        raise KeyFormatError("not a PRF key record")
    pos = offset + _HEAD.size
    support = np.frombuffer(buf, dtype="<u4", count=nsup, offset=pos)
    pos += 4 * nsup
    (nbits,) = struct.unpack_from("<I", buf, pos)
    pos += 4
    table = None
    if nbits:
        nbytes = (nbits + 7) // 8
        table = np.unpackbits(np.frombuffer(buf, dtype=np.uint8, count=nbytes, offset=pos),
                              bitorder="little")[:nbits]
        pos += nbytes
    fam = LocalPrfFamily(n, tau, q, _CODE_KINDS[kind_code])
    return PrfKey(fam, tuple(int(i) for i in support), table=table, split=split), pos
