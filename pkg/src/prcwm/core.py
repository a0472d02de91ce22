"""Strings over finite alphabets, permutations, distances and seeded randomness.

Symbols are 0-indexed integers everywhere. Every randomized routine in the
package takes a :class:`Seed` (or an already-built ``numpy.random.Generator``)
so that any run can be replayed bit for bit.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import AlphabetMismatch, LengthMismatch, SymbolOutOfRange

MAX_ALPHABET = 1 << 20


@dataclass(frozen=True)
class Alphabet:
    size: int

    def __post_init__(self):
        if not 1 <= self.size <= MAX_ALPHABET:
            raise ValueError(f"alphabet size must be in [1, 2^20], got {self.size}")


BINARY = Alphabet(2)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.int64, copy=True).reshape(-1)
    out.flags.writeable = False
    return out


class SymbolString:
    """Immutable sequence of symbols drawn from ``alphabet``."""

    __slots__ = ("alphabet", "symbols")

    def __init__(self, alphabet: Alphabet | int, symbols: Iterable[int] | np.ndarray = ()):
        if isinstance(alphabet, int):
            alphabet = Alphabet(alphabet)
        arr = _frozen(np.fromiter(symbols, dtype=np.int64) if not isinstance(symbols, (np.ndarray, list, tuple)) else symbols)
        if arr.size and (arr.min() < 0 or arr.max() >= alphabet.size):
            raise SymbolOutOfRange(f"symbols must lie in [0, {alphabet.size})")
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "symbols", arr)

    def __setattr__(self, name, value):
        raise AttributeError("SymbolString is immutable")

    @classmethod
    def bits(cls, bits: Iterable[int] | np.ndarray | str) -> "SymbolString":
        if isinstance(bits, str):
            return parse_text(bits, 2)
        return cls(BINARY, bits)

    def __len__(self) -> int:
        return int(self.symbols.size)

    def __iter__(self):
        return (int(s) for s in self.symbols)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return SymbolString(self.alphabet, self.symbols[idx])
        return int(self.symbols[idx])

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymbolString):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.symbols, other.symbols)

    def __hash__(self) -> int:
        return hash((self.alphabet.size, self.symbols.tobytes()))

    def __repr__(self) -> str:
        body = self.to_text() if len(self) <= 32 else self[:32].to_text() + " ..."
        return f"SymbolString(q={self.alphabet.size}, len={len(self)}: {body})"

    def to_text(self) -> str:
        return format_text(self)


def format_text(s: SymbolString) -> str:
    return " ".join(map(str, s.symbols.tolist()))


def parse_text(text: str, alphabet: Alphabet | int) -> SymbolString:
    """Parse the core text form.

    Decimal symbols separated by whitespace. A binary string may also be given
    as one contiguous run of 0/1 characters.
    """
    if isinstance(alphabet, int):
        alphabet = Alphabet(alphabet)
    tokens = text.split()
    if alphabet.size == 2 and len(tokens) == 1 and len(tokens[0]) > 1 and set(tokens[0]) <= {"0", "1"}:
        return SymbolString(alphabet, [int(c) for c in tokens[0]])
    try:
        values = [int(t) for t in tokens]
    except ValueError as exc:
        raise SymbolOutOfRange(f"not a decimal symbol: {exc}") from None
    return SymbolString(alphabet, values)


def _check_alphabets(a: SymbolString, b: SymbolString):
    if a.alphabet != b.alphabet:
        raise AlphabetMismatch(f"alphabet sizes {a.alphabet.size} and {b.alphabet.size} differ")


def hamming_distance(a: SymbolString, b: SymbolString) -> int:
    _check_alphabets(a, b)
    if len(a) != len(b):
        raise LengthMismatch(f"lengths {len(a)} and {len(b)} differ")
    return int(np.count_nonzero(a.symbols != b.symbols))


def edit_distance(a: SymbolString, b: SymbolString, max_dist: int | None = None) -> int:
    """Unit-cost Levenshtein distance, linear space.

    With ``max_dist`` only a band of half-width ``max_dist`` is filled and any
    distance above it is reported as ``max_dist + 1``.
    """
    _check_alphabets(a, b)
    return _levenshtein(a.symbols, b.symbols, max_dist)


def _levenshtein(x: np.ndarray, y: np.ndarray, k: int | None) -> int:
    la, lb = x.size, y.size
    if k is not None and abs(la - lb) > k:
        return k + 1
    if la == 0 or lb == 0:
        d = max(la, lb)
        return d if k is None else min(d, k + 1)
    big = np.int64(la + lb + 1)
    band = max(la, lb) if k is None else k
    cols = np.arange(lb + 1, dtype=np.int64)
    prev = np.where(cols <= band, cols, big)
    for i in range(1, la + 1):
        lo = max(1, i - band)
        hi = min(lb, i + band)
        cur = np.full(lb + 1, big, dtype=np.int64)
        if k is None or i <= k:
            cur[0] = i
        if lo <= hi:
            sub = prev[lo - 1:hi] + (y[lo - 1:hi] != x[i - 1])
            tmp = np.minimum(prev[lo:hi + 1] + 1, sub)
            # insertion chain: cur[j] = min_{t<=j} tmp'[t] + (j - t), seeded by cur[lo-1]
            seeded = np.concatenate(([cur[lo - 1]], tmp))
            offs = np.arange(seeded.size, dtype=np.int64)
            cur[lo - 1:hi + 1] = np.minimum.accumulate(seeded - offs) + offs
            cur[lo - 1] = seeded[0]
        np.minimum(cur, big, out=cur)
        prev = cur
    d = int(prev[lb])
    if k is not None and d > k:
        return k + 1
    return d


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``[0, N)``; ``apply_permutation`` reads ``x[forward[i]]``."""

    forward: np.ndarray
    inverse: np.ndarray

    @classmethod
    def from_forward(cls, forward: Sequence[int] | np.ndarray) -> "Permutation":
        fwd = _frozen(forward)
        n = fwd.size
        if n and (fwd.min() < 0 or fwd.max() >= n or np.unique(fwd).size != n):
            raise ValueError("forward map is not a bijection on [0, N)")
        inv = np.empty(n, dtype=np.int64)
        inv[fwd] = np.arange(n)
        inv.flags.writeable = False
        return cls(fwd, inv)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls.from_forward(np.arange(n))

    @property
    def size(self) -> int:
        return int(self.forward.size)

    def inverted(self) -> "Permutation":
        return Permutation(self.inverse, self.forward)

    def __eq__(self, other) -> bool:
        return isinstance(other, Permutation) and np.array_equal(self.forward, other.forward)

    def __hash__(self) -> int:
        return hash(self.forward.tobytes())


def random_permutation(n: int, seed: "SeedLike") -> Permutation:
    if n < 1:
        raise ValueError("n must be >= 1")
    return Permutation.from_forward(as_generator(seed).permutation(n))


def apply_permutation(pi: Permutation, x: SymbolString) -> SymbolString:
    if len(x) != pi.size:
        raise LengthMismatch(f"permutation of size {pi.size} applied to length {len(x)}")
    return SymbolString(x.alphabet, x.symbols[pi.forward])


# -- randomness -------------------------------------------------------------

@dataclass(frozen=True)
class Seed:
    """A 64-bit seed plus a stream label; equal pairs give equal streams."""

    value: int
    label: str = ""

    def __post_init__(self):
        if not 0 <= self.value < 1 << 64:
            raise ValueError("seed value must be a 64-bit unsigned integer")

    def child(self, *parts) -> "Seed":
        suffix = "/".join(str(p) for p in parts)
        return Seed(self.value, f"{self.label}/{suffix}" if self.label else suffix)

    def generator(self) -> np.random.Generator:
        digest = hashlib.blake2b(self.label.encode(), digest_size=16).digest()
        spawn_key = tuple(int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4))
        ss = np.random.SeedSequence(self.value, spawn_key=spawn_key)
        return np.random.Generator(np.random.Philox(ss))


SeedLike = Union[Seed, np.random.Generator]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, Seed):
        return seed.generator()
    raise TypeError(f"expected Seed or numpy Generator, got {type(seed).__name__}")


def sub_seed(seed: SeedLike, label: str) -> SeedLike:
    """Derive an independent stream for one stage of a composite routine."""
    if isinstance(seed, Seed):
        return seed.child(label)
    return seed
