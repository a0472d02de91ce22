"""Small helpers for the little-endian binary key records."""
from __future__ import annotations

import struct

import numpy as np

from .errors import KeyFormatError, KeyKindMismatch

PROFILE_FLAGS = {"theory": 0, "demo": 1}
FLAG_PROFILES = {v: k for k, v in PROFILE_FLAGS.items()}


class Reader:
    def __init__(self, buf: bytes, offset: int = 0):
        self.buf = buf
        self.pos = offset

    def unpack(self, fmt: str):
        try:
            vals = struct.unpack_from(fmt, self.buf, self.pos)
        except struct.error as exc:
            raise KeyFormatError(f"truncated key record: {exc}") from None
        self.pos += struct.calcsize(fmt)
        return vals

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        if self.pos + size > len(self.buf):
            raise KeyFormatError("truncated key record")
        out = np.frombuffer(self.buf, dtype=dtype, count=count, offset=self.pos)
        self.pos += size
        return out

    def bits(self, count: int) -> np.ndarray:
        raw = self.array("u1", (count + 7) // 8)
        return np.unpackbits(raw, bitorder="little")[:count]

    def magic(self, expected: bytes):
        got = bytes(self.buf[self.pos:self.pos + len(expected)])
        if got != expected:
            raise KeyFormatError(f"bad magic header {got!r}, expected {expected!r}")
        self.pos += len(expected)


def pack_bits(bits) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def pack_u32(values) -> bytes:
    return np.asarray(values, dtype="<u4").tobytes()


KNOWN_MAGICS = (b"PRCSUB", b"PRCIDX", b"PRCWMK")


def expect_magic(buf: bytes, magic: bytes) -> Reader:
    """Reader positioned after ``magic``; a different known kind is a kind mismatch."""
    if not buf.startswith(magic):
        for other in KNOWN_MAGICS:
            if buf.startswith(other):
                raise KeyKindMismatch(f"expected a {magic.decode()} key, got {other.decode()}")
    r = Reader(buf)
    r.magic(magic)
    return r
