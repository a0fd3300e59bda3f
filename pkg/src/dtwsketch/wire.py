"""Bit-level serialization helpers and the framed message container.

A framed message is a 32-bit big-endian count of payload bits followed by the
payload, zero-padded to a whole byte.  Only payload bits are charged to a
protocol; the frame exists so blobs can be written to disk.
"""
from __future__ import annotations

import struct

from bitarray import bitarray
from bitarray.util import ba2int, int2ba


class WireError(ValueError):
    pass


class BitWriter:
    def __init__(self):
        self.bits = bitarray(endian="big")

    def uint(self, value: int, width: int) -> "BitWriter":
        if width == 0:
            if value:
                raise WireError(f"value {value} does not fit in 0 bits")
            return self
        if value < 0 or value >> width:
            raise WireError(f"value {value} does not fit in {width} bits")
        self.bits.extend(int2ba(int(value), length=width, endian="big"))
        return self

    def float32(self, value: float) -> "BitWriter":
        return self.uint(struct.unpack(">I", struct.pack(">f", value))[0], 32)

    def float64(self, value: float) -> "BitWriter":
        return self.uint(struct.unpack(">Q", struct.pack(">d", value))[0], 64)

    def extend(self, other: "BitWriter") -> "BitWriter":
        self.bits.extend(other.bits)
        return self

    def __len__(self):
        return len(self.bits)

    def frame(self) -> bytes:
        return struct.pack(">I", len(self.bits)) + self.bits.tobytes()


class BitReader:
    def __init__(self, bits: bitarray):
        self.bits = bits
        self.pos = 0

    @classmethod
    def from_frame(cls, blob: bytes) -> "BitReader":
        if len(blob) < 4:
            raise WireError("truncated frame")
        (nbits,) = struct.unpack(">I", blob[:4])
        bits = bitarray(endian="big")
        bits.frombytes(blob[4:])
        if len(bits) < nbits:
            raise WireError(f"frame declares {nbits} bits, has {len(bits)}")
        return cls(bits[:nbits])

    def uint(self, width: int) -> int:
        if width == 0:
            return 0
        end = self.pos + width
        if end > len(self.bits):
            raise WireError("read past end of message")
        v = ba2int(self.bits[self.pos:end])
        self.pos = end
        return v

    def float32(self) -> float:
        return struct.unpack(">f", struct.pack(">I", self.uint(32)))[0]

    def float64(self) -> float:
        return struct.unpack(">d", struct.pack(">Q", self.uint(64)))[0]

    def done(self) -> bool:
        return self.pos == len(self.bits)


def width_for(n: int) -> int:
    """Bits needed to store any integer in ``0..n``."""
    return max(1, int(n).bit_length())
