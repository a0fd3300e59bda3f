"""Public randomness shared by Alice and Bob.

Sub-protocol seeds are derived from a master seed and a fixed label, so both
parties obtain the same stream without exchanging anything.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, label: str) -> int:
    h = hashlib.blake2b(f"{master & (2**64 - 1)}/{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


class SharedRandomness:
    """A master seed plus labelled derivation.

    >>> SharedRandomness(7).child("gap:3").seed == SharedRandomness(7).child("gap:3").seed
    True
    """

    __slots__ = ("seed",)

    def __init__(self, seed: int):
        self.seed = int(seed) & (2**64 - 1)

    def child(self, label: str) -> "SharedRandomness":
        return SharedRandomness(derive_seed(self.seed, label))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    def __repr__(self):
        return f"SharedRandomness({self.seed:#018x})"
