"""Randomness sources.

Protocol code draws from an ``Rng``. :class:`SystemRng` wraps the OS CSPRNG;
:class:`HashDrbg` is a seeded SHA-256 counter generator used by the simulator
so that a scenario replays bit-for-bit. ``fork`` derives an independent child
stream, which lets each party own its own generator.
"""
from __future__ import annotations

import hashlib
import os
import secrets


class SystemRng:
    def randbytes(self, n: int) -> bytes:
        return os.urandom(n)

    def randbelow(self, bound: int) -> int:
        return secrets.randbelow(bound)

    def fork(self, label: str) -> "SystemRng":
        return self


class HashDrbg:
    """Deterministic stream: block i = SHA-256(key || i)."""

    def __init__(self, seed: int | bytes) -> None:
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=False)
        self._key = hashlib.sha256(b"clshare/drbg" + seed).digest()
        self._ctr = 0
        self._buf = b""

    def randbytes(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._buf += hashlib.sha256(self._key + self._ctr.to_bytes(8, "big")).digest()
            self._ctr += 1
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def randbelow(self, bound: int) -> int:
        if bound <= 0:
            raise ValueError("bound must be positive")
        nbytes = (bound.bit_length() + 7) // 8 + 8
        # 64 surplus bits keep the modulo bias negligible
        return int.from_bytes(self.randbytes(nbytes), "big") % bound

    def fork(self, label: str) -> "HashDrbg":
        return HashDrbg(hashlib.sha256(self._key + b"/fork/" + label.encode()).digest())


DEFAULT = SystemRng()
