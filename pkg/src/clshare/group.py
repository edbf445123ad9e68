"""Prime-order elliptic-curve group (secp256k1) and scalar helpers.

The arithmetic kernel is the compiled GMP extension when it imports, else the
pure-Python module. ``CLSHARE_BACKEND=pure`` forces the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from types import ModuleType
from typing import Optional

from . import _ecpure, metering
from .errors import DecodeError
from .rng import DEFAULT


def _load_kernel(name: str) -> ModuleType:
    if name == "pure":
        return _ecpure
    try:
        from . import _ecext
    except ImportError:
        if name == "gmp":
            raise
        return _ecpure
    return _ecext


_kernel = _load_kernel(os.environ.get("CLSHARE_BACKEND", "auto"))

ORDER = _ecpure.N
FIELD = _ecpure.P
POINT_LEN = 33
SCALAR_LEN = 32


def backend() -> str:
    return _kernel.BACKEND


def available_backends() -> list[str]:
    names = ["pure"]
    try:
        from . import _ecext  # noqa: F401
    except ImportError:
        return names
    return ["gmp"] + names


def set_backend(name: str) -> str:
    """Switch kernels at runtime (benchmarks, cross-checks). Returns the old name."""
    global _kernel
    old = _kernel.BACKEND
    _kernel = _load_kernel(name)
    if name != "auto" and _kernel.BACKEND != name:
        raise ValueError(f"backend {name!r} unavailable")
    return old


@dataclass(frozen=True)
class Point:
    """Affine group element; ``xy is None`` is the identity."""

    xy: Optional[tuple[int, int]]

    @property
    def is_identity(self) -> bool:
        return self.xy is None

    def encode(self) -> bytes:
        if self.xy is None:
            return bytes(POINT_LEN)
        x, y = self.xy
        return bytes([2 | (y & 1)]) + x.to_bytes(32, "big")

    @classmethod
    def decode(cls, data: bytes, allow_identity: bool = False) -> "Point":
        if len(data) != POINT_LEN:
            raise DecodeError(f"point must be {POINT_LEN} bytes, got {len(data)}")
        if data == bytes(POINT_LEN):
            if allow_identity:
                return IDENTITY
            raise DecodeError("identity element not allowed here")
        prefix = data[0]
        if prefix not in (2, 3):
            raise DecodeError("bad point prefix")
        x = int.from_bytes(data[1:], "big")
        if x >= FIELD:
            raise DecodeError("x out of range")
        rhs = (pow(x, 3, FIELD) + 7) % FIELD
        y = pow(rhs, (FIELD + 1) // 4, FIELD)
        if y * y % FIELD != rhs:
            raise DecodeError("x not on curve")
        if (y & 1) != (prefix & 1):
            y = FIELD - y
        return cls((x, y))

    def __add__(self, other: "Point") -> "Point":
        return point_add(self, other)

    def __neg__(self) -> "Point":
        if self.xy is None:
            return self
        return Point((self.xy[0], (-self.xy[1]) % FIELD))

    def __repr__(self) -> str:
        return "Point(identity)" if self.xy is None else f"Point({self.encode().hex()[:18]}..)"


IDENTITY = Point(None)
GENERATOR = Point((_ecpure.GX, _ecpure.GY))


def scalar_mult(k: int, A: Point) -> Point:
    """k·A. Charged as one scalar multiplication."""
    metering.count("scalar_mults")
    if A.xy == GENERATOR.xy:
        return Point(_kernel.mul_base(k))
    return Point(_kernel.mul(k, A.xy))


def point_add(A: Point, B: Point) -> Point:
    metering.count("point_adds")
    return Point(_kernel.add(A.xy, B.xy))


def is_on_curve(A: Point) -> bool:
    return A.xy is None or _kernel.on_curve(*A.xy)


def random_scalar(rng=DEFAULT) -> int:
    """Uniform element of Z_q*."""
    return 1 + rng.randbelow(ORDER - 1)


def encode_scalar(k: int) -> bytes:
    if not 0 <= k < ORDER:
        raise ValueError("scalar out of range")
    return k.to_bytes(SCALAR_LEN, "big")


def decode_scalar(data: bytes, nonzero: bool = False) -> int:
    if len(data) != SCALAR_LEN:
        raise DecodeError(f"scalar must be {SCALAR_LEN} bytes")
    k = int.from_bytes(data, "big")
    if k >= ORDER or (nonzero and k == 0):
        raise DecodeError("scalar out of range")
    return k
