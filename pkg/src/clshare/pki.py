"""Certificateless key generation centre (the AUSF in its KGC role).

The KGC holds the master secret and hands out partial keys; each entity keeps
its own secret value, so the KGC never knows a full private key. The KGC side
of the API only ever receives an entity's public value ``X_i``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from . import group
from .errors import BlacklistedId, DecodeError, DuplicateId, UnknownId
from .group import GENERATOR, ORDER, Point, point_add, random_scalar, scalar_mult
from .primitives import DH_GENERATOR, DH_PRIME, H0
from .rng import DEFAULT

SUITE = "secp256k1/sha256/aes256gcm/modp1024"
PROBE_MESSAGE = b"clshare/key-probe"


@dataclass(frozen=True)
class SystemParams:
    Q: Point
    P: Point = GENERATOR
    q: int = ORDER
    dh_prime: int = DH_PRIME
    dh_generator: int = DH_GENERATOR
    suite: str = SUITE


@dataclass(frozen=True)
class PublicKey:
    id: bytes
    X: Point
    Y: Point


@dataclass(frozen=True)
class FullKeyPair:
    id: bytes
    x: int = field(repr=False)
    z: int = field(repr=False)
    X: Point
    Y: Point

    @property
    def secret(self) -> int:
        """Combined signing/decryption exponent x_i + z_i."""
        return (self.x + self.z) % ORDER

    @property
    def public(self) -> PublicKey:
        return PublicKey(self.id, self.X, self.Y)


@dataclass
class KgcState:
    params: SystemParams
    x0: int = field(repr=False)
    registry: dict[bytes, PublicKey] = field(default_factory=dict)
    blacklist: set[bytes] = field(default_factory=set)
    offenses: Counter = field(default_factory=Counter)
    threshold: int = 1
    rng: object = field(default=DEFAULT, repr=False)

    def __getstate__(self):
        raise TypeError("KGC state holds the master secret and is never serialized")

    def is_revoked(self, ident: bytes) -> bool:
        return ident in self.blacklist

    def lookup(self, ident: bytes) -> PublicKey:
        try:
            return self.registry[ident]
        except KeyError:
            raise UnknownId(ident.decode(errors="replace")) from None

    def report_offense(self, ident: bytes) -> bool:
        """Count one misbehaviour; revoke once the threshold is reached."""
        self.offenses[ident] += 1
        if self.offenses[ident] >= self.threshold and ident in self.registry:
            self.blacklist.add(ident)
            return True
        return False

    def snapshot(self) -> str:
        lines = []
        for ident in sorted(self.registry):
            status = "revoked" if ident in self.blacklist else "active"
            lines.append(f"{ident.decode(errors='replace')},{status}")
        return "\n".join(lines) + ("\n" if lines else "")


def setup(security_param: int = 128, rng=DEFAULT, threshold: int = 1) -> tuple[SystemParams, KgcState]:
    if security_param != 128:
        raise ValueError("only the 128-bit profile is available")
    x0 = random_scalar(rng)
    params = SystemParams(Q=scalar_mult(x0, GENERATOR))
    return params, KgcState(params=params, x0=x0, threshold=threshold, rng=rng)


def register(kgc: KgcState, ident: bytes, X: Point) -> tuple[int, Point]:
    """Issue partial keys (z_i, Y_i) for ``ident``; delivery is the return value."""
    if ident in kgc.blacklist:
        raise BlacklistedId(ident.decode(errors="replace"))
    if ident in kgc.registry:
        raise DuplicateId(ident.decode(errors="replace"))
    if X.is_identity or not group.is_on_curve(X):
        raise DecodeError("public value must be a valid non-identity point")
    y = random_scalar(kgc.rng)
    Y = scalar_mult(y, GENERATOR)
    z = (y + kgc.x0 * H0(ident, Y, X, kgc.params.Q)) % ORDER
    kgc.registry[ident] = PublicKey(ident, X, Y)
    return z, Y


def revoke(kgc: KgcState, ident: bytes) -> None:
    if ident not in kgc.registry:
        raise UnknownId(ident.decode(errors="replace"))
    kgc.blacklist.add(ident)


def enroll(params: SystemParams, kgc: KgcState, ident: bytes, rng=DEFAULT) -> FullKeyPair:
    """Entity side of registration: pick x_i, submit X_i, assemble the full key."""
    x = random_scalar(rng)
    X = scalar_mult(x, GENERATOR)
    z, Y = register(kgc, ident, X)
    key = FullKeyPair(ident, x, z, X, Y)
    if not check_key(params, key):
        raise DecodeError("partial key failed the registration identity")
    return key


def verify_key(params: SystemParams, pub: PublicKey) -> Point:
    """Public verification key X_i + Y_i + H0(ID_i, Y_i, X_i, Q)·Q."""
    h = H0(pub.id, pub.Y, pub.X, params.Q)
    return point_add(point_add(pub.X, pub.Y), scalar_mult(h, params.Q))


def check_key(params: SystemParams, key: FullKeyPair) -> bool:
    """Registration identity (x_i + z_i)·P == X_i + Y_i + H0(..)·Q."""
    return scalar_mult(key.secret, GENERATOR) == verify_key(params, key.public)


def make_probe(params: SystemParams, key: FullKeyPair, rng=DEFAULT):
    from .signcrypt import sign

    return sign(params, key, PROBE_MESSAGE + key.id, rng)


def verify_public_key(params: SystemParams, ident: bytes, pub: tuple[Point, Point], probe_sig) -> bool:
    from .signcrypt import verify

    try:
        X, Y = pub
        return verify(params, ident, PublicKey(ident, X, Y), PROBE_MESSAGE + ident, probe_sig)
    except Exception:  # noqa: BLE001 - any malformed input is simply "not authentic"
        return False

