"""Shared plumbing for protocol roles: keys, signatures, freshness, dedup."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import AuthFailure, BlacklistedId, StaleTimestamp
from .pki import FullKeyPair, KgcState, SystemParams
from .primitives import H3
from .rng import DEFAULT
from .signcrypt import Signature, sign, verify


@dataclass
class Timing:
    freshness_ms: int = 30_000
    deadline_ms: int = 10_000


class Endpoint:
    """A registered entity that signs, verifies and tracks replays."""

    def __init__(self, params: SystemParams, key: FullKeyPair, kgc: KgcState,
                 timing: Timing | None = None, rng=DEFAULT) -> None:
        self.params = params
        self.key = key
        self.kgc = kgc
        self.timing = timing or Timing()
        self.rng = rng
        self._seen: set[bytes] = set()

    @property
    def id(self) -> str:
        return self.key.id.decode()

    @property
    def ident(self) -> bytes:
        return self.key.id

    def sign(self, data: bytes) -> Signature:
        return sign(self.params, self.key, data, self.rng)

    def check_sig(self, signer: bytes, data: bytes, sig: Signature) -> None:
        pub = self.kgc.registry.get(signer)
        if pub is None:
            raise AuthFailure(f"unknown signer {signer.decode(errors='replace')}")
        if not verify(self.params, signer, pub, data, sig):
            raise AuthFailure(f"bad signature from {signer.decode(errors='replace')}")

    def check_not_revoked(self, ident: bytes) -> None:
        if self.kgc.is_revoked(ident):
            raise BlacklistedId(ident.decode(errors="replace"))

    def check_fresh(self, ts: int, now: int) -> None:
        w = self.timing.freshness_ms
        if now - ts > w or ts - now > w:
            raise StaleTimestamp(f"timestamp {ts} outside window at {now}")

    def first_time(self, raw: bytes) -> bool:
        """True the first time this exact frame is seen."""
        d = H3(raw)
        if d in self._seen:
            return False
        self._seen.add(d)
        return True
