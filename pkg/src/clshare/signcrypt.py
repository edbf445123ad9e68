"""Certificateless generalized signcryption.

Schnorr-style signatures over the combined secret ``x_i + z_i``; the verifier
rebuilds the signer's key from its public pair and the master key, so an
unregistered or altered pair never verifies. ``signcrypt`` reuses the
signature commitment as a key-agreement ephemeral and signs the ciphertext,
which lets any relay check authenticity without decrypting.

Cost per call: sign 1 scalar mult; verify 3; signcrypt 3 + 1 cipher call;
unsigncrypt 4 + 1 cipher call.
"""
from __future__ import annotations

from dataclasses import dataclass

from . import metering
from .errors import AuthFailure, DecodeError
from .group import GENERATOR, ORDER, POINT_LEN, Point, decode_scalar, encode_scalar, point_add, random_scalar, scalar_mult
from .pki import FullKeyPair, PublicKey, SystemParams, verify_key
from .primitives import CT_OVERHEAD, H1, H2, H3, sym_decrypt, sym_encrypt
from .rng import DEFAULT

SIG_LEN = POINT_LEN + 32


@dataclass(frozen=True)
class Signature:
    R: Point
    s: int

    def encode(self) -> bytes:
        return self.R.encode() + encode_scalar(self.s)

    @classmethod
    def decode(cls, data: bytes) -> "Signature":
        if len(data) != SIG_LEN:
            raise DecodeError(f"signature must be {SIG_LEN} bytes")
        return cls(Point.decode(data[:POINT_LEN]), decode_scalar(data[POINT_LEN:], nonzero=True))


@dataclass(frozen=True)
class SigncryptedPayload:
    R: Point
    s: int
    ct: bytes

    def encode(self) -> bytes:
        return Signature(self.R, self.s).encode() + self.ct

    @classmethod
    def decode(cls, data: bytes) -> "SigncryptedPayload":
        if len(data) < SIG_LEN + CT_OVERHEAD:
            raise DecodeError("signcrypted payload too short")
        sig = Signature.decode(data[:SIG_LEN])
        return cls(sig.R, sig.s, data[SIG_LEN:])


def _respond(key: FullKeyPair, r: int, R: Point, msg: bytes) -> int:
    e = H1(R, key.id, msg)
    s = (r + e * key.secret) % ORDER
    metering.note("sign", key.id, H3(msg))
    return s


def sign(params: SystemParams, key: FullKeyPair, msg: bytes, rng=DEFAULT) -> Signature:
    while True:
        r = random_scalar(rng)
        R = scalar_mult(r, GENERATOR)
        s = _respond(key, r, R, msg)
        if s:
            return Signature(R, s)


def verify(params: SystemParams, signer_id: bytes, pub: PublicKey, msg: bytes, sig: Signature) -> bool:
    if pub.id != signer_id or sig.R.is_identity or not 0 < sig.s < ORDER:
        return False
    vk = verify_key(params, pub)
    e = H1(sig.R, signer_id, msg)
    ok = scalar_mult(sig.s, GENERATOR) == point_add(sig.R, scalar_mult(e, vk))
    if ok:
        metering.note("verify", signer_id, H3(msg))
    return ok


def require(params: SystemParams, signer_id: bytes, pub: PublicKey, msg: bytes, sig: Signature) -> None:
    if not verify(params, signer_id, pub, msg, sig):
        raise AuthFailure(f"bad signature from {signer_id.decode(errors='replace')}")


def _sc_message(recipient_id: bytes, ct: bytes) -> bytes:
    return b"signcrypt" + len(recipient_id).to_bytes(2, "big") + recipient_id + ct


def signcrypt(params: SystemParams, sender_key: FullKeyPair, recipient_id: bytes,
              recipient_pub: PublicKey, msg: bytes, rng=DEFAULT) -> SigncryptedPayload:
    r = random_scalar(rng)
    R = scalar_mult(r, GENERATOR)
    k = H2(scalar_mult(r, verify_key(params, recipient_pub)), R)
    ct = sym_encrypt(k, msg, aad=sender_key.id + b"|" + recipient_id, rng=rng)
    s = _respond(sender_key, r, R, _sc_message(recipient_id, ct))
    return SigncryptedPayload(R, s, ct)


def unsigncrypt(params: SystemParams, recipient_key: FullKeyPair, sender_id: bytes,
                sender_pub: PublicKey, payload: SigncryptedPayload) -> bytes:
    """Decrypt then authenticate; raises DecryptFailure or AuthFailure."""
    k = H2(scalar_mult(recipient_key.secret, payload.R), payload.R)
    msg = sym_decrypt(k, payload.ct, aad=sender_id + b"|" + recipient_key.id)
    require(params, sender_id, sender_pub, _sc_message(recipient_key.id, payload.ct),
            Signature(payload.R, payload.s))
    return msg
