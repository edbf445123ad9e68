"""Certificateless multireceiver encryption of a 32-byte session key.

One ephemeral ``U = r·P`` is shared by all boxes; recipient j's box is the
payload wrapped under ``H2(r·VK_j, U)`` with the recipient id as AAD. Revoked
identities are dropped before wrapping, so they get no box at all.

Wire format: ``U(33) || count(2) || [id_len(2) || id || box_len(2) || box]*``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .errors import DecodeError, DecryptFailure, EmptyRecipientSet, NoBoxForId
from .group import GENERATOR, POINT_LEN, Point, random_scalar, scalar_mult
from .pki import FullKeyPair, PublicKey, SystemParams, verify_key
from .primitives import H2, KEY_LEN, sym_decrypt, sym_encrypt
from .rng import DEFAULT


@dataclass(frozen=True)
class MreCiphertext:
    U: Point
    boxes: tuple[tuple[bytes, bytes], ...]

    def recipients(self) -> list[bytes]:
        return [rid for rid, _ in self.boxes]

    def encode(self) -> bytes:
        out = [self.U.encode(), len(self.boxes).to_bytes(2, "big")]
        for rid, box in self.boxes:
            out += [len(rid).to_bytes(2, "big"), rid, len(box).to_bytes(2, "big"), box]
        return b"".join(out)

    @classmethod
    def decode(cls, data: bytes) -> "MreCiphertext":
        if len(data) < POINT_LEN + 2:
            raise DecodeError("multireceiver ciphertext too short")
        U = Point.decode(data[:POINT_LEN])
        n = int.from_bytes(data[POINT_LEN:POINT_LEN + 2], "big")
        pos = POINT_LEN + 2
        boxes = []
        for _ in range(n):
            parts = []
            for _ in range(2):
                if pos + 2 > len(data):
                    raise DecodeError("truncated box")
                ln = int.from_bytes(data[pos:pos + 2], "big")
                pos += 2
                if pos + ln > len(data):
                    raise DecodeError("truncated box")
                parts.append(data[pos:pos + ln])
                pos += ln
            boxes.append((parts[0], parts[1]))
        if pos != len(data):
            raise DecodeError("trailing bytes after boxes")
        return cls(U, tuple(boxes))


def mre_encrypt(params: SystemParams, sender_key: FullKeyPair, recipients: Iterable[PublicKey],
                blacklist: Iterable[bytes], payload: bytes, rng=DEFAULT) -> MreCiphertext:
    if len(payload) != KEY_LEN:
        raise ValueError("payload must be a 32-byte key")
    banned = set(blacklist)
    admitted = []
    for pub in recipients:
        if pub.id not in banned and pub.id not in {p.id for p in admitted}:
            admitted.append(pub)
    if not admitted:
        raise EmptyRecipientSet("no admissible recipients")
    r = random_scalar(rng)
    U = scalar_mult(r, GENERATOR)
    boxes = []
    for pub in admitted:
        k = H2(scalar_mult(r, verify_key(params, pub)), U)
        boxes.append((pub.id, sym_encrypt(k, payload, aad=pub.id, rng=rng)))
    return MreCiphertext(U, tuple(boxes))


def mre_decrypt(params: SystemParams, my_key: FullKeyPair, ct: MreCiphertext) -> bytes:
    for rid, box in ct.boxes:
        if rid == my_key.id:
            break
    else:
        raise NoBoxForId(my_key.id.decode(errors="replace"))
    k = H2(scalar_mult(my_key.secret, ct.U), ct.U)
    out = sym_decrypt(k, box, aad=my_key.id)
    if len(out) != KEY_LEN:
        raise DecryptFailure("unwrapped key has wrong length")
    return out
