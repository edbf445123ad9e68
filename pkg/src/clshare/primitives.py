"""Hash suite, 1024-bit Diffie-Hellman group and AES-256-GCM.

Encodings: DH elements are 128 bytes big-endian; ciphertexts are
``nonce(12) || body || tag(16)``.
"""
from __future__ import annotations

import hashlib

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from . import metering
from .errors import DecodeError, DecryptFailure
from .group import ORDER, Point, random_scalar
from .rng import DEFAULT

# RFC 2409 Oakley group 2: a 1024-bit safe prime with generator 2.
DH_PRIME = int(
    "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD1"
    "29024E088A67CC74020BBEA63B139B22514A08798E3404DD"
    "EF9519B3CD3A431B302B0A6DF25F14374FE1356D6D51C245"
    "E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED"
    "EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381"
    "FFFFFFFFFFFFFFFF",
    16,
)
DH_GENERATOR = 2
DH_LEN = 128

NONCE_LEN = 12
TAG_LEN = 16
CT_OVERHEAD = NONCE_LEN + TAG_LEN
KEY_LEN = 32


def _lp(data: bytes) -> bytes:
    return len(data).to_bytes(4, "big") + data


def _to_zq_star(tag: bytes, body: bytes) -> int:
    ctr = b""
    while True:
        h = int.from_bytes(hashlib.sha256(tag + body + ctr).digest(), "big") % ORDER
        if h:
            return h
        ctr = bytes([len(ctr)]) + ctr


def H0(ident: bytes, A: Point, B: Point, C: Point) -> int:
    """Identity-binding hash into Z_q*."""
    return _to_zq_star(b"clshare/H0", _lp(ident) + A.encode() + B.encode() + C.encode())


def H1(R: Point, a: bytes, b: bytes) -> int:
    """Signature challenge hash into Z_q*."""
    return _to_zq_star(b"clshare/H1", R.encode() + _lp(a) + _lp(b))


def H2(A: Point, B: Point) -> bytes:
    """Key derivation from two group elements; 32-byte output."""
    return hashlib.sha256(b"clshare/H2" + A.encode() + B.encode()).digest()


def H3(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def xor32(a: bytes, b: bytes) -> bytes:
    if len(a) != 32 or len(b) != 32:
        raise ValueError("xor32 needs two 32-byte strings")
    return bytes(x ^ y for x, y in zip(a, b))


# --- Diffie-Hellman over Z_p* ---------------------------------------------

def check_dh(value: int) -> int:
    if not 1 < value < DH_PRIME - 1:
        raise DecodeError("DH element out of range")
    return value


def dh_exp(base: int, e: int) -> int:
    """base^e mod p. Charged as one modular exponentiation."""
    check_dh(base)
    metering.count("modexps")
    return pow(base, e, DH_PRIME)


def dh_secret(rng=DEFAULT) -> int:
    return random_scalar(rng)


def dh_encode(value: int) -> bytes:
    return check_dh(value).to_bytes(DH_LEN, "big")


def dh_decode(data: bytes) -> int:
    if len(data) != DH_LEN:
        raise DecodeError(f"DH element must be {DH_LEN} bytes")
    return check_dh(int.from_bytes(data, "big"))


def dh_key(shared: int) -> bytes:
    """Symmetric key from a shared DH element."""
    return H3(dh_encode(shared))


# --- authenticated symmetric cipher ----------------------------------------

def sym_encrypt(key: bytes, plaintext: bytes, aad: bytes = b"", rng=DEFAULT) -> bytes:
    if len(key) != KEY_LEN:
        raise ValueError("AES-256 key must be 32 bytes")
    metering.count("sym_cipher_calls")
    nonce = rng.randbytes(NONCE_LEN)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad)


def sym_decrypt(key: bytes, ciphertext: bytes, aad: bytes = b"") -> bytes:
    if len(key) != KEY_LEN:
        raise ValueError("AES-256 key must be 32 bytes")
    metering.count("sym_cipher_calls")
    if len(ciphertext) < CT_OVERHEAD:
        raise DecryptFailure("ciphertext too short")
    try:
        return AESGCM(key).decrypt(ciphertext[:NONCE_LEN], ciphertext[NONCE_LEN:], aad)
    except InvalidTag:
        raise DecryptFailure("authentication tag mismatch") from None
