import pytest
from hypothesis import given, settings, strategies as st

from clshare.errors import AuthFailure, ClshareError, DecryptFailure
from clshare.metering import CostLedger, metered
from clshare.rng import HashDrbg
from clshare.signcrypt import (
    SIG_LEN, Signature, SigncryptedPayload, require, sign, signcrypt, unsigncrypt, verify,
)


def _cost(fn):
    led = CostLedger()
    with metered(led):
        out = fn()
    t = led.total()
    return out, (t["scalar_mults"], t["sym_cipher_calls"])


def test_sign_verify_roundtrip(world, rng):
    params, _, keys = world
    a = keys["alice"]
    sig = sign(params, a, b"hello", rng)
    assert verify(params, b"alice", a.public, b"hello", sig)
    assert not verify(params, b"alice", a.public, b"hellO", sig)
    assert not verify(params, b"bob", keys["bob"].public, b"hello", sig)
    # public key of someone else presented under alice's id
    assert not verify(params, b"alice", keys["bob"].public, b"hello", sig)


def test_every_signature_bit_flip_rejected(world, rng):
    params, _, keys = world
    a = keys["alice"]
    raw = sign(params, a, b"msg", rng).encode()
    assert len(raw) == SIG_LEN
    for bit in range(SIG_LEN * 8):
        bad = bytearray(raw)
        bad[bit // 8] ^= 1 << (bit % 8)
        try:
            ok = verify(params, b"alice", a.public, b"msg", Signature.decode(bytes(bad)))
        except ClshareError:
            ok = False
        assert not ok, bit


def test_require_raises(world, rng):
    params, _, keys = world
    sig = sign(params, keys["alice"], b"m", rng)
    with pytest.raises(AuthFailure):
        require(params, b"alice", keys["alice"].public, b"other", sig)


def test_costs(world, rng):
    params, _, keys = world
    a, b = keys["alice"], keys["bob"]
    sig, c = _cost(lambda: sign(params, a, b"m", rng))
    assert c == (1, 0)
    _, c = _cost(lambda: verify(params, b"alice", a.public, b"m", sig))
    assert c == (3, 0)
    sc, c = _cost(lambda: signcrypt(params, a, b"bob", b.public, b"m", rng))
    assert c == (3, 1)
    _, c = _cost(lambda: unsigncrypt(params, b, b"alice", a.public, sc))
    assert c == (4, 1)


@settings(max_examples=25, deadline=None)
@given(st.binary(max_size=500))
def test_signcrypt_roundtrip(msg):
    from clshare import pki
    params, kgc = pki.setup(rng=HashDrbg(1))
    a = pki.enroll(params, kgc, b"a", rng=HashDrbg(2))
    b = pki.enroll(params, kgc, b"b", rng=HashDrbg(3))
    payload = signcrypt(params, a, b"b", b.public, msg, HashDrbg(msg))
    assert unsigncrypt(params, b, b"a", a.public, SigncryptedPayload.decode(payload.encode())) == msg


def test_signcrypt_every_bit_flip_rejected(world, rng):
    params, _, keys = world
    a, b = keys["alice"], keys["bob"]
    raw = signcrypt(params, a, b"bob", b.public, b"twelve bytes", rng).encode()
    for bit in range(len(raw) * 8):
        bad = bytearray(raw)
        bad[bit // 8] ^= 1 << (bit % 8)
        with pytest.raises(ClshareError):
            unsigncrypt(params, b, b"alice", a.public, SigncryptedPayload.decode(bytes(bad)))


def test_signcrypt_wrong_recipient_or_sender(world, rng):
    params, _, keys = world
    a, b, c = keys["alice"], keys["bob"], keys["carol"]
    payload = signcrypt(params, a, b"bob", b.public, b"secret", rng)
    with pytest.raises(DecryptFailure):
        unsigncrypt(params, c, b"alice", a.public, payload)
    with pytest.raises(DecryptFailure):
        unsigncrypt(params, b, b"carol", c.public, payload)


def test_signatures_are_randomized(world):
    params, _, keys = world
    rng = HashDrbg(4)
    s1, s2 = sign(params, keys["alice"], b"m", rng), sign(params, keys["alice"], b"m", rng)
    assert s1 != s2
