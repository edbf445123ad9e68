import inspect
import pickle

import pytest

from clshare import pki
from clshare.errors import BlacklistedId, DecodeError, DuplicateId, UnknownId
from clshare.group import GENERATOR, IDENTITY, scalar_mult
from clshare.metering import CostLedger, metered
from clshare.primitives import H0
from clshare.rng import HashDrbg


def test_registration_identity_many(world):
    params, kgc, _ = world
    rng = HashDrbg(5)
    for i in range(200):
        key = pki.enroll(params, kgc, f"n{i}".encode(), rng=rng)
        # oracle written from the formula, not from verify_key
        h = H0(key.id, key.Y, key.X, params.Q)
        rhs = key.X + key.Y + scalar_mult(h, params.Q)
        assert scalar_mult(key.secret, GENERATOR) == rhs


def test_kgc_never_sees_the_secret_value():
    assert list(inspect.signature(pki.register).parameters) == ["kgc", "ident", "X"]


def test_duplicate_and_blacklist(world):
    params, kgc, keys = world
    with pytest.raises(DuplicateId):
        pki.register(kgc, b"alice", keys["bob"].X)
    pki.revoke(kgc, b"bob")
    assert kgc.is_revoked(b"bob")
    with pytest.raises(BlacklistedId):
        pki.register(kgc, b"bob", keys["bob"].X)
    with pytest.raises(UnknownId):
        pki.revoke(kgc, b"nobody")
    with pytest.raises(UnknownId):
        kgc.lookup(b"nobody")


def test_register_rejects_bad_public_value(world):
    _, kgc, _ = world
    with pytest.raises(DecodeError):
        pki.register(kgc, b"zed", IDENTITY)


def test_offense_threshold():
    params, kgc = pki.setup(rng=HashDrbg(1), threshold=2)
    pki.enroll(params, kgc, b"m", rng=HashDrbg(2))
    assert not kgc.report_offense(b"m")
    assert kgc.report_offense(b"m")
    assert kgc.is_revoked(b"m")


def test_snapshot(world):
    _, kgc, _ = world
    pki.revoke(kgc, b"carol")
    lines = kgc.snapshot().splitlines()
    assert "carol,revoked" in lines and "alice,active" in lines
    assert lines == sorted(lines)


def test_kgc_state_is_not_serializable(world):
    _, kgc, _ = world
    with pytest.raises(TypeError):
        pickle.dumps(kgc)


def test_only_128_bit_profile():
    with pytest.raises(ValueError):
        pki.setup(security_param=80)


def test_verify_public_key(world):
    params, _, keys = world
    a, b = keys["alice"], keys["bob"]
    probe = pki.make_probe(params, a, HashDrbg(9))
    assert pki.verify_public_key(params, b"alice", (a.X, a.Y), probe)
    assert not pki.verify_public_key(params, b"alice", (b.X, a.Y), probe)
    assert not pki.verify_public_key(params, b"bob", (a.X, a.Y), probe)
    assert not pki.verify_public_key(params, b"alice", "junk", probe)


def test_verify_key_cost(world):
    params, _, keys = world
    led = CostLedger()
    with metered(led):
        pki.verify_key(params, keys["alice"].public)
    assert led.total()["scalar_mults"] == 1
    assert led.total()["point_adds"] == 2


def test_full_key_hides_secrets_in_repr(world):
    _, _, keys = world
    text = repr(keys["alice"])
    assert str(keys["alice"].x) not in text and str(keys["alice"].z) not in text
