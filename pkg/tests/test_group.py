"""Curve arithmetic: both kernels against an independent affine oracle."""
import pytest
from hypothesis import given, settings, strategies as st

from clshare import group
from clshare._ecpure import GX, GY, N, P
from clshare.errors import DecodeError
from clshare.rng import HashDrbg


def _oracle_add(a, b):
    # textbook affine addition, deliberately independent of the kernels
    if a is None:
        return b
    if b is None:
        return a
    (x1, y1), (x2, y2) = a, b
    if x1 == x2 and (y1 + y2) % P == 0:
        return None
    if a == b:
        lam = 3 * x1 * x1 * pow(2 * y1, -1, P) % P
    else:
        lam = (y2 - y1) * pow(x2 - x1, -1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return x3, (lam * (x1 - x3) - y1) % P


def _oracle_mul(k, pt):
    acc = None
    for bit in bin(k % N)[2:]:
        acc = _oracle_add(acc, acc)
        if bit == "1":
            acc = _oracle_add(acc, pt)
    return acc


@pytest.fixture(params=group.available_backends())
def backend(request):
    old = group.set_backend(request.param)
    yield request.param
    group.set_backend(old)


EDGE_SCALARS = [0, 1, 2, 3, 15, 16, 17, 255, 256, N - 1, N - 2, N, N + 1, 2**255, 2**256 - 1]


@pytest.mark.parametrize("k", EDGE_SCALARS)
def test_mul_base_matches_oracle_on_edges(backend, k):
    assert group.scalar_mult(k, group.GENERATOR).xy == _oracle_mul(k, (GX, GY))


def test_mul_matches_oracle_random(backend):
    rng = HashDrbg(7)
    base = _oracle_mul(123456789, (GX, GY))
    pt = group.Point(base)
    for _ in range(25):
        k = rng.randbelow(2**256)
        assert group.scalar_mult(k, pt).xy == _oracle_mul(k, base)
        assert group.scalar_mult(k, group.GENERATOR).xy == _oracle_mul(k, (GX, GY))


def test_add_edge_cases(backend):
    G = group.GENERATOR
    assert (G + group.IDENTITY) == G
    assert (group.IDENTITY + G) == G
    assert (G + (-G)).is_identity
    assert (G + G) == group.scalar_mult(2, G)
    assert group.scalar_mult(N, G).is_identity


def test_mul_of_identity_and_negatives(backend):
    G = group.GENERATOR
    assert group.scalar_mult(5, group.IDENTITY).is_identity
    assert group.scalar_mult(N - 1, G) == -G


@pytest.mark.skipif("gmp" not in group.available_backends(), reason="compiled kernel not built")
def test_kernels_agree():
    rng = HashDrbg(99)
    pt = group.scalar_mult(rng.randbelow(N), group.GENERATOR)
    results = {}
    for name in ("gmp", "pure"):
        old = group.set_backend(name)
        try:
            results[name] = [(group.scalar_mult(k, pt).xy, group.scalar_mult(k, group.GENERATOR).xy,
                              group.point_add(pt, group.scalar_mult(k, pt)).xy)
                             for k in (HashDrbg(5).randbelow(2**256) for _ in range(40))]
        finally:
            group.set_backend(old)
    assert results["gmp"] == results["pure"]


def test_set_backend_rejects_unknown():
    with pytest.raises((ValueError, ImportError)):
        group.set_backend("quantum")


@settings(max_examples=40, deadline=None)
@given(st.integers(1, N - 1), st.integers(1, N - 1))
def test_scalar_mult_is_homomorphic(a, b):
    G = group.GENERATOR
    assert group.scalar_mult(a, G) + group.scalar_mult(b, G) == group.scalar_mult((a + b) % N, G)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, N - 1))
def test_point_encoding_roundtrip(k):
    pt = group.scalar_mult(k, group.GENERATOR)
    enc = pt.encode()
    assert len(enc) == 33 and enc[0] in (2, 3)
    assert group.Point.decode(enc) == pt


def test_identity_encoding():
    assert group.IDENTITY.encode() == bytes(33)
    assert group.Point.decode(bytes(33), allow_identity=True).is_identity
    with pytest.raises(DecodeError):
        group.Point.decode(bytes(33))


@pytest.mark.parametrize("bad", [b"", bytes(32), b"\x04" + bytes(32), b"\x02" + (P).to_bytes(32, "big"),
                                 b"\x02" + (5).to_bytes(32, "big")])
def test_point_decode_rejects(bad):
    # x=5 has no square root of x^3+7 on secp256k1
    with pytest.raises(DecodeError):
        group.Point.decode(bad)


def test_scalar_codec():
    assert group.decode_scalar(group.encode_scalar(N - 1)) == N - 1
    with pytest.raises(DecodeError):
        group.decode_scalar(N.to_bytes(32, "big"))
    with pytest.raises(DecodeError):
        group.decode_scalar(bytes(32), nonzero=True)
    with pytest.raises(ValueError):
        group.encode_scalar(N)


def test_random_scalar_in_range():
    rng = HashDrbg(3)
    assert all(1 <= group.random_scalar(rng) < N for _ in range(200))


def test_counting():
    from clshare.metering import CostLedger, metered
    led = CostLedger()
    with metered(led):
        group.scalar_mult(3, group.GENERATOR)
        group.GENERATOR + group.GENERATOR
    assert led.total()["scalar_mults"] == 1
    assert led.total()["point_adds"] == 1
