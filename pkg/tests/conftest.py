import pytest

from clshare import pki
from clshare.rng import HashDrbg


@pytest.fixture
def rng():
    return HashDrbg(1234)


@pytest.fixture
def world(rng):
    """System params, KGC and a few enrolled entities."""
    params, kgc = pki.setup(rng=rng.fork("kgc"))
    keys = {name: pki.enroll(params, kgc, name.encode(), rng=rng.fork(name))
            for name in ("alice", "bob", "carol", "dave", "erin")}
    return params, kgc, keys
