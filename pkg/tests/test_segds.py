import pytest
from hypothesis import given, strategies as st

from clshare.errors import (
    AuthFailure, MissingSegment, NoEligibleMembers, StaleTimestamp, UnknownFile,
)
from clshare.metering import CostLedger, metered
from clshare.scenario import FILE_NAME, Scenario, build_world
from clshare.segds import M3, M4, _gaps, member_fetch, plan_segments, session_setup

IDS = [b"ch", b"m1", b"m2", b"m3"]


def _plan_oracle(n, size, weights):
    """Independent weighted split: exact rationals, ties to the lower index."""
    from fractions import Fraction
    total = sum(weights)
    exact = [Fraction(size * w, total) for w in weights]
    floors = [int(e) for e in exact]
    order = sorted(range(n), key=lambda i: (-(exact[i] - floors[i]), i))
    for i in order[:size - sum(floors)]:
        floors[i] += 1
    return floors


@given(st.lists(st.integers(0, 9), min_size=1, max_size=8).filter(lambda w: sum(w) > 0),
       st.integers(0, 100_000), st.integers(0, 1000))
def test_weighted_plan_matches_oracle(weights, size, offset):
    who = [f"p{i}".encode() for i in range(len(weights))]
    plan = plan_segments(who, size, weights, offset=offset)
    lengths = dict((w, fs[1]) for w, fs in plan)
    want = _plan_oracle(len(weights), size, weights)
    assert [lengths.get(w, 0) for w in who] == want
    pos = offset
    for _, (off, ln) in plan:
        assert off == pos and ln > 0
        pos += ln
    assert pos == offset + size


@given(st.integers(1, 10), st.integers(0, 10**6))
def test_equal_plan(n, size):
    who = [bytes([i]) for i in range(n)]
    plan = plan_segments(who, size)
    assert sum(ln for _, (_, ln) in plan) == size
    base = size // n
    assert all(ln == base for _, (_, ln) in plan[:-1] if base)


def test_plan_errors():
    with pytest.raises(NoEligibleMembers):
        plan_segments([], 10)
    with pytest.raises(ValueError):
        plan_segments([b"a"], 10, [1, 2])
    with pytest.raises(ValueError):
        plan_segments([b"a", b"b"], 10, [0, 0])


def test_gaps():
    segs = {(0, 10): None, (20, 5): None}
    assert _gaps(segs, 30) == [(10, 10), (25, 5)]
    assert _gaps({}, 4) == [(0, 4)]
    assert _gaps({(0, 4): None}, 4) == []


@pytest.fixture
def w():
    return build_world(Scenario(protocol="segds", members=3, file_size=999, seed=11))


def test_direct_flow_without_network(w):
    ch, sp = w["ch"], w["sp"]
    k_d = session_setup(ch, sp)
    assert len(k_d) == 32
    m1s = ch.assign_tasks(0)
    assert [m.member_id for m in m1s] == IDS
    m3s = []
    for m1 in m1s:
        if m1.member_id == b"ch":
            m2 = sp.serve(m1, m1.encode(), 0)
            m3s.append(ch.accept_own_m2(m2, m2.encode(), 0).encode())
        else:
            member = w[m1.member_id.decode()]
            m2 = member_fetch(member, m1, sp)
            m3s.append(member.share(m2, m2.encode(), 0).encode())
    for raw in m3s[1:]:
        assert ch.accept_m3(raw, 1) is not None
    m4 = ch.consolidate(2)
    for i, pid in enumerate(("m1", "m2", "m3"), start=1):
        for j, raw in enumerate(m3s):
            if j != i:
                assert w[pid].accept_m3(raw, 3) == IDS[j]
        assert w[pid].finalize(m4, m4.encode(), 3) == w.content


def test_missing_segment_keeps_state(w):
    ch, sp = w["ch"], w["sp"]
    session_setup(ch, sp)
    m1s = ch.assign_tasks(0)
    with pytest.raises(MissingSegment):
        ch.consolidate(1)
    m1 = next(m for m in m1s if m.member_id == b"ch")
    m2 = sp.serve(m1, m1.encode(), 0)
    ch.accept_own_m2(m2, m2.encode(), 0)
    for m in m1s[1:]:
        member = w[m.member_id.decode()]
        m2 = member_fetch(member, m, sp)
        ch.accept_m3(member.share(m2, m2.encode(), 0).encode(), 1)
    m4 = ch.consolidate(2)
    # m1 holds only its own segment
    with pytest.raises(MissingSegment):
        w["m1"].finalize(m4, m4.encode(), 3)
    assert w["m1"].file is None and w["m1"].k_d is None


def test_costs_of_setup(w):
    ch, sp = w["ch"], w["sp"]
    led = CostLedger()
    with metered(led):
        init = ch.begin(0)
    assert led.total()["modexps"] == 1 and led.total()["scalar_mults"] == 1
    led.reset()
    with metered(led):
        reply = sp.accept_dh_init(init, init.encode(), 0)
        ch.accept_dh_reply(reply, reply.encode(), 0)
    assert led.total()["modexps"] == 3


def test_setup_rejections(w):
    ch, sp = w["ch"], w["sp"]
    init = ch.begin(0)
    with pytest.raises(StaleTimestamp):
        sp.accept_dh_init(init, init.encode(), 10**6)
    sp.files.clear()
    with pytest.raises(UnknownFile):
        sp.accept_dh_init(init, init.encode(), 0)


def test_member_detects_tampered_segment(w):
    ch, sp = w["ch"], w["sp"]
    session_setup(ch, sp)
    m1 = next(m for m in ch.assign_tasks(0) if m.member_id == b"m2")
    w["m2"].behavior = "tamper"
    m2 = member_fetch(w["m2"], m1, sp)
    raw = w["m2"].share(m2, m2.encode(), 0).encode()
    with pytest.raises(AuthFailure):
        w["m1"].accept_m3(raw, 1)
    with pytest.raises(AuthFailure):
        ch.accept_m3(raw, 1)
    assert b"m2" in ch.blacklist
    assert b"m2" not in ch.eligible()


def test_m4_excludes_blacklisted(w):
    from clshare.mre import MreCiphertext
    ch, sp = w["ch"], w["sp"]
    session_setup(ch, sp)
    ch.assign_tasks(0, [])
    ch.store.segments[(0, 999)] = None
    m4 = ch.consolidate(1, expired={b"m3"})
    assert isinstance(m4, M4) and m4.fn == FILE_NAME
    assert MreCiphertext.decode(m4.mre).recipients() == [b"m1", b"m2"]
    assert M3.TAG != M4.TAG


@pytest.mark.parametrize("size, weights, want", [
    (1000, None, [200] * 5),
    (1001, None, [200, 200, 200, 200, 201]),
    (1000, [2, 1, 1, 1], [400, 200, 200, 200]),
])
def test_plan_examples(size, weights, want):
    who = [bytes([i]) for i in range(len(want))]
    assert [ln for _, (_, ln) in plan_segments(who, size, weights)] == want
