import pytest

from clshare.errors import ProtocolViolation, StepLimitExceeded
from clshare.netsim import AdversaryScript, Injection, Network, Rule


class Recorder:
    def __init__(self, pid, reply_to=None, fail_on=None):
        self.id = pid
        self.got = []
        self.timers = []
        self.reply_to = reply_to
        self.fail_on = fail_on

    def handle(self, net, src, raw):
        self.got.append((net.now, src, raw))
        if raw == self.fail_on:
            raise ProtocolViolation("bad frame")
        if self.reply_to:
            net.send(self.id, self.reply_to, raw)

    def on_timer(self, net, name):
        self.timers.append((net.now, name))


def _pair(**kw):
    net = Network(**kw)
    a, b = Recorder("a"), Recorder("b")
    net.add(a, b)
    return net, a, b


def test_delivery_latency_and_conservation():
    net, a, b = _pair(latency_ms=7)
    net.send("a", "b", b"\xeehello")
    net.send("a", ["a", "b"], b"\xeex")
    net.run()
    assert [(t, s) for t, s, _ in b.got] == [(7, "a"), (7, "a")]
    assert len(a.got) == 1
    assert net.conserved()
    # a broadcast is one transmission on the books
    assert net.ledger.party("a")["bytes_sent"] == 6 + 2


def test_drop_delay_tamper():
    rules = [Rule("drop", dst="a", times=1), Rule("delay", dst="b", delay_ms=100, times=1),
             Rule("tamper", dst="b", offset=0)]
    net, a, b = _pair(adversary=AdversaryScript(rules))
    net.send("b", "a", b"\xeeone")
    net.send("a", "b", b"\xeetwo")
    net.send("a", "b", b"\xeetwo")
    net.run()
    assert a.got == []
    assert [(t, r) for t, _, r in b.got] == [(5, b"\xee\x75wo"), (105, b"\xeetwo")]
    assert net.conserved()
    assert [r.fired for r in rules] == [1, 1, 1]


def test_replay_delivers_twice():
    net, a, b = _pair(adversary=AdversaryScript([Rule("replay", delay_ms=50)]))
    net.send("a", "b", b"\xeex")
    net.run()
    assert [t for t, *_ in b.got] == [5, 55]
    assert any("deliver-replay" in line for line in net.transcript)
    assert net.conserved()


def test_injection_is_not_billed():
    net, a, b = _pair(adversary=AdversaryScript(injections=[Injection(30, "a", "b", b"\xeeevil")]))
    net.inject("a", "b", b"\xeenow")
    net.run()
    assert [(t, r) for t, _, r in b.got] == [(0, b"\xeenow"), (30, b"\xeeevil")]
    assert net.ledger.total()["bytes_sent"] == 0


def test_rejections_are_recorded_not_raised():
    net = Network()
    net.add(Recorder("a"), Recorder("b", fail_on=b"\xeebad"))
    net.send("a", "b", b"\xeebad")
    net.run()
    assert net.rejections == [("b", "?", "ProtocolViolation", "a")]
    assert net.rejected("b", "ProtocolViolation")


def test_advance_clock_and_timers():
    net, a, _ = _pair()
    net.set_timer("a", 100, "t1")
    net.advance_clock(0)
    assert net.now == 0 and a.timers == []
    net.advance_clock(99)
    assert a.timers == []
    net.advance_clock(1)
    assert a.timers == [(100, "t1")] and net.now == 100
    with pytest.raises(ValueError):
        net.advance_clock(-1)


def test_step_limit():
    net = Network(max_steps=50)
    net.add(Recorder("a", reply_to="b"), Recorder("b", reply_to="a"))
    net.send("a", "b", b"\xeeping")
    with pytest.raises(StepLimitExceeded):
        net.run()


def test_same_seed_same_tamper_positions():
    def go(seed):
        net, _, b = _pair(seed=seed, adversary=AdversaryScript([Rule("tamper")]))
        for _ in range(5):
            net.send("a", "b", b"\xee" + bytes(40))
        net.run()
        return [r for *_, r in b.got]
    assert go(1) == go(1)
    assert go(1) != go(2)
