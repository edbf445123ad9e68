"""Deterministic discrete-event network with a Dolev-Yao adversary.

Every frame passes through the adversary before delivery. The adversary sees
and may drop, delay, alter, replay or inject any frame, and may send under
any identity, but holds no honest party's secret key. Time is virtual (ms);
events are ordered by ``(deliver_at, seq)`` so runs are reproducible.

A broadcast (``dst`` is a list) is one transmission: its bytes are counted
once against the sender, with one delivered copy per recipient.
"""
from __future__ import annotations

import heapq
import itertools
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Optional, Protocol, Union

from . import metering
from .errors import ClshareError, ParseError, StepLimitExceeded
from .metering import CostLedger
from .rng import HashDrbg
from .wire import Message, field_span, kind_of


class Party(Protocol):
    id: str

    def handle(self, net: "Network", src: str, raw: bytes) -> None: ...

    def on_timer(self, net: "Network", name: str) -> None: ...


@dataclass
class Rule:
    """One adversary rule. ``None`` in a match field matches anything.

    ``action`` is one of ``pass``, ``drop``, ``delay``, ``tamper``, ``replay``.
    ``times`` bounds how often the rule fires (``None`` = unlimited).
    """

    action: str
    src: Optional[str] = None
    dst: Optional[str] = None
    kind: Optional[str] = None
    delay_ms: int = 0
    field: Optional[str] = None
    offset: Optional[int] = None
    xor: int = 0x01
    times: Optional[int] = None
    fired: int = 0

    def matches(self, src: str, dst: str, kind: str) -> bool:
        if self.times is not None and self.fired >= self.times:
            return False
        return ((self.src is None or self.src == src) and (self.dst is None or self.dst == dst)
                and (self.kind is None or self.kind == kind))


@dataclass
class Injection:
    """A frame the adversary sends at ``at`` ms claiming to be from ``src``."""

    at: int
    src: str
    dst: str
    raw: bytes = b""
    build: Optional[Callable[["Network"], bytes]] = None


class AdversaryScript:
    """First matching rule wins; frames matching no rule pass untouched."""

    def __init__(self, rules: Iterable[Rule] = (), injections: Iterable[Injection] = ()) -> None:
        self.rules = list(rules)
        self.injections = list(injections)

    def pick(self, src: str, dst: str, kind: str) -> Optional[Rule]:
        for rule in self.rules:
            if rule.matches(src, dst, kind):
                rule.fired += 1
                return rule
        return None


@dataclass(order=True)
class _Event:
    at: int
    seq: int
    what: str = field(compare=False)
    dst: str = field(compare=False)
    src: str = field(compare=False, default="")
    raw: bytes = field(compare=False, default=b"")
    name: str = field(compare=False, default="")
    copy: int = field(compare=False, default=0)


class Network:
    def __init__(self, seed: int = 0, latency_ms: int = 5, adversary: AdversaryScript | None = None,
                 ledger: CostLedger | None = None, max_steps: int = 100_000) -> None:
        self.now = 0
        self.latency = latency_ms
        self.adversary = adversary or AdversaryScript()
        self.ledger = ledger or CostLedger()
        self.rng = HashDrbg(seed).fork("net")
        self.max_steps = max_steps
        self.parties: dict[str, Party] = {}
        self.transcript: list[str] = []
        self.wire: list[tuple[int, str, str, bytes]] = []  # everything the adversary observed
        self._events: list[_Event] = []
        self._seq = itertools.count()
        self._copies = itertools.count(1)
        self.sent_copies: set[int] = set()
        self.settled_copies: set[int] = set()
        self.rejections: list[tuple[str, str, str, str]] = []  # (party, kind, error, claimed src)
        # re-signs an altered frame under an adversary-held key; set by the world builder
        self.impersonate: Optional[Callable[[bytes, Rule], bytes]] = None
        self._inj: dict[str, Injection] = {}
        self.schedule_injections()

    def schedule_injections(self) -> None:
        for n, inj in enumerate(self.adversary.injections):
            key = f"inj{n}"
            if key not in self._inj:
                self._inj[key] = inj
                self._push(_Event(inj.at, next(self._seq), "inject", inj.dst, inj.src, inj.raw, name=key))

    def add(self, *parties: Party) -> None:
        for p in parties:
            self.parties[p.id] = p

    def log(self, party: str, event: str, detail: str = "") -> None:
        self.transcript.append(f"{self.now:>7} {party} {event} {detail}".rstrip())

    def _push(self, ev: _Event) -> None:
        heapq.heappush(self._events, ev)

    # --- sending -----------------------------------------------------------

    def send(self, src: str, dst: Union[str, list[str]], msg: Union[Message, bytes]) -> None:
        raw = msg.encode() if isinstance(msg, Message) else bytes(msg)
        targets = [dst] if isinstance(dst, str) else list(dst)
        if isinstance(msg, Message):
            content = msg.content_len()
        else:
            try:
                content = Message.decode(raw).content_len()
            except ParseError:
                content = 0
        self.ledger.add("bytes_sent", len(raw), party=src)
        self.ledger.add("content_bytes", content, party=src)
        kind = kind_of(raw)
        self.log(src, "send", f"{kind} -> {','.join(targets)} {len(raw)}B")
        self.wire.append((self.now, src, ",".join(targets), raw))
        for t in targets:
            self._route(src, t, raw, kind)

    def _route(self, src: str, dst: str, raw: bytes, kind: str) -> None:
        copy = next(self._copies)
        self.sent_copies.add(copy)
        at = self.now + self.latency
        rule = self.adversary.pick(src, dst, kind)
        action = rule.action if rule else "pass"
        if action == "drop":
            self.log("adv", "drop", f"{kind} {src}->{dst} #{copy}")
            self.settled_copies.add(copy)
            return
        if action == "delay":
            at += rule.delay_ms
            self.log("adv", "delay", f"{kind} {src}->{dst} +{rule.delay_ms}ms #{copy}")
        elif action == "tamper" or (action == "impersonate" and self.impersonate is None):
            raw = self._tamper(raw, rule)
            self.log("adv", "tamper", f"{kind} {src}->{dst} {rule.field or 'frame'} #{copy}")
        elif action == "impersonate":
            raw = self.impersonate(raw, rule)
            self.log("adv", "impersonate", f"{kind} {src}->{dst} {rule.field or ''} #{copy}".rstrip())
        elif action == "replay":
            self._push(_Event(at + rule.delay_ms, next(self._seq), "replay", dst, src, raw))
            self.log("adv", "replay", f"{kind} {src}->{dst} at +{rule.delay_ms}ms")
        self._push(_Event(at, next(self._seq), "deliver", dst, src, raw, copy=copy))

    def _tamper(self, raw: bytes, rule: Rule) -> bytes:
        try:
            a, b = field_span(raw, rule.field) if rule.field else (1, len(raw))
        except ParseError:
            a, b = 1, len(raw)
        if b <= a:
            return raw
        pos = a + (rule.offset % (b - a) if rule.offset is not None else self.rng.randbelow(b - a))
        out = bytearray(raw)
        out[pos] ^= rule.xor or 0x01
        return bytes(out)

    def set_timer(self, party: str, at: int, name: str) -> None:
        self._push(_Event(max(at, self.now), next(self._seq), "timer", party, name=name))

    def inject(self, src: str, dst: str, raw: bytes, at: Optional[int] = None) -> None:
        """Adversary-originated frame; not counted against any party's budget."""
        self._push(_Event(self.now if at is None else at, next(self._seq), "inject", dst, src, raw))

    # --- running -----------------------------------------------------------

    def advance_clock(self, ms: int) -> None:
        """Move virtual time forward, firing everything due on the way."""
        if ms < 0:
            raise ValueError("time only moves forward")
        self.run(until=self.now + ms)

    @contextmanager
    def act(self, pid: str) -> Iterator[None]:
        """Run driver code as ``pid`` with this network's ledger active."""
        with metered_ledger(self.ledger), metering.acting_as(pid):
            yield

    def run(self, until: Optional[int] = None) -> None:
        with metered_ledger(self.ledger):
            steps = 0
            while self._events:
                if until is not None and self._events[0].at > until:
                    break
                ev = heapq.heappop(self._events)
                steps += 1
                if steps > self.max_steps:
                    raise StepLimitExceeded(f"more than {self.max_steps} events")
                self.now = max(self.now, ev.at)
                self._fire(ev)
            if until is not None:
                self.now = max(self.now, until)

    def _fire(self, ev: _Event) -> None:
        party = self.parties.get(ev.dst)
        if ev.what == "timer":
            if party is not None:
                with metering.acting_as(ev.dst):
                    self._guard(ev.dst, "timer", "", lambda: party.on_timer(self, ev.name))
            return
        raw = ev.raw
        if ev.what == "inject" and ev.name in self._inj:
            inj = self._inj[ev.name]
            raw = inj.build(self) if inj.build else inj.raw
        kind = kind_of(raw)
        label = {"deliver": "deliver", "replay": "deliver-replay", "inject": "deliver-injected"}[ev.what]
        if ev.copy:
            self.settled_copies.add(ev.copy)
        if party is None:
            self.log("net", "drop", f"{kind} to unknown {ev.dst}")
            return
        self.log(ev.dst, label, f"{kind} from {ev.src} {len(raw)}B")
        with metering.acting_as(ev.dst):
            self._guard(ev.dst, kind, ev.src, lambda: party.handle(self, ev.src, raw))

    def _guard(self, pid: str, kind: str, src: str, fn: Callable[[], None]) -> None:
        try:
            fn()
        except ClshareError as exc:
            name = type(exc).__name__
            self.rejections.append((pid, kind, name, src))
            self.log(pid, "reject", f"{kind} {name}: {exc}")

    def conserved(self) -> bool:
        """Every sent copy was delivered or dropped exactly once."""
        return self.sent_copies == self.settled_copies and not any(e.copy for e in self._events)

    def rejected(self, pid: str, error: str) -> bool:
        return any(p == pid and e == error for p, _, e, _ in self.rejections)


def metered_ledger(ledger: CostLedger):
    """Enter ``ledger`` unless it is already the active one (nested runs)."""
    if metering.active() is ledger:
        return nullcontext()
    return metering.metered(ledger)
