"""Cooperative group download among swarm UAVs.

Roles: a cluster head (CH) that agrees the file key K_d with the service
provider (SP) over signed Diffie-Hellman, splits the file across itself and
its members (M1), members fetch their segment encrypted under K_d (M2),
broadcast it with their own signature (M3), and the CH finally releases K_d
to every member that pulled its weight via multireceiver encryption (M4).
Members that miss their deadline or share invalid data are blacklisted and
never receive K_d.

Every role method takes the current virtual time and returns the messages to
send; :meth:`handle` adapts them to a :class:`~clshare.netsim.Network`.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import (
    AuthFailure, ClshareError, DecryptFailure, EmptyRecipientSet, MissingSegment,
    NoEligibleMembers, ProtocolViolation, UnknownFile,
)
from .mre import MreCiphertext, mre_decrypt, mre_encrypt
from .primitives import DH_GENERATOR, H3, dh_exp, dh_key, dh_secret, sym_decrypt, sym_encrypt
from .roles import Endpoint
from .wire import BLOB, BYTES, DH, ID, RANGE, SIG, U64, Message, message


# --- messages --------------------------------------------------------------

@message
class DhInit(Message):
    TAG = 0x01
    FIELDS = (("ch_id", ID), ("sp_id", ID), ("fn", BYTES), ("ts", U64), ("share", DH), ("sig", SIG))
    ch_id: bytes
    sp_id: bytes
    fn: bytes
    ts: int
    share: int
    sig: object = None


@message
class DhReply(Message):
    """SP's share; its signature also covers the CH's share it answers."""

    TAG = 0x02
    FIELDS = (("sp_id", ID), ("ch_id", ID), ("fn", BYTES), ("ts", U64), ("share", DH), ("sig", SIG))
    sp_id: bytes
    ch_id: bytes
    fn: bytes
    ts: int
    share: int
    sig: object = None


@message
class M1(Message):
    TAG = 0x11
    FIELDS = (("ch_id", ID), ("member_id", ID), ("fn", BYTES), ("fs", RANGE), ("ts", U64), ("sig", SIG))
    ch_id: bytes
    member_id: bytes
    fn: bytes
    fs: tuple
    ts: int
    sig: object = None


@message
class M2(Message):
    TAG = 0x12
    FIELDS = (("sp_id", ID), ("member_id", ID), ("fn", BYTES), ("fs", RANGE), ("ct", BLOB),
              ("ts", U64), ("sig", SIG))
    CONTENT = "ct"
    sp_id: bytes
    member_id: bytes
    fn: bytes
    fs: tuple
    ct: bytes
    ts: int
    sig: object = None

    def header(self) -> bytes:
        return M2(self.sp_id, self.member_id, self.fn, self.fs, b"", self.ts).unsigned_prefix()

    def signed_bytes(self, context: bytes = b"") -> bytes:
        # SP signs H3(C_i) || header so relays can check it without K_d
        return H3(self.ct) + self.header()


@message
class M3(Message):
    TAG = 0x13
    FIELDS = (("m2", BLOB), ("td", U64), ("sig", SIG))
    m2: bytes
    td: int
    sig: object = None

    def content_len(self) -> int:
        return M2.decode(self.m2).content_len()


@message
class M4(Message):
    TAG = 0x14
    FIELDS = (("ch_id", ID), ("fn", BYTES), ("size", U64), ("mre", BLOB), ("tf", U64), ("sig", SIG))
    ch_id: bytes
    fn: bytes
    size: int
    mre: bytes
    tf: int
    sig: object = None


def _signed(msg, endpoint: Endpoint, context: bytes = b""):
    return dataclasses.replace(msg, sig=endpoint.sign(msg.signed_bytes(context)))


# --- task planning -----------------------------------------------------------

def plan_segments(assignees: list[bytes], size: int, weights: list[int] | None = None,
                  offset: int = 0) -> list[tuple[bytes, tuple[int, int]]]:
    """Split ``[offset, offset+size)`` into contiguous ranges, one per assignee.

    Equal split gives the remainder bytes to the last range; weighted split
    uses largest-remainder rounding. Zero-length ranges are dropped.
    """
    if not assignees:
        raise NoEligibleMembers("nobody to assign segments to")
    n = len(assignees)
    if weights is None:
        base = size // n
        lengths = [base] * (n - 1) + [size - base * (n - 1)]
    else:
        if len(weights) != n or any(w < 0 for w in weights) or sum(weights) == 0:
            raise ValueError("need one non-negative weight per assignee")
        total = sum(weights)
        lengths = [size * w // total for w in weights]
        rems = [size * w % total for w in weights]
        short = size - sum(lengths)
        for i in sorted(range(n), key=lambda i: (-rems[i], i))[:short]:
            lengths[i] += 1
    plan, pos = [], offset
    for who, ln in zip(assignees, lengths):
        if ln:
            plan.append((who, (pos, ln)))
        pos += ln
    return plan


# --- roles -------------------------------------------------------------------

class ServiceProvider(Endpoint):
    def __init__(self, *args, files: dict[bytes, bytes] | None = None, **kw) -> None:
        super().__init__(*args, **kw)
        self.files = dict(files or {})
        self.sessions: dict[tuple[bytes, bytes], bytes] = {}

    def accept_dh_init(self, init: DhInit, raw: bytes, now: int) -> DhReply | None:
        self.check_fresh(init.ts, now)
        if not self.first_time(raw):
            return None
        if init.sp_id != self.ident:
            raise ProtocolViolation("DH init addressed to another SP")
        if init.fn not in self.files:
            raise UnknownFile(init.fn.decode(errors="replace"))
        self.check_not_revoked(init.ch_id)
        self.check_sig(init.ch_id, init.signed_bytes(), init.sig)
        b = dh_secret(self.rng)
        share = dh_exp(DH_GENERATOR, b)
        self.sessions[(init.ch_id, init.fn)] = dh_key(dh_exp(init.share, b))
        reply = DhReply(self.ident, init.ch_id, init.fn, now, share)
        return _signed(reply, self, context=init.share.to_bytes(128, "big"))

    def serve(self, m1: M1, raw: bytes, now: int) -> M2 | None:
        """Answer a forwarded task assignment with the encrypted segment."""
        self.check_fresh(m1.ts, now)
        if not self.first_time(raw):
            return None
        k_d = self.sessions.get((m1.ch_id, m1.fn))
        if m1.fn not in self.files:
            raise UnknownFile(m1.fn.decode(errors="replace"))
        if k_d is None:
            raise ProtocolViolation("no session with this cluster head")
        self.check_not_revoked(m1.member_id)
        self.check_sig(m1.ch_id, m1.signed_bytes(), m1.sig)
        off, ln = m1.fs
        data = self.files[m1.fn]
        if off + ln > len(data):
            raise ProtocolViolation("segment outside file")
        m2 = M2(self.ident, m1.member_id, m1.fn, m1.fs, b"", m1.ts)
        ct = sym_encrypt(k_d, data[off:off + ln], aad=m2.header(), rng=self.rng)
        return _signed(M2(self.ident, m1.member_id, m1.fn, m1.fs, ct, m1.ts), self)

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, DhInit):
            out = self.accept_dh_init(msg, raw, net.now)
            if out is not None:
                net.send(self.id, msg.ch_id.decode(), out)
        elif isinstance(msg, M1):
            out = self.serve(msg, raw, net.now)
            if out is not None:
                net.log(self.id, "serve", f"{msg.member_id.decode()} {msg.fs[0]}+{msg.fs[1]}")
                net.send(self.id, msg.member_id.decode(), out)
        else:
            raise ProtocolViolation(f"SP does not accept {msg.kind}")

    def on_timer(self, net, name: str) -> None:
        pass


class _SegmentStore:
    """Verified M2s keyed by byte range; shared by CH and members."""

    def __init__(self) -> None:
        self.segments: dict[tuple[int, int], M2] = {}
        self.senders: dict[tuple[int, int], bytes] = {}

    def add(self, sender: bytes, m2: M2) -> bool:
        if m2.fs in self.segments:
            return False
        self.segments[m2.fs] = m2
        self.senders[m2.fs] = sender
        return True

    def covered(self, size: int) -> bool:
        return _gaps(self.segments, size) == []

    def assemble(self, k_d: bytes, size: int) -> bytes:
        gaps = _gaps(self.segments, size)
        if gaps:
            raise MissingSegment(f"missing byte ranges {gaps}")
        out = bytearray(size)
        for (off, ln), m2 in self.segments.items():
            out[off:off + ln] = sym_decrypt(k_d, m2.ct, aad=m2.header())
        return bytes(out)


def _gaps(segments, size: int) -> list[tuple[int, int]]:
    covered = sorted(segments)
    gaps, pos = [], 0
    for off, ln in covered:
        if off > pos:
            gaps.append((pos, off - pos))
        pos = max(pos, off + ln)
    if pos < size:
        gaps.append((pos, size - pos))
    return gaps


def _verify_m3(ep: Endpoint, sp_id: bytes, group: set[bytes], raw: bytes, now: int) -> tuple[M3, M2, bool]:
    """Check an M3 broadcast. Returns (m3, m2, sp_ok): ``sp_ok`` is False when
    the sharer's own signature holds but the SP's does not, i.e. the sharer
    itself altered the segment."""
    m3 = M3.decode(raw)
    ep.check_fresh(m3.td, now)
    m2 = M2.decode(m3.m2)
    if m2.member_id not in group:
        raise ProtocolViolation(f"{m2.member_id.decode(errors='replace')} is not in this group")
    ep.check_sig(m2.member_id, m3.signed_bytes(), m3.sig)
    if m2.sp_id != sp_id:
        return m3, m2, False
    try:
        ep.check_sig(m2.sp_id, m2.signed_bytes(), m2.sig)
    except AuthFailure:
        return m3, m2, False
    return m3, m2, True


@dataclass
class _Round:
    number: int
    deadline: int
    tasks: dict[tuple[int, int], bytes] = field(default_factory=dict)


class ClusterHead(Endpoint):
    def __init__(self, *args, sp_id: bytes, members: list[bytes], fn: bytes, file_size: int,
                 weights: dict[bytes, int] | None = None, max_rounds: int | None = None, **kw) -> None:
        super().__init__(*args, **kw)
        self.sp_id = sp_id
        self.members = list(members)
        self.fn = fn
        self.file_size = file_size
        self.weights = weights
        self.max_rounds = max_rounds if max_rounds is not None else max(1, len(members))
        self.blacklist: set[bytes] = set()
        self.store = _SegmentStore()
        self.k_d: bytes | None = None
        self._a: int | None = None
        self._share: int | None = None
        self.rounds: list[_Round] = []
        self.m4: M4 | None = None
        self.aborted: str | None = None

    # session setup
    def begin(self, now: int) -> DhInit:
        self._a = dh_secret(self.rng)
        self._share = dh_exp(DH_GENERATOR, self._a)
        return _signed(DhInit(self.ident, self.sp_id, self.fn, now, self._share), self)

    def accept_dh_reply(self, reply: DhReply, raw: bytes, now: int) -> bool:
        self.check_fresh(reply.ts, now)
        if not self.first_time(raw) or self.k_d is not None:
            return False
        if self._a is None or reply.sp_id != self.sp_id or reply.fn != self.fn:
            raise ProtocolViolation("unsolicited DH reply")
        self.check_sig(self.sp_id, reply.signed_bytes(self._share.to_bytes(128, "big")), reply.sig)
        self.k_d = dh_key(dh_exp(reply.share, self._a))
        self._a = None
        return True

    # task assignment
    def eligible(self) -> list[bytes]:
        return [m for m in self.members if m not in self.blacklist and not self.kgc.is_revoked(m)]

    def assign_tasks(self, now: int, ranges: list[tuple[int, int]] | None = None) -> list[M1]:
        """Plan (or re-plan) the given ranges over CH + eligible members; one signed M1 each."""
        assignees = [self.ident] + self.eligible()
        if ranges is None:
            ranges = [(0, self.file_size)]
        weights = None
        if self.weights is not None:
            weights = [self.weights.get(a, 1) for a in assignees]
        rnd = _Round(len(self.rounds) + 1, now + self.timing.deadline_ms)
        out = []
        for off, ln in ranges:
            for who, fs in plan_segments(assignees, ln, weights, offset=off):
                rnd.tasks[fs] = who
                out.append(_signed(M1(self.ident, who, self.fn, fs, now), self))
        self.rounds.append(rnd)
        return out

    def accept_own_m2(self, m2: M2, raw: bytes, now: int) -> M3 | None:
        self.check_fresh(m2.ts, now)
        if not self.first_time(raw):
            return None
        self.check_sig(m2.sp_id, m2.signed_bytes(), m2.sig)
        if m2.member_id != self.ident:
            raise ProtocolViolation("segment addressed to someone else")
        self.store.add(self.ident, m2)
        return _signed(M3(raw, now), self)

    def accept_m3(self, raw: bytes, now: int) -> bytes | None:
        """Verify a member's broadcast; returns the sender id when newly accepted."""
        self.check_fresh(M3.decode(raw).td, now)
        if not self.first_time(raw):
            return None
        _, m2, sp_ok = _verify_m3(self, self.sp_id, set(self.members), raw, now)
        sender = m2.member_id
        if not sp_ok:
            # the sharer signed altered content, so the offence is attributable
            self.blacklist.add(sender)
            raise AuthFailure(f"SP signature invalid in M3 from {sender.decode(errors='replace')}")
        if sender in self.blacklist:
            raise ProtocolViolation(f"{sender.decode()} is blacklisted")
        self.store.add(sender, m2)
        return sender

    def overdue(self, now: int) -> tuple[set[bytes], list[tuple[int, int]]]:
        """Assignees that missed the current round's deadline, and their ranges."""
        rnd = self.rounds[-1]
        late, missing = set(), []
        for fs, who in rnd.tasks.items():
            if fs not in self.store.segments:
                missing.append(fs)
                if who != self.ident:
                    late.add(who)
        return late, missing

    def consolidate(self, now: int, expired: set[bytes] = frozenset()) -> M4:
        self.blacklist |= set(expired)
        if not self.store.covered(self.file_size):
            raise MissingSegment("file not fully collected")
        recipients = [self.kgc.lookup(m) for m in self.eligible()]
        try:
            ct = mre_encrypt(self.params, self.key, recipients, self.blacklist | self.kgc.blacklist,
                             self.k_d, rng=self.rng)
        except EmptyRecipientSet:
            raise NoEligibleMembers("every member is blacklisted") from None
        self.m4 = _signed(M4(self.ident, self.fn, self.file_size, ct.encode(), now), self)
        return self.m4

    # network adapter
    def start(self, net) -> None:
        net.send(self.id, self.sp_id.decode(), self.begin(net.now))

    def _dispatch_m1s(self, net, m1s: list[M1]) -> None:
        for m1 in m1s:
            dst = self.sp_id if m1.member_id == self.ident else m1.member_id
            net.send(self.id, dst.decode(), m1)
        net.set_timer(self.id, self.rounds[-1].deadline, f"deadline:{len(self.rounds)}")

    def _roster(self) -> list[str]:
        return [m.decode() for m in self.members]

    def _maybe_finish(self, net) -> None:
        if self.m4 is None and self.aborted is None and self.store.covered(self.file_size):
            m4 = self.consolidate(net.now)
            mre = MreCiphertext.decode(m4.mre)
            net.log(self.id, "consolidate", "boxes=" + ",".join(r.decode() for r in mre.recipients()))
            net.send(self.id, self._roster(), m4)

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, DhReply):
            if self.accept_dh_reply(msg, raw, net.now):
                net.log(self.id, "session", "K_d agreed")
                self._dispatch_m1s(net, self.assign_tasks(net.now))
        elif isinstance(msg, M2):
            m3 = self.accept_own_m2(msg, raw, net.now)
            if m3 is not None:
                net.send(self.id, self._roster(), m3)
                self._maybe_finish(net)
        elif isinstance(msg, M3):
            sender = self.accept_m3(raw, net.now)
            if sender is not None:
                net.log(self.id, "accept", f"M3 {sender.decode()}")
                self._maybe_finish(net)
        else:
            raise ProtocolViolation(f"CH does not accept {msg.kind}")

    def on_timer(self, net, name: str) -> None:
        if not name.startswith("deadline:") or int(name.split(":")[1]) != len(self.rounds):
            return
        if self.m4 is not None or self.aborted is not None:
            return
        late, missing = self.overdue(net.now)
        for who in sorted(late):
            self.blacklist.add(who)
            net.log(self.id, "blacklist", f"{who.decode()} missed deadline")
        if not missing:
            return
        if len(self.rounds) >= self.max_rounds:
            self.aborted = "round limit reached"
            net.log(self.id, "abort", self.aborted)
            return
        net.log(self.id, "reassign", " ".join(f"{o}+{n}" for o, n in sorted(missing)))
        self._dispatch_m1s(net, self.assign_tasks(net.now, sorted(missing)))


class GroupMember(Endpoint):
    """Member UAV. ``behavior`` is ``honest``, ``freeride`` (never shares its
    segment) or ``tamper`` (shares a modified segment under its own signature)."""

    def __init__(self, *args, ch_id: bytes, sp_id: bytes, roster: list[bytes],
                 behavior: str = "honest", **kw) -> None:
        super().__init__(*args, **kw)
        self.ch_id = ch_id
        self.sp_id = sp_id
        self.roster = [r for r in roster if r != self.ident]
        self.group = set(roster) | {ch_id}
        self.behavior = behavior
        self.store = _SegmentStore()
        self.tasks: set[tuple[int, int]] = set()
        self.k_d: bytes | None = None
        self.file: bytes | None = None
        self.pending_m4: tuple[M4, bytes] | None = None
        self.last_error: str | None = None

    def check_m1(self, m1: M1, raw: bytes, now: int) -> bool:
        self.check_fresh(m1.ts, now)
        if not self.first_time(raw):
            return False
        if m1.ch_id != self.ch_id or m1.member_id != self.ident:
            raise ProtocolViolation("assignment not for this member")
        self.check_sig(self.ch_id, m1.signed_bytes(), m1.sig)
        self.tasks.add(m1.fs)
        return True

    def share(self, m2: M2, raw: bytes, now: int) -> M3 | None:
        self.check_fresh(m2.ts, now)
        if not self.first_time(raw):
            return None
        self.check_sig(m2.sp_id, m2.signed_bytes(), m2.sig)
        if m2.member_id != self.ident or m2.sp_id != self.sp_id or m2.fs not in self.tasks:
            raise ProtocolViolation("unexpected segment")
        self.store.add(self.ident, m2)
        if self.behavior == "tamper":
            ct = bytearray(m2.ct)
            ct[len(ct) // 2] ^= 0x01
            raw = M2(m2.sp_id, m2.member_id, m2.fn, m2.fs, bytes(ct), m2.ts, m2.sig).encode()
        return _signed(M3(raw, now), self)

    def accept_m3(self, raw: bytes, now: int) -> bytes | None:
        self.check_fresh(M3.decode(raw).td, now)
        if not self.first_time(raw):
            return None
        _, m2, sp_ok = _verify_m3(self, self.sp_id, self.group, raw, now)
        if not sp_ok:
            raise AuthFailure(f"SP signature invalid in M3 from {m2.member_id.decode(errors='replace')}")
        self.store.add(m2.member_id, m2)
        return m2.member_id

    def finalize(self, m4: M4, raw: bytes, now: int) -> bytes:
        """Recover K_d from M4 and rebuild the file; state is untouched on failure."""
        self.check_fresh(m4.tf, now)
        if m4.ch_id != self.ch_id:
            raise ProtocolViolation("M4 from a different cluster head")
        self.check_sig(self.ch_id, m4.signed_bytes(), m4.sig)
        k_d = mre_decrypt(self.params, self.key, MreCiphertext.decode(m4.mre))
        data = self.store.assemble(k_d, m4.size)
        self.k_d, self.file = k_d, data
        return data

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, M1):
            if self.check_m1(msg, raw, net.now):
                net.send(self.id, self.sp_id.decode(), raw)
        elif isinstance(msg, M2):
            m3 = self.share(msg, raw, net.now)
            if m3 is not None and self.behavior != "freeride":
                net.send(self.id, [r.decode() for r in self.roster], m3)
        elif isinstance(msg, M3):
            sender = self.accept_m3(raw, net.now)
            if sender is not None and self.pending_m4 is not None and self.file is None:
                self._try_finalize(net, *self.pending_m4)
        elif isinstance(msg, M4):
            self.check_fresh(msg.tf, net.now)
            if not self.first_time(raw) or self.file is not None:
                net.log(self.id, "dup", "M4")
                return
            self._try_finalize(net, msg, raw)
        else:
            raise ProtocolViolation(f"member does not accept {msg.kind}")

    def _try_finalize(self, net, m4: M4, raw: bytes) -> None:
        try:
            data = self.finalize(m4, raw, net.now)
        except MissingSegment:
            self.pending_m4 = (m4, raw)
            net.log(self.id, "wait", "M4 before all segments")
            return
        except ClshareError as exc:
            self.last_error = type(exc).__name__
            raise
        self.pending_m4 = None
        net.log(self.id, "finalize", f"{len(data)}B sha={H3(data).hex()[:16]}")

    def on_timer(self, net, name: str) -> None:
        pass


def session_setup(ch: ClusterHead, sp: ServiceProvider, now: int = 0) -> bytes:
    """Run the signed DH exchange directly (no network); returns the agreed K_d."""
    init = ch.begin(now)
    reply = sp.accept_dh_init(init, init.encode(), now)
    if reply is None:
        raise ProtocolViolation("SP ignored the DH init")
    ch.accept_dh_reply(reply, reply.encode(), now)
    if sp.sessions[(ch.ident, ch.fn)] != ch.k_d:
        raise DecryptFailure("DH agreement mismatch")
    return ch.k_d


def member_fetch(member: GroupMember, m1: M1, sp: ServiceProvider, now: int = 0) -> M2:
    raw = m1.encode()
    member.check_m1(m1, raw, now)
    m2 = sp.serve(m1, raw, now)
    if m2 is None:
        raise ProtocolViolation("duplicate request")
    return m2

