"""Direct UAV-to-UE data sharing with deferred key release.

Flow: ``Req`` (UE's DH share) -> ``Data`` (content encrypted under the DH key,
UAV withholds its share) -> ``Hint`` (UE acknowledges receipt of the
ciphertext and prepays) -> ``KeyRel`` (UAV's share) -> ``Ack`` (UE confirms
the plaintext carries a valid SP signature). The AUSF settles payments from
forwarded acks and adjudicates disputes.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import (
    DecryptFailure, HintMismatch, ParseError, ProtocolViolation,
    SpSignatureInvalid, StaleTimestamp, UnknownFile, UnknownUE,
)
from .pki import FullKeyPair, KgcState, SystemParams
from .primitives import DH_GENERATOR, H3, dh_exp, dh_key, dh_secret, sym_decrypt, sym_encrypt, xor32
from .roles import Endpoint
from .signcrypt import Signature, sign, verify
from .wire import BLOB, BYTES, DH, DIGEST, ID, SIG, U64, Message, message

DEFAULT_PREPAY = 20


# --- messages ----------------------------------------------------------------

@message
class Req(Message):
    TAG = 0x21
    FIELDS = (("ue_id", ID), ("uav_id", ID), ("fn", BYTES), ("ts", U64), ("share", DH), ("sig", SIG))
    ue_id: bytes
    uav_id: bytes
    fn: bytes
    ts: int
    share: int
    sig: object = None


@message
class Data(Message):
    TAG = 0x22
    FIELDS = (("uav_id", ID), ("ue_id", ID), ("mprime", BLOB), ("ts", U64), ("sp_sig", SIG), ("sig", SIG))
    CONTENT = "mprime"
    uav_id: bytes
    ue_id: bytes
    mprime: bytes
    ts: int
    sp_sig: object
    sig: object = None


@message
class Hint(Message):
    TAG = 0x23
    FIELDS = (("ue_id", ID), ("uav_id", ID), ("fn", BYTES), ("ts", U64), ("ti", U64), ("x1", DIGEST),
              ("sig", SIG))
    ue_id: bytes
    uav_id: bytes
    fn: bytes
    ts: int
    ti: int
    x1: bytes
    sig: object = None


@message
class KeyRel(Message):
    """No timestamp on the wire; the signature binds the request's ts and share."""

    TAG = 0x24
    FIELDS = (("uav_id", ID), ("ue_id", ID), ("share", DH), ("fn", BYTES), ("sig", SIG))
    uav_id: bytes
    ue_id: bytes
    share: int
    fn: bytes
    sig: object = None


@message
class Ack(Message):
    TAG = 0x25
    FIELDS = (("ue_id", ID), ("uav_id", ID), ("fn", BYTES), ("x2", DIGEST), ("ti", U64), ("sig", SIG))
    ue_id: bytes
    uav_id: bytes
    fn: bytes
    x2: bytes
    ti: int
    sig: object = None


@message
class AckClaim(Message):
    """UAV -> AUSF: a UE's ack submitted for settlement."""

    TAG = 0x2A
    FIELDS = (("ack", BLOB),)
    ack: bytes


@message
class Dispute(Message):
    """UE -> AUSF: failure report with the UAV-signed evidence.

    ``secret`` is the UE's DH exponent for the finished session, which lets
    the AUSF decrypt M' itself; empty when no key was ever released.
    """

    TAG = 0x2B
    FIELDS = (("req", BLOB), ("data", BLOB), ("hint", BLOB), ("keyrel", BLOB), ("secret", BYTES),
              ("sig", SIG))
    req: bytes
    data: bytes
    hint: bytes
    keyrel: bytes
    secret: bytes
    sig: object = None


FIVE = ("Req", "Data", "Hint", "KeyRel", "Ack")


def content_statement(fn: bytes, content: bytes) -> bytes:
    """What the service provider signs to vouch for ``content`` under ``fn``."""
    return b"content" + len(fn).to_bytes(2, "big") + fn + H3(content)


def sign_content(params: SystemParams, sp_key: FullKeyPair, fn: bytes, content: bytes, rng=None) -> Signature:
    if rng is None:
        return sign(params, sp_key, content_statement(fn, content))
    return sign(params, sp_key, content_statement(fn, content), rng)


def _signed(msg, endpoint: Endpoint, context: bytes = b""):
    return dataclasses.replace(msg, sig=endpoint.sign(msg.signed_bytes(context)))


def _keyrel_context(req_ts: int, req_share: int) -> bytes:
    return req_ts.to_bytes(8, "big") + req_share.to_bytes(128, "big")


def _data_aad(uav_id: bytes, ue_id: bytes, ts: int) -> bytes:
    return uav_id + b"|" + ue_id + b"|" + ts.to_bytes(8, "big")


# --- payments ----------------------------------------------------------------

class PayState(str, Enum):
    NONE = "none"
    PREPAID = "prepaid"
    SETTLED = "settled"
    REFUNDED = "refunded"


_NEXT = {
    PayState.NONE: {PayState.PREPAID},
    PayState.PREPAID: {PayState.SETTLED, PayState.REFUNDED},
    PayState.SETTLED: set(),
    PayState.REFUNDED: set(),
}


@dataclass
class PaymentEntry:
    state: PayState = PayState.NONE
    percent: int = 0


class PaymentLedger:
    """Per-(UE, file) payment state; transitions are monotone and idempotent."""

    def __init__(self, prepay_percent: int = DEFAULT_PREPAY) -> None:
        if not 0 < prepay_percent < 100:
            raise ValueError("prepay fraction must be strictly between 0 and 100")
        self.prepay_percent = prepay_percent
        self.entries: dict[tuple[bytes, bytes], PaymentEntry] = {}
        self.history: list[tuple[bytes, bytes, PayState]] = []

    def get(self, ue: bytes, fn: bytes) -> PaymentEntry:
        return self.entries.get((ue, fn), PaymentEntry())

    def _move(self, ue: bytes, fn: bytes, new: PayState, percent: int) -> bool:
        entry = self.entries.setdefault((ue, fn), PaymentEntry())
        if entry.state == new:
            return False
        if new not in _NEXT[entry.state]:
            raise ProtocolViolation(f"payment {entry.state.value} -> {new.value} not allowed")
        entry.state, entry.percent = new, percent
        self.history.append((ue, fn, new))
        return True

    def prepay(self, ue: bytes, fn: bytes) -> bool:
        return self._move(ue, fn, PayState.PREPAID, self.prepay_percent)

    def settle(self, ue: bytes, fn: bytes) -> bool:
        return self._move(ue, fn, PayState.SETTLED, 100)

    def refund(self, ue: bytes, fn: bytes) -> bool:
        return self._move(ue, fn, PayState.REFUNDED, 0)

    def export(self) -> str:
        lines = [f"{ue.decode()},{fn.decode()},{e.state.value},{e.percent}"
                 for (ue, fn), e in sorted(self.entries.items())]
        return "\n".join(lines) + ("\n" if lines else "")


# --- adjudication ------------------------------------------------------------

class Outcome(str, Enum):
    SUCCESS = "SuccessfulTransfer"
    FAILED = "FailedConnection"
    INVALID = "InvalidClaim"


@dataclass(frozen=True)
class AdjudicationVerdict:
    outcome: Outcome
    ue_id: bytes
    fn: bytes
    evidence: bytes
    detail: str = ""


class Ausf:
    """Trusted in-process AUSF: payment ledger, content originals, adjudication."""

    def __init__(self, params: SystemParams, kgc: KgcState, originals: dict[bytes, bytes],
                 prepay_percent: int = DEFAULT_PREPAY, ident: str = "ausf") -> None:
        self.params = params
        self.kgc = kgc
        self.originals = dict(originals)
        self.payments = PaymentLedger(prepay_percent)
        self.verdicts: list[AdjudicationVerdict] = []
        self.id = ident

    def _pub(self, ident: bytes):
        pub = self.kgc.registry.get(ident)
        if pub is None:
            raise UnknownUE(ident.decode(errors="replace"))
        return pub

    def _ok(self, signer: bytes, data: bytes, sig) -> bool:
        pub = self.kgc.registry.get(signer)
        return pub is not None and verify(self.params, signer, pub, data, sig)

    def _record(self, verdict: AdjudicationVerdict, offender: Optional[bytes]) -> AdjudicationVerdict:
        self.verdicts.append(verdict)
        if verdict.outcome is Outcome.SUCCESS:
            self.payments.settle(verdict.ue_id, verdict.fn)
        elif verdict.outcome is Outcome.FAILED:
            self.payments.refund(verdict.ue_id, verdict.fn)
        if offender is not None and offender in self.kgc.registry:
            self.kgc.report_offense(offender)
        return verdict

    def adjudicate(self, claim: Message, submitter: Optional[bytes] = None) -> AdjudicationVerdict:
        if isinstance(claim, AckClaim):
            return self._judge_ack(Ack.decode(claim.ack), submitter)
        if isinstance(claim, Ack):
            return self._judge_ack(claim, submitter)
        if isinstance(claim, Dispute):
            return self._judge_dispute(claim)
        raise ProtocolViolation(f"{claim.kind} is not a claim")

    def _judge_ack(self, ack: Ack, submitter: Optional[bytes]) -> AdjudicationVerdict:
        self._pub(ack.ue_id)
        original = self.originals.get(ack.fn)
        if original is None:
            raise UnknownFile(ack.fn.decode(errors="replace"))
        evidence = ack.sig.encode()
        if not self._ok(ack.ue_id, ack.signed_bytes(), ack.sig):
            return self._record(AdjudicationVerdict(Outcome.INVALID, ack.ue_id, ack.fn, evidence,
                                                    "ack signature invalid"), submitter)
        if ack.x2 == xor32(H3(ack.fn), H3(original)):
            return self._record(AdjudicationVerdict(Outcome.SUCCESS, ack.ue_id, ack.fn, evidence), None)
        return self._record(AdjudicationVerdict(Outcome.FAILED, ack.ue_id, ack.fn, evidence,
                                                "acknowledged content differs from original"), ack.uav_id)

    def _judge_dispute(self, d: Dispute) -> AdjudicationVerdict:
        try:
            req, data, hint = Req.decode(d.req), Data.decode(d.data), Hint.decode(d.hint)
            keyrel = KeyRel.decode(d.keyrel) if d.keyrel else None
        except ParseError as exc:
            return self._reject(d, None, None, f"malformed evidence: {exc}")
        ue, fn = req.ue_id, req.fn
        self._pub(ue)
        original = self.originals.get(fn)
        if original is None:
            raise UnknownFile(fn.decode(errors="replace"))
        if not self._ok(ue, d.signed_bytes(), d.sig):
            return self._reject(d, None, fn, "dispute not signed by the UE")
        if self.payments.get(ue, fn).state is PayState.SETTLED:
            return self._reject(d, ue, fn, "transfer already acknowledged")
        if not (self._ok(ue, req.signed_bytes(), req.sig) and self._ok(ue, hint.signed_bytes(), hint.sig)):
            return self._reject(d, ue, fn, "UE's own request or hint signature invalid")
        uav = data.uav_id
        same_session = (data.ue_id == ue and hint.ue_id == ue and hint.uav_id == uav and req.uav_id == uav
                        and data.ts == req.ts and hint.ts == req.ts and hint.fn == fn)
        if not same_session:
            return self._reject(d, ue, fn, "evidence does not belong to one session")
        if not self._ok(uav, data.signed_bytes(), data.sig):
            return self._reject(d, ue, fn, "UAV signature on data is forged")
        if hint.x1 != xor32(H3(fn), H3(data.mprime)):
            return self._reject(d, ue, fn, "hint does not match the delivered ciphertext")
        if keyrel is None:
            return self._record(AdjudicationVerdict(Outcome.FAILED, ue, fn, hint.sig.encode(),
                                                    "key never released"), uav)
        if not (keyrel.uav_id == uav and keyrel.ue_id == ue and keyrel.fn == fn
                and self._ok(uav, keyrel.signed_bytes(_keyrel_context(req.ts, req.share)), keyrel.sig)):
            return self._reject(d, ue, fn, "UAV signature on key release is forged")
        a = int.from_bytes(d.secret, "big") if d.secret else 0
        if not a or pow(DH_GENERATOR, a, self.params.dh_prime) != req.share:
            return self._reject(d, ue, fn, "revealed exponent does not match the request")
        try:
            plain = sym_decrypt(dh_key(pow(keyrel.share, a, self.params.dh_prime)), data.mprime,
                                aad=_data_aad(uav, ue, data.ts))
        except DecryptFailure:
            plain = None
        if plain == original:
            return self._reject(d, ue, fn, "delivered content matches the original")
        return self._record(AdjudicationVerdict(Outcome.FAILED, ue, fn, hint.sig.encode(),
                                                "delivered content is not the original"), uav)

    def _reject(self, d: Dispute, ue, fn, why: str) -> AdjudicationVerdict:
        v = AdjudicationVerdict(Outcome.INVALID, ue or b"", fn or b"", d.sig.encode() if d.sig else b"", why)
        return self._record(v, ue)

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, AckClaim):
            ack = Ack.decode(msg.ack)
            entry = self.payments.get(ack.ue_id, ack.fn)
            if entry.state in (PayState.SETTLED, PayState.REFUNDED):
                net.log(self.id, "dup", f"claim for settled {ack.ue_id.decode()}")
                return
        verdict = self.adjudicate(msg, src.encode())
        net.log(self.id, "verdict", f"{verdict.outcome.value} {verdict.ue_id.decode(errors='replace')} "
                                    f"{verdict.detail}".rstrip())

    def on_timer(self, net, name: str) -> None:
        pass


# --- roles -------------------------------------------------------------------

@dataclass
class UeSession:
    uav_id: bytes
    fn: bytes
    ts: int
    a: int
    share: int
    req: bytes
    stage: str = "requested"
    data: Optional[Data] = None
    data_raw: bytes = b""
    hint_raw: bytes = b""
    keyrel_raw: bytes = b""
    plaintext: Optional[bytes] = None
    error: Optional[str] = None


class UserEquipment(Endpoint):
    """UE. ``behavior``: ``honest``; ``abort`` (free-rides: never sends the
    hint); ``withhold_ack``; ``forge_claim`` (after a good transfer, files a
    failure report with a re-forged UAV signature)."""

    def __init__(self, *args, ausf: Ausf, sp_id: bytes = b"sp", behavior: str = "honest", **kw) -> None:
        super().__init__(*args, **kw)
        self.ausf = ausf
        self.sp_id = sp_id
        self.behavior = behavior
        self.sessions: dict[tuple[bytes, bytes], UeSession] = {}

    def request(self, uav_id: bytes, fn: bytes, now: int) -> Req:
        a = dh_secret(self.rng)
        share = dh_exp(DH_GENERATOR, a)
        req = _signed(Req(self.ident, uav_id, fn, now, share), self)
        self.sessions[(uav_id, fn)] = UeSession(uav_id, fn, now, a, share, req.encode())
        return req

    def _session_for(self, uav_id: bytes, ts: int) -> UeSession:
        for s in self.sessions.values():
            if s.uav_id == uav_id and s.ts == ts:
                return s
        raise ProtocolViolation("no matching session")

    def hint(self, data: Data, raw: bytes, now: int) -> Optional[Hint]:
        self.check_fresh(data.ts, now)
        if not self.first_time(raw):
            return None
        s = self._session_for(data.uav_id, data.ts)
        if s.stage != "requested" or data.ue_id != self.ident:
            raise ProtocolViolation("unexpected data message")
        self.check_sig(data.uav_id, data.signed_bytes(), data.sig)
        s.data, s.data_raw, s.stage = data, raw, "have-ciphertext"
        if self.behavior == "abort":
            s.stage = "aborted"
            return None
        h = _signed(Hint(self.ident, s.uav_id, s.fn, s.ts, now, xor32(H3(s.fn), H3(data.mprime))), self)
        s.hint_raw, s.stage = h.encode(), "hinted"
        self.ausf.payments.prepay(self.ident, s.fn)
        return h

    def finalize(self, keyrel: KeyRel, raw: bytes, now: int) -> tuple[bytes, Optional[Ack]]:
        """Recover M and produce the ack. Raises DecryptFailure / SpSignatureInvalid."""
        s = self.sessions.get((keyrel.uav_id, keyrel.fn))
        if s is None or keyrel.ue_id != self.ident:
            raise ProtocolViolation("key release for unknown session")
        if now - s.ts > self.timing.freshness_ms:
            raise StaleTimestamp("key release outside the session window")
        if not self.first_time(raw) or s.stage != "hinted":
            return s.plaintext, None
        self.check_sig(keyrel.uav_id, keyrel.signed_bytes(_keyrel_context(s.ts, s.share)), keyrel.sig)
        s.keyrel_raw = raw
        k_c = dh_exp(keyrel.share, s.a)
        try:
            m = sym_decrypt(dh_key(k_c), s.data.mprime, aad=_data_aad(s.uav_id, self.ident, s.ts))
        except DecryptFailure:
            s.stage, s.error = "disputed", "DecryptFailure"
            raise
        sp_pub = self._sp_pub()
        if sp_pub is None or not verify(self.params, sp_pub.id, sp_pub, content_statement(s.fn, m), s.data.sp_sig):
            s.stage, s.error = "disputed", "SpSignatureInvalid"
            raise SpSignatureInvalid("content not vouched for by the service provider")
        s.plaintext, s.stage = m, "done"
        ack = _signed(Ack(self.ident, s.uav_id, s.fn, xor32(H3(s.fn), H3(m)), now), self)
        return m, ack

    def _sp_pub(self):
        return self.kgc.registry.get(self.sp_id)

    def dispute(self, s: UeSession) -> Dispute:
        secret = s.a.to_bytes(32, "big") if s.keyrel_raw else b""
        return _signed(Dispute(s.req, s.data_raw, s.hint_raw, s.keyrel_raw, secret), self)

    def forged_dispute(self, s: UeSession) -> Dispute:
        """A false failure report: swap in garbage content and fake the UAV's signature."""
        data = dataclasses.replace(s.data, mprime=bytes(len(s.data.mprime)))
        fake = Signature(s.data.sig.R, (s.data.sig.s + 1) % self.params.q or 1)
        data_raw = dataclasses.replace(data, sig=fake).encode()
        hint = _signed(Hint(self.ident, s.uav_id, s.fn, s.ts, s.ts, xor32(H3(s.fn), H3(data.mprime))), self)
        return _signed(Dispute(s.req, data_raw, hint.encode(), s.keyrel_raw, s.a.to_bytes(32, "big")), self)

    # network adapter
    def start(self, net, uav_id: str, fn: bytes) -> None:
        net.send(self.id, uav_id, self.request(uav_id.encode(), fn, net.now))
        net.set_timer(self.id, net.now + self.timing.deadline_ms, f"keywait:{uav_id}:{fn.decode()}")

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, Data):
            h = self.hint(msg, raw, net.now)
            s = self._session_for(msg.uav_id, msg.ts)
            if h is not None:
                net.log(self.id, "prepay", f"{s.fn.decode()} {self.ausf.payments.prepay_percent}%")
                net.send(self.id, msg.uav_id.decode(), h)
            elif s.stage == "aborted":
                net.log(self.id, "abort", "keeps ciphertext only")
        elif isinstance(msg, KeyRel):
            try:
                m, ack = self.finalize(msg, raw, net.now)
            except (DecryptFailure, SpSignatureInvalid):
                s = self.sessions[(msg.uav_id, msg.fn)]
                net.send(self.id, self.ausf.id, self.dispute(s))
                raise
            if ack is None:
                net.log(self.id, "dup", "KeyRel")
                return
            net.log(self.id, "plaintext", f"{len(m)}B sha={H3(m).hex()[:16]}")
            if self.behavior == "forge_claim":
                net.send(self.id, self.ausf.id, self.forged_dispute(self.sessions[(msg.uav_id, msg.fn)]))
            elif self.behavior != "withhold_ack":
                net.send(self.id, msg.uav_id.decode(), ack)
        else:
            raise ProtocolViolation(f"UE does not accept {msg.kind}")

    def on_timer(self, net, name: str) -> None:
        if not name.startswith("keywait:"):
            return
        _, uav, fn = name.split(":", 2)
        s = self.sessions.get((uav.encode(), fn.encode()))
        if s is not None and s.stage == "hinted":
            s.stage = "disputed"
            net.log(self.id, "timeout", "no key release")
            net.send(self.id, self.ausf.id, self.dispute(s))


@dataclass
class UavSession:
    ue_id: bytes
    fn: bytes
    ts: int
    ue_share: int
    b: int
    mprime: bytes
    content: bytes
    released: bool = False
    acked: bool = False


class RelayUav(Endpoint):
    """Content-caching UAV. ``behavior``: ``honest`` or ``bogus`` (serves
    junk under the genuine SP signature)."""

    def __init__(self, *args, cache: dict[bytes, tuple[bytes, Signature]] | None = None,
                 ausf_id: str = "ausf", behavior: str = "honest", **kw) -> None:
        super().__init__(*args, **kw)
        self.cache = dict(cache or {})
        self.ausf_id = ausf_id
        self.behavior = behavior
        self.sessions: dict[tuple[bytes, int], UavSession] = {}

    def respond(self, req: Req, raw: bytes, now: int) -> Optional[Data]:
        self.check_fresh(req.ts, now)
        if not self.first_time(raw):
            return None
        if req.uav_id != self.ident:
            raise ProtocolViolation("request for another UAV")
        self.check_not_revoked(req.ue_id)
        self.check_sig(req.ue_id, req.signed_bytes(), req.sig)
        if req.fn not in self.cache:
            raise UnknownFile(req.fn.decode(errors="replace"))
        content, sp_sig = self.cache[req.fn]
        if self.behavior == "bogus":
            content = bytes(len(content))
        b = dh_secret(self.rng)
        k_c = dh_exp(req.share, b)
        mprime = sym_encrypt(dh_key(k_c), content, aad=_data_aad(self.ident, req.ue_id, req.ts), rng=self.rng)
        self.sessions[(req.ue_id, req.ts)] = UavSession(req.ue_id, req.fn, req.ts, req.share, b, mprime, content)
        return _signed(Data(self.ident, req.ue_id, mprime, req.ts, sp_sig), self)

    def release_key(self, hint: Hint, raw: bytes, now: int) -> Optional[KeyRel]:
        self.check_fresh(hint.ti, now)
        if not self.first_time(raw):
            return None
        s = self.sessions.get((hint.ue_id, hint.ts))
        if s is None or hint.uav_id != self.ident or hint.fn != s.fn:
            raise ProtocolViolation("hint for unknown session")
        self.check_fresh(s.ts, now)
        self.check_sig(hint.ue_id, hint.signed_bytes(), hint.sig)
        if hint.x1 != xor32(H3(s.fn), H3(s.mprime)):
            raise HintMismatch("hint does not match the ciphertext sent")
        if s.released:
            return None
        s.released = True
        share = dh_exp(DH_GENERATOR, s.b)
        return _signed(KeyRel(self.ident, s.ue_id, share, s.fn), self, context=_keyrel_context(s.ts, s.ue_share))

    def accept_ack(self, ack: Ack, raw: bytes, now: int) -> Optional[AckClaim]:
        self.check_fresh(ack.ti, now)
        if not self.first_time(raw):
            return None
        s = next((s for s in self.sessions.values() if s.ue_id == ack.ue_id and s.fn == ack.fn and s.released),
                 None)
        if s is None or ack.uav_id != self.ident:
            raise ProtocolViolation("ack for unknown session")
        if s.acked:
            return None
        s.acked = True
        return AckClaim(raw)

    def handle(self, net, src: str, raw: bytes) -> None:
        msg = Message.decode(raw)
        if isinstance(msg, Req):
            out = self.respond(msg, raw, net.now)
        elif isinstance(msg, Hint):
            out = self.release_key(msg, raw, net.now)
        elif isinstance(msg, Ack):
            claim = self.accept_ack(msg, raw, net.now)
            if claim is not None:
                net.send(self.id, self.ausf_id, claim)
            else:
                net.log(self.id, "dup", msg.kind)
            return
        else:
            raise ProtocolViolation(f"UAV does not accept {msg.kind}")
        if out is None:
            net.log(self.id, "dup", msg.kind)
        else:
            net.send(self.id, (msg.ue_id).decode(), out)

    def on_timer(self, net, name: str) -> None:
        pass

