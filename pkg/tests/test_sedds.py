import dataclasses

import pytest

from clshare.errors import (
    DecryptFailure, HintMismatch, ProtocolViolation, SpSignatureInvalid, StaleTimestamp,
)
from clshare.metering import CostLedger, acting_as, metered
from clshare.scenario import FILE_NAME, Scenario, build_world
from clshare.sedds import (
    Ack, AckClaim, Outcome, PayState, PaymentLedger, content_statement,
)


@pytest.fixture
def w():
    return build_world(Scenario(protocol="sedds", file_size=2048, seed=3))


def _through_hint(w, now=0):
    ue, uav = w["ue"], w["uav"]
    req = ue.request(b"uav", FILE_NAME, now)
    data = uav.respond(req, req.encode(), now)
    hint = ue.hint(data, data.encode(), now)
    return req, data, hint


def _full(w):
    ue, uav = w["ue"], w["uav"]
    _, _, hint = _through_hint(w)
    keyrel = uav.release_key(hint, hint.encode(), 1)
    m, ack = ue.finalize(keyrel, keyrel.encode(), 2)
    return keyrel, m, ack


def test_honest_direct_flow(w):
    _, m, ack = _full(w)
    assert m == w.content
    claim = w["uav"].accept_ack(ack, ack.encode(), 3)
    assert isinstance(claim, AckClaim)
    v = w["ausf"].adjudicate(claim, b"uav")
    assert v.outcome is Outcome.SUCCESS
    assert w["ausf"].payments.get(b"ue", FILE_NAME).state is PayState.SETTLED


def test_step_costs_hand_count(w):
    """sign = 1 T_m, verify = 3 T_m (key derivation + two mults)."""
    ue, uav = w["ue"], w["uav"]
    led = CostLedger()

    def step(party, fn):
        with metered(led), acting_as(party):
            return fn()

    req = step("ue", lambda: ue.request(b"uav", FILE_NAME, 0))
    data = step("uav", lambda: uav.respond(req, req.encode(), 0))
    hint = step("ue", lambda: ue.hint(data, data.encode(), 0))
    keyrel = step("uav", lambda: uav.release_key(hint, hint.encode(), 1))
    step("ue", lambda: ue.finalize(keyrel, keyrel.encode(), 2))
    ue_c, uav_c = led.party("ue"), led.party("uav")
    # UE: sign Req, verify Data, sign Hint, verify KeyRel, verify SP, sign Ack
    assert (ue_c["scalar_mults"], ue_c["modexps"], ue_c["sym_cipher_calls"]) == (1 + 3 + 1 + 3 + 3 + 1, 2, 1)
    # UAV: verify Req, sign Data, verify Hint, sign KeyRel
    assert (uav_c["scalar_mults"], uav_c["modexps"], uav_c["sym_cipher_calls"]) == (3 + 1 + 3 + 1, 2, 1)


def test_hint_mismatch(w):
    _, _, hint = _through_hint(w)
    bad = dataclasses.replace(hint, x1=bytes(32))
    bad = dataclasses.replace(bad, sig=w["ue"].sign(bad.signed_bytes()))
    with pytest.raises(HintMismatch):
        w["uav"].release_key(bad, bad.encode(), 1)


def test_key_released_once(w):
    _, _, hint = _through_hint(w)
    assert w["uav"].release_key(hint, hint.encode(), 1) is not None
    assert w["uav"].release_key(hint, hint.encode(), 1) is None


def test_stale_key_release(w):
    ue, uav = w["ue"], w["uav"]
    _, _, hint = _through_hint(w)
    keyrel = uav.release_key(hint, hint.encode(), 1)
    with pytest.raises(StaleTimestamp):
        ue.finalize(keyrel, keyrel.encode(), ue.timing.freshness_ms + 1)


def test_bogus_content_detected(w):
    w["uav"].behavior = "bogus"
    with pytest.raises(SpSignatureInvalid):
        _full(w)
    s = w["ue"].sessions[(b"uav", FILE_NAME)]
    assert s.plaintext is None
    v = w["ausf"].adjudicate(w["ue"].dispute(s))
    assert v.outcome is Outcome.FAILED
    assert w["ausf"].payments.get(b"ue", FILE_NAME).state is PayState.REFUNDED
    assert w.kgc.is_revoked(b"uav")


def test_corrupted_ciphertext_is_decrypt_failure(w):
    ue, uav = w["ue"], w["uav"]
    req = ue.request(b"uav", FILE_NAME, 0)
    data = uav.respond(req, req.encode(), 0)
    s = uav.sessions[(b"ue", 0)]
    s.mprime = data.mprime[:-1] + bytes([data.mprime[-1] ^ 1])
    bad = dataclasses.replace(data, mprime=s.mprime)
    bad = dataclasses.replace(bad, sig=uav.sign(bad.signed_bytes()))
    hint = ue.hint(bad, bad.encode(), 0)
    keyrel = uav.release_key(hint, hint.encode(), 1)
    with pytest.raises(DecryptFailure):
        ue.finalize(keyrel, keyrel.encode(), 2)
    v = w["ausf"].adjudicate(ue.dispute(ue.sessions[(b"uav", FILE_NAME)]))
    assert v.outcome is Outcome.FAILED


def test_false_claim_after_good_transfer(w):
    _full(w)
    s = w["ue"].sessions[(b"uav", FILE_NAME)]
    v = w["ausf"].adjudicate(w["ue"].forged_dispute(s))
    assert v.outcome is Outcome.INVALID
    assert w["ausf"].payments.get(b"ue", FILE_NAME).state is PayState.PREPAID
    assert w.kgc.is_revoked(b"ue")


def test_honest_dispute_after_good_transfer_is_invalid(w):
    _full(w)
    v = w["ausf"].adjudicate(w["ue"].dispute(w["ue"].sessions[(b"uav", FILE_NAME)]))
    assert v.outcome is Outcome.INVALID
    assert "matches the original" in v.detail


def test_dispute_without_key_release(w):
    _through_hint(w)
    v = w["ausf"].adjudicate(w["ue"].dispute(w["ue"].sessions[(b"uav", FILE_NAME)]))
    assert (v.outcome, v.detail) == (Outcome.FAILED, "key never released")


def test_ack_with_wrong_content_blames_uav(w):
    _, _, ack = _full(w)
    bad = dataclasses.replace(ack, x2=bytes(32))
    bad = dataclasses.replace(bad, sig=w["ue"].sign(bad.signed_bytes()))
    assert w["ausf"].adjudicate(bad).outcome is Outcome.FAILED


def test_ack_with_bad_signature_blames_submitter(w):
    _, _, ack = _full(w)
    forged = Ack(ack.ue_id, ack.uav_id, ack.fn, ack.x2, ack.ti, w["uav"].sign(ack.signed_bytes()))
    v = w["ausf"].adjudicate(forged, b"uav")
    assert v.outcome is Outcome.INVALID
    assert w.kgc.is_revoked(b"uav")


def test_abort_never_prepays(w):
    w["ue"].behavior = "abort"
    assert _through_hint(w)[2] is None
    assert w["ausf"].payments.get(b"ue", FILE_NAME).state is PayState.NONE


def test_content_statement_binds_name():
    assert content_statement(b"a", b"x") != content_statement(b"b", b"x")
    assert content_statement(b"ab", b"") != content_statement(b"a", b"b")


def test_payment_transitions():
    led = PaymentLedger(prepay_percent=30)
    assert led.get(b"u", b"f").state is PayState.NONE
    with pytest.raises(ProtocolViolation):
        led.settle(b"u", b"f")
    assert led.prepay(b"u", b"f") and not led.prepay(b"u", b"f")
    assert led.get(b"u", b"f").percent == 30
    assert led.settle(b"u", b"f") and not led.settle(b"u", b"f")
    with pytest.raises(ProtocolViolation):
        led.refund(b"u", b"f")
    led.prepay(b"v", b"f")
    led.refund(b"v", b"f")
    assert led.export() == "u,f,settled,100\nv,f,refunded,0\n"
    assert [s.value for *_, s in led.history] == ["prepaid", "settled", "prepaid", "refunded"]


@pytest.mark.parametrize("p", [0, 100, -5])
def test_prepay_fraction_bounds(p):
    with pytest.raises(ValueError):
        PaymentLedger(p)


def test_metering_is_observation_only():
    def frames(meter):
        w = build_world(Scenario(protocol="sedds", file_size=512, seed=8))
        led = CostLedger() if meter else None
        with metered(led):
            req, data, hint = _through_hint(w)
            keyrel, _, ack = _full_after(w, hint)
        return [m.encode() for m in (req, data, hint, keyrel, ack)]

    assert frames(True) == frames(False)


def _full_after(w, hint):
    keyrel = w["uav"].release_key(hint, hint.encode(), 1)
    m, ack = w["ue"].finalize(keyrel, keyrel.encode(), 2)
    return keyrel, m, ack
