import pytest

from clshare.report import (
    SEDDS_GOLDEN, CostReport, bench, honest, linear_fit, protocol_bytes, segds_formula, segds_golden_tm,
    sedds_formula, within_factor, within_tol,
)
from clshare.scenario import run_scenario


@pytest.mark.parametrize("n, tm", [(2, 21), (5, 39), (10, 69)])
def test_reference_formula_arithmetic(n, tm):
    assert segds_formula(n) == {"T_m": tm, "T_e": 2}


def test_sedds_reference():
    assert sedds_formula() == {"T_m": 10, "T_e": 2, "T_AES": 2}


def test_segds_golden_hand_count():
    """CH scalar mults for one honest run with N members.

    setup: sign DhInit 1, verify DhReply 3
    tasks: sign N+1 M1s
    own segment: verify M2 3, sign M3 1
    each of N M3s: verify sharer 3, verify SP 3
    M4: mre 1+2N, sign 1
    """
    for n in range(2, 11):
        hand = (1 + 3) + (n + 1) + (3 + 1) + 6 * n + (1 + 2 * n) + 1
        assert hand == segds_golden_tm(n)


def test_sedds_golden_hand_count():
    ue = 1 + 3 + 1 + 3 + 3 + 1
    uav = 3 + 1 + 3 + 1
    assert SEDDS_GOLDEN == {"T_m": ue + uav, "T_e": 2 + 2, "T_AES": 1 + 1}


@pytest.mark.parametrize("n", [2, 5])
def test_segds_measured_equals_golden(n):
    rep = CostReport.from_run(run_scenario(honest("segds", n)))
    assert rep.measured["T_m"] == segds_golden_tm(n)
    assert rep.measured["T_e"] == 2
    assert rep.checks["T_m_within_factor2"] and rep.checks["T_e_exact"]


def test_sedds_measured_equals_golden():
    res = run_scenario(honest("sedds"))
    rep = CostReport.from_run(res)
    assert {k: rep.measured[k] for k in SEDDS_GOLDEN} == SEDDS_GOLDEN
    assert protocol_bytes(res) == rep.bytes_measured == 874


def test_segds_bytes_exclude_content():
    res = run_scenario(honest("segds", 5))
    ch = res.world.net.ledger.party("ch")
    assert protocol_bytes(res) == ch["bytes_sent"] - ch["content_bytes"] == 1549


def test_tolerance_helpers():
    assert within_factor(20, 10) and within_factor(5, 10) and not within_factor(20.01, 10)
    assert within_tol(1875, 1500) and not within_tol(1876, 1500)


def test_linear_fit():
    assert linear_fit({2: 29, 3: 38, 10: 101}) == ((9, 11), True)
    assert linear_fit({1: 1, 2: 2, 3: 4})[1] is False


def test_render_has_values_section():
    rep = CostReport.from_run(run_scenario(honest("segds", 3)))
    text = rep.render()
    assert "[values]" in text and "measured.T_m=38" in text and "check.T_e_exact=1" in text


def test_bench_segds_is_linear_and_deterministic():
    res = bench("segds", 5, trials=2, sweep=range(2, 6))
    assert res.ok and res.fit == (9, 11)
    assert "fit: T_m = 9*N + 11 residual=0" in res.render()
    with pytest.raises(ValueError):
        bench("segds", 1)
