import math

import numpy as np
import pytest

from randlb.events import (EventTrace, ProjectionTracker, RoundRecord, StateError,
                           check_all_oracle_responses, check_g_implies_e,
                           check_oracle_responses, export_trace, g_threshold, observe_round,
                           projection_bound, projection_bound_diagnostic, trace_diagnostics)
from randlb.instance import build_instance
from randlb.optimizers import available_algorithms, run_algorithm
from randlb.oracle import QueryLedger, resisting_query
from randlb.harness import shifted_index_oracle

# P[G_1] for a fixed unit query, k=4: estimated independently from 4e6 draws of
# (z_1..z_4, chi2_{d-4}) with u_j = z_j / sqrt(|z|^2 + chi2); sd ~ 2e-4 and 4e-5
P_G1_D1E4 = 0.2128
P_G1_D1E5 = 0.9932


def test_threshold_values():
    assert g_threshold(build_instance(4, 8)) == pytest.approx(0.00993241391236819, rel=1e-13)
    assert g_threshold(build_instance(1, 2)) == pytest.approx(0.17677669529663688, rel=1e-13)
    for k in range(1, 40):
        inst = build_instance(k, 2 * k)
        assert g_threshold(inst) < inst.c / 2


def _fresh(inst):
    return ProjectionTracker(inst), EventTrace.for_instance(inst)


def test_zero_first_query_is_vacuous():
    inst = build_instance(4, 16, seed=1)
    tr, trace = _fresh(inst)
    observe_round(tr, trace, inst, np.zeros(16))
    rec = trace.rounds[0]
    assert rec.g_margin == 0.0 and rec.g_flag
    assert tr.dropped == 1 and tr.size == 1


def test_querying_v1_breaks_g1():
    inst = build_instance(4, 16, B=2.0, seed=1)
    tr, trace = _fresh(inst)
    observe_round(tr, trace, inst, 2.0 * inst.V[0])
    assert trace.rounds[0].g_margin == pytest.approx(1.0)
    assert not trace.rounds[0].g_flag
    assert not trace.E_holds


def _g1_fraction(d, trials, seed):
    rng = np.random.default_rng(seed)
    x = np.zeros(d)
    x[0] = 1.0
    hold = 0
    for _ in range(trials):
        inst = build_instance(4, d, seed=rng.integers(2**63))
        tr, trace = _fresh(inst)
        observe_round(tr, trace, inst, x)
        hold += trace.rounds[0].g_flag
    return hold / trials


def test_g1_probability_matches_cap_oracle():
    frac = _g1_fraction(10_000, 1000, 0)
    assert abs(frac - P_G1_D1E4) <= 4 * math.sqrt(P_G1_D1E4 * (1 - P_G1_D1E4) / 1000)


def test_g1_almost_sure_at_larger_dimension():
    assert P_G1_D1E5 >= 0.99
    frac = _g1_fraction(100_000, 300, 1)
    assert abs(frac - P_G1_D1E5) <= 4 * math.sqrt(P_G1_D1E5 * (1 - P_G1_D1E5) / 300)


@pytest.mark.parametrize("algo", available_algorithms())
def test_tracker_invariants(algo):
    inst = build_instance(5, 40, seed=3)
    rec = run_algorithm(inst, algo, 5, 9)
    tr, trace = _fresh(inst)
    for t, x in enumerate(rec.ledger.queries, 1):
        observe_round(tr, trace, inst, x)
        assert tr.size + tr.dropped == 2 * t
        assert tr.size <= 2 * t
        assert tr.basis.gram_error() <= 1e-10


def test_observe_out_of_order():
    inst = build_instance(2, 8, seed=0)
    tr, trace = _fresh(inst)
    observe_round(tr, trace, inst, np.zeros(8))
    with pytest.raises(StateError):
        observe_round(tr, EventTrace.for_instance(inst), inst, np.zeros(8))
    observe_round(tr, trace, inst, np.zeros(8))
    with pytest.raises(StateError):
        observe_round(tr, trace, inst, np.zeros(8))  # t = 3 > k


def test_E_monotone():
    inst = build_instance(3, 12, seed=2)
    tr, trace = _fresh(inst)
    observe_round(tr, trace, inst, inst.V[1].copy())  # |<x, v_2>| = 1 >= c/2 at t=1
    assert not trace.E_holds
    observe_round(tr, trace, inst, np.zeros(12))
    observe_round(tr, trace, inst, np.zeros(12))
    assert not trace.E_holds
    assert trace.first_E_violation() == (1, 2)


def test_honest_runs_pass_both_checkers():
    for i in range(60):
        inst = build_instance(4, 2000, seed=i)
        algo = available_algorithms()[i % 5]
        rec = run_algorithm(inst, algo, 4, i)
        assert not check_g_implies_e(rec.trace).failed
        assert not check_all_oracle_responses(rec.trace, rec.ledger).failed
        assert all(dg.ok for dg in trace_diagnostics(rec.trace, inst))


def _synthetic(k=4, c=0.0625, ips=0.0, flags=(True,) * 4):
    trace = EventTrace(k=k, c=c, threshold=0.01)
    for t, f in enumerate(flags, 1):
        trace.rounds.append(RoundRecord(t=t, inner_products=np.full(k, ips), g_margin=0.0,
                                        g_flag=f, proj_sq=np.zeros(k - t + 1)))
    return trace


def test_gimpe_checker_sensitivity():
    v = check_g_implies_e(_synthetic(ips=0.0625))
    assert v.failed and v.detail["t"] == 1
    assert check_g_implies_e(_synthetic(ips=0.0)).status == "pass"


def test_gimpe_checker_skips_after_failed_g():
    trace = _synthetic(ips=0.0, flags=(True, False, True, True))
    trace.rounds[2].inner_products[:] = 1.0  # beyond the failed G_2: antecedent false
    assert check_g_implies_e(trace).status == "pass"
    assert check_g_implies_e(_synthetic(flags=(False,) * 4)).status == "not_applicable"


def test_lemma2_checker():
    inst = build_instance(4, 64, seed=5)
    led = QueryLedger()
    tr, trace = _fresh(inst)
    resisting_query(inst, led, np.zeros(64))
    observe_round(tr, trace, inst, np.zeros(64))
    assert check_oracle_responses(trace, led, 1).status == "pass"

    bad = QueryLedger()
    tr, trace = _fresh(inst)
    shifted_index_oracle(inst, bad, np.zeros(64))
    observe_round(tr, trace, inst, np.zeros(64))
    v = check_oracle_responses(trace, bad, 1)
    assert v.failed and v.detail == {"t": 1, "active_index": 2}

    led = QueryLedger()
    tr, trace = _fresh(inst)
    resisting_query(inst, led, inst.V[2].copy())
    observe_round(tr, trace, inst, inst.V[2].copy())
    assert check_oracle_responses(trace, led, 1).status == "not_applicable"
    with pytest.raises(StateError):
        check_oracle_responses(trace, led, 2)


def test_projection_diagnostic_empty_span():
    inst = build_instance(4, 64, seed=0)
    tr, _ = _fresh(inst)
    dg = projection_bound_diagnostic(tr, inst)
    assert dg.t == 1 and dg.bound == 0.0 and dg.ok
    np.testing.assert_array_equal(dg.sq_norms, np.zeros(4))


def test_projection_diagnostic_flags_contained_vector():
    inst = build_instance(4, 64, seed=0)
    tr, trace = _fresh(inst)
    observe_round(tr, trace, inst, inst.V[3].copy())  # v_4 now lies in S_1
    dg = projection_bound_diagnostic(tr, inst)
    assert dg.t == 2 and 4 in dg.flagged
    assert dg.bound == pytest.approx(projection_bound(inst, 2))


def test_projection_diagnostic_honest_runs():
    flags = 0
    for i in range(100):
        inst = build_instance(4, 10_000, seed=1000 + i)
        rec = run_algorithm(inst, available_algorithms()[i % 5], 4, i)
        flags += sum(not dg.ok for dg in trace_diagnostics(rec.trace, inst))
    assert flags == 0


def test_export_trace(tmp_path):
    inst = build_instance(2, 8, seed=0)
    rec = run_algorithm(inst, "span", 2, 0)
    lines = export_trace(rec.trace, tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t,g_margin,g_threshold,g_flag,max_future_ip,half_c,active_index"
    assert [ln.split(",")[0] for ln in lines[1:]] == ["1", "2"]
    assert lines[1].endswith(",1")
