"""Exit criteria, one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the pytest terminal summary. Criteria 7 and 8
run 1200 trials at d = 726,817 and take several minutes.
"""
import math
import subprocess
import sys
import time

import numpy as np
import pytest

from randlb.harness import (ExperimentConfig, cap_probability_experiment, check_lipschitz,
                            run_experiment, run_lemma_suite)
from randlb.instance import build_instance, reference_solution, reference_value
from randlb.optimizers import available_algorithms, run_algorithm
from randlb.oracle import subgradient_validity_check
from randlb.vecspace import derive_seed

from conftest import ACCEPTANCE_LINES

BASE_SEED = 0
BIG_D = 726_817
ZOO = available_algorithms()


def report(n, name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] AC{n:<2d} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_ac01_lipschitz():
    t0 = time.perf_counter()
    bad = {}
    for k in (1, 4, 16):
        inst = build_instance(k, 4096, seed=derive_seed(BASE_SEED, k, "instance"))
        bad[k] = check_lipschitz(inst, 10_000, np.random.default_rng(derive_seed(BASE_SEED, k, "probe")))
    dt = time.perf_counter() - t0
    report(1, "Lipschitz", sum(bad.values()) == 0 and dt < 10.0,
           f"violations per k {bad} over 10^4 pairs each, {dt:.1f}s (< 10s)")


def test_ac02_subgradient_validity():
    t0 = time.perf_counter()
    inst = build_instance(16, 4096, L=2.0, B=1.5, seed=derive_seed(BASE_SEED, 2, "instance"))
    prng = np.random.default_rng(derive_seed(BASE_SEED, 2, "probe"))
    queries = []
    for i, algo in enumerate(ZOO):
        rec = run_algorithm(inst, algo, 20, derive_seed(BASE_SEED, i, "algorithm"))
        queries += list(zip(rec.ledger.queries, rec.ledger.responses))
    assert len(queries) == 100
    failures = sum(not subgradient_validity_check(inst, x, r, probes=100, rng=prng)
                   for x, r in queries)
    dt = time.perf_counter() - t0
    report(2, "subgradient validity", failures == 0 and dt < 10.0,
           f"{failures} failing queries among 100 queries x 100 probes, {dt:.1f}s (< 10s)")


def test_ac03_reference_value():
    worst = 0.0
    for k in range(1, 65):
        inst = build_instance(k, 2 * k, seed=derive_seed(BASE_SEED, k, "instance"))
        expect = -(2 * inst.eps_unit + inst.c)
        assert reference_value(inst) == expect
        worst = max(worst, abs(reference_solution(inst).f_x_hat - expect) / abs(expect))
    report(3, "f(x_hat) = -(2 eps + c)", worst <= 1e-12,
           f"max relative error {worst:.2e} over k = 1..64 (<= 1e-12)")


@pytest.fixture(scope="module")
def lemma_corpus():
    return run_lemma_suite(trials=1000, k_list=(4,), d=10_000, base_seed=BASE_SEED,
                           suites=("lemma1", "lemma2", "projection"))


def test_ac04_lemma2_checker(lemma_corpus):
    tally = lemma_corpus.checks["lemma2"]
    fired = lemma_corpus.selftests["shifted_oracle"]["lemma2_fired"]
    report(4, "oracle-response checker", tally.cases == 1000 and tally.counterexamples == 0 and fired,
           f"{tally.counterexamples} counterexamples in {tally.cases} runs; "
           f"fault-injected oracle detected: {fired}")


def test_ac05_lemma1_checker(lemma_corpus):
    tally = lemma_corpus.checks["lemma1"]
    report(5, "G implies E checker", tally.cases == 1000 and tally.counterexamples == 0,
           f"{tally.counterexamples} counterexamples in {tally.cases} runs")


def test_ac06_cap_bound():
    t0 = time.perf_counter()
    r = cap_probability_experiment(2000, 0.05, 100_000, rng=derive_seed(BASE_SEED, 6, "probe"))
    dt = time.perf_counter() - t0
    ok = r.empirical <= math.exp(-0.05 ** 2 * 1999 / 2) and 0.015 <= r.empirical <= 0.04 and dt < 30
    report(6, "cap bound", ok, f"empirical {r.empirical:.5f} in [0.015, 0.04], "
                               f"bound {r.analytic_bound:.5f}, {dt:.1f}s (< 30s)")


@pytest.fixture(scope="module")
def big_dimension_runs():
    return {algo: run_experiment(ExperimentConfig(k=4, d=BIG_D, algo=algo, budget=4,
                                                  trials=200, base_seed=BASE_SEED))
            for algo in ZOO}


def test_ac07_lower_bound_at_large_dimension(big_dimension_runs):
    rows = big_dimension_runs
    ok = all(s.success_frac_value <= 1 / 16 + 0.05 and s.P_E_hat >= 0.90 for s in rows.values())
    detail = "; ".join(f"{a}: success {s.success_frac_value:.3f} P_E {s.P_E_hat:.3f}"
                       for a, s in rows.items())
    report(7, "lower bound at d=726817", ok, detail + " (need <= 0.1125 and >= 0.90)")


def test_ac08_dimension_dependence(big_dimension_runs):
    big = big_dimension_runs["random-search"]
    tiny = run_experiment(ExperimentConfig(k=4, d=8, algo="random-search", budget=4,
                                           trials=200, base_seed=BASE_SEED))
    ok = tiny.success_ci_low > big.success_ci_high
    report(8, "dimension dependence", ok,
           f"d=8: {tiny.success_count_value}/200 CI [{tiny.success_ci_low:.4f}, "
           f"{tiny.success_ci_high:.4f}] vs d={BIG_D}: {big.success_count_value}/200 CI "
           f"[{big.success_ci_low:.4f}, {big.success_ci_high:.4f}] (Wilson 95%, must not overlap)")


def test_ac09_matching_upper_bound():
    s = run_experiment(ExperimentConfig(k=16, d=4096, algo="subgradient-avg", budget=1024,
                                        trials=50, base_seed=BASE_SEED, mode="upper_bound"))
    report(9, "matching upper bound", s.median_first_success <= 1024,
           f"median first success round {s.median_first_success} over 50 trials (<= 1024), "
           f"{s.success_count_value}/50 succeeded")


def test_ac10_cli_determinism(tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        proc = subprocess.run([sys.executable, "-m", "randlb", "run", "--mode", "lower_bound",
                               "--algo", "hybrid", "--k", "4", "--d", "256", "--trials", "30",
                               "--seed", "7", "--csv", str(path)],
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(path.read_bytes())
    report(10, "CLI determinism", outs[0] == outs[1] and len(outs[0]) > 0,
           f"two runs, {len(outs[0])} bytes each, identical: {outs[0] == outs[1]}")
