"""Monte Carlo experiments: P[E], queries-to-eps, cap probabilities, lemma suites.

Trial ``i`` of an experiment with base seed ``s`` draws its instance from
``derive_seed(s, i, "instance")`` and drives the algorithm with
``derive_seed(s, i, "algorithm")``; probe points for property checks use the
``"probe"`` role. Results never depend on execution order.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from . import _kernels
from .events import (check_all_oracle_responses, check_g_implies_e, trace_diagnostics)
from .instance import (HardInstance, build_instance, evaluate, evaluate_batch,
                       event_probability_bound)
from .optimizers import available_algorithms, run_algorithm
from .oracle import (OracleResponse, random_ball_points, resisting_query,
                     subgradient_validity_check)
from .vecspace import derive_seed, make_rng

log = logging.getLogger(__name__)

MODES = ("lower_bound", "upper_bound", "cap_check", "lemma_suite", "sweep")


@dataclass
class ExperimentConfig:
    k: int = 4
    d: int = 64
    L: float = 1.0
    B: float = 1.0
    algo: str = "random-search"
    params: dict = field(default_factory=dict)
    budget: int | None = None
    trials: int = 100
    base_seed: int = 0
    mode: str = "lower_bound"
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if self.k < 1 or self.d < 2 * self.k:
            raise ValueError(f"need k >= 1 and d >= 2k, got k={self.k}, d={self.d}")
        if self.budget is not None and self.budget < 1:
            raise ValueError(f"budget must be positive, got {self.budget}")
        if self.algo not in available_algorithms():
            raise ValueError(f"unknown algorithm {self.algo!r}; available: {available_algorithms()}")

    @property
    def eps_unit(self) -> float:
        return 1.0 / (2.0 * math.sqrt(self.k))

    def effective_budget(self) -> int:
        if self.budget is not None:
            return int(self.budget)
        if self.mode == "upper_bound":
            return int(round(16.0 / self.eps_unit ** 2))
        return self.k


@dataclass(frozen=True)
class TrialSummary:
    index: int
    first_success_value: int | None
    first_success_cert: int | None
    E_holds: bool
    G_all: bool
    best_value: float


@dataclass
class SummaryStats:
    k: int
    d: int
    L: float
    B: float
    algo: str
    trials: int
    budget: int
    success_frac_value: float
    success_frac_cert: float
    P_E_hat: float
    P_E_bound: float
    seed: int
    mode: str
    success_count_value: int
    success_count_cert: int
    success_count_k_minus_1: int
    E_count: int
    G_all_count: int
    success_ci_low: float
    success_ci_high: float
    P_E_ci_low: float
    P_E_ci_high: float
    mean_first_success: float
    median_first_success: float
    expected_queries_ref: float


CSV_COLUMNS = tuple(f.name for f in fields(SummaryStats))


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence_level=level,
                                                              method="wilson")
    return max(0.0, float(ci.low)), min(1.0, float(ci.high))


def _run_trial(cfg: ExperimentConfig, i: int) -> TrialSummary:
    inst = build_instance(cfg.k, cfg.d, cfg.L, cfg.B, seed=derive_seed(cfg.base_seed, i, "instance"))
    rec = run_algorithm(inst, cfg.algo, cfg.effective_budget(),
                        derive_seed(cfg.base_seed, i, "algorithm"), params=cfg.params)
    return TrialSummary(index=i, first_success_value=rec.first_success_value,
                        first_success_cert=rec.first_success_cert,
                        E_holds=rec.E_holds, G_all=rec.G_all, best_value=rec.best_value)


def _run_trial_packed(args):
    return _run_trial(*args)


def run_trials(cfg: ExperimentConfig) -> list:
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            out = list(ex.map(_run_trial_packed, jobs, chunksize=max(1, cfg.trials // (4 * cfg.workers))))
    else:
        out = [_run_trial(*j) for j in jobs]
    return sorted(out, key=lambda s: s.index)


def summarize(cfg: ExperimentConfig, results: list) -> SummaryStats:
    n = len(results)
    budget = cfg.effective_budget()
    firsts = [r.first_success_value for r in results]
    succ_v = sum(f is not None for f in firsts)
    succ_c = sum(r.first_success_cert is not None for r in results)
    succ_km1 = sum(f is not None and f <= cfg.k - 1 for f in firsts)
    e_cnt = sum(r.E_holds for r in results)
    g_cnt = sum(r.G_all for r in results)
    hit = [f for f in firsts if f is not None]
    lo, hi = wilson_interval(succ_v, n)
    elo, ehi = wilson_interval(e_cnt, n)
    return SummaryStats(
        k=cfg.k, d=cfg.d, L=cfg.L, B=cfg.B, algo=cfg.algo, trials=n, budget=budget,
        success_frac_value=succ_v / n, success_frac_cert=succ_c / n,
        P_E_hat=e_cnt / n, P_E_bound=event_probability_bound(cfg.k, cfg.d),
        seed=cfg.base_seed, mode=cfg.mode,
        success_count_value=succ_v, success_count_cert=succ_c,
        success_count_k_minus_1=succ_km1, E_count=e_cnt, G_all_count=g_cnt,
        success_ci_low=lo, success_ci_high=hi, P_E_ci_low=elo, P_E_ci_high=ehi,
        mean_first_success=statistics.fmean(hit) if hit else math.inf,
        # failures count as +inf rounds
        median_first_success=statistics.median([math.inf if f is None else f for f in firsts]),
        expected_queries_ref=15.0 * cfg.k / 16.0,
    )


def run_experiment(cfg: ExperimentConfig) -> SummaryStats:
    log.info("running %s: algo=%s k=%d d=%d trials=%d budget=%d backend=%s", cfg.mode,
             cfg.algo, cfg.k, cfg.d, cfg.trials, cfg.effective_budget(), _kernels.BACKEND)
    return summarize(cfg, run_trials(cfg))


def estimate_P_E(cfg: ExperimentConfig) -> SummaryStats:
    """Empirical ``P[E]`` over ``cfg.trials`` independent (instance, algorithm) pairs."""
    if cfg.mode != "lower_bound":
        raise ValueError(f"estimate_P_E needs mode lower_bound, got {cfg.mode}")
    return run_experiment(cfg)


def queries_to_epsilon(cfg: ExperimentConfig) -> SummaryStats:
    """First value-based success round per trial, aggregated."""
    if cfg.mode not in ("lower_bound", "upper_bound"):
        raise ValueError(f"queries_to_epsilon needs mode lower_bound or upper_bound, got {cfg.mode}")
    return run_experiment(cfg)


def sweep(k_list, d_list, algo: str, trials: int, base_seed: int = 0, budget=None,
          L: float = 1.0, B: float = 1.0, params=None, workers: int = 1) -> list:
    """One lower-bound experiment per ``(k, d)`` cell, in sorted order."""
    cells = sorted({(int(k), int(d)) for k in k_list for d in d_list})
    bad = [(k, d) for k, d in cells if d < 2 * k]
    if bad:
        raise ValueError(f"cells with d < 2k: {bad}")
    out = []
    for k, d in cells:
        cfg = ExperimentConfig(k=k, d=d, L=L, B=B, algo=algo, params=dict(params or {}),
                               budget=budget, trials=trials, base_seed=base_seed,
                               mode="lower_bound", workers=workers)
        out.append(run_experiment(cfg))
    return out


# -- cap probabilities --------------------------------------------------------

@dataclass(frozen=True)
class CapResult:
    d_prime: int
    tau: float
    samples: int
    count: int
    empirical: float
    analytic_bound: float
    margin: float

    @property
    def within_bound(self) -> bool:
        return self.empirical <= self.analytic_bound + self.margin


def cap_bound(d_prime: int, tau: float) -> float:
    """``exp(-tau^2 (d' - 1) / 2)``."""
    return math.exp(-tau * tau * (d_prime - 1) / 2.0)


def cap_probability_experiment(d_prime: int, tau: float, samples: int, rng=None,
                               chunk: int = 4096) -> CapResult:
    """Fraction of uniform unit vectors ``u`` in R^{d'} with ``|u_1| >= tau``.

    The acceptance margin is three binomial standard deviations at the bound.
    """
    d_prime, samples = int(d_prime), int(samples)
    if d_prime < 2:
        raise ValueError(f"d_prime must be at least 2, got {d_prime}")
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError(f"tau must be positive and finite, got {tau!r}")
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    rng = make_rng(0 if rng is None else rng)
    rows = max(1, min(chunk, (1 << 24) // d_prime))
    count = done = 0
    while done < samples:
        n = min(rows, samples - done)
        count += _kernels.cap_count(rng.standard_normal((n, d_prime)), float(tau))
        done += n
    bound = cap_bound(d_prime, tau)
    margin = 3.0 * math.sqrt(max(bound * (1.0 - bound), 0.0) / samples)
    return CapResult(d_prime=d_prime, tau=float(tau), samples=samples, count=count,
                     empirical=count / samples, analytic_bound=bound, margin=margin)


# -- property and lemma checks -----------------------------------------------

def check_lipschitz(inst: HardInstance, pairs: int, rng) -> int:
    """Violations of ``|f(x) - f(y)| <= L ||x - y|| (1 + 1e-9)`` over random pairs."""
    rng = make_rng(rng)
    bad = 0
    for n in _chunks(pairs, max(1, (1 << 22) // inst.d)):
        X = random_ball_points(rng, n, inst.d, inst.B, surface_fraction=0.5)
        Y = random_ball_points(rng, n, inst.d, inst.B, surface_fraction=0.5)
        # half the partners sit within 1e-3 B of X so the local slope is exercised too
        near = rng.random(n) < 0.5
        Y[near] = _clip_ball(X[near] + 1e-3 * Y[near], inst.B)
        lhs = np.abs(evaluate_batch(inst, X) - evaluate_batch(inst, Y))
        rhs = inst.L * np.linalg.norm(X - Y, axis=1) * (1.0 + 1e-9)
        bad += int(np.count_nonzero(lhs > rhs))
    return bad


def check_convexity(inst: HardInstance, pairs: int, rng) -> int:
    """Violations of the midpoint-style convexity inequality at random ``lambda``."""
    rng = make_rng(rng)
    bad = 0
    tol = 1e-9 * inst.L * inst.B
    for n in _chunks(pairs, max(1, (1 << 22) // inst.d)):
        X = random_ball_points(rng, n, inst.d, inst.B, surface_fraction=0.5)
        Y = random_ball_points(rng, n, inst.d, inst.B, surface_fraction=0.5)
        lam = rng.random(n)
        Z = lam[:, None] * X + (1.0 - lam)[:, None] * Y
        fz = evaluate_batch(inst, Z)
        bad += int(np.count_nonzero(fz > lam * evaluate_batch(inst, X)
                                    + (1.0 - lam) * evaluate_batch(inst, Y) + tol))
    return bad


def _chunks(total, size):
    done = 0
    while done < total:
        n = min(size, total - done)
        yield n
        done += n


def _clip_ball(X, radius):
    nrm = np.linalg.norm(X, axis=1)
    scale = np.where(nrm > radius, radius / np.maximum(nrm, 1e-300), 1.0)
    return X * scale[:, None]


def shifted_index_oracle(inst: HardInstance, ledger, x) -> OracleResponse:
    """Fault injection: answers with ``v_{l+1}`` instead of ``v_l`` (capped at ``k``)."""
    scratch = type(ledger)()
    true = resisting_query(inst, scratch, x)
    idx = min(true.active_index + 1, inst.k)
    resp = OracleResponse(value=true.value, subgradient=inst.L * inst.V.vectors[idx - 1],
                          active_index=idx)
    ledger.append(x, resp)
    return resp


SUITES = ("lipschitz", "convexity", "subgradient", "oracle", "lemma1", "lemma2",
          "projection", "cap")


@dataclass
class CheckTally:
    cases: int = 0
    counterexamples: int = 0
    examples: list = field(default_factory=list)

    def add(self, n_cases, n_bad=0, example=None):
        self.cases += n_cases
        self.counterexamples += n_bad
        if example is not None and len(self.examples) < 5:
            self.examples.append(example)


@dataclass
class SuiteReport:
    checks: dict
    selftests: dict
    trials: int

    @property
    def passed(self) -> bool:
        return (all(t.counterexamples == 0 for t in self.checks.values())
                and all(s.get("ok", True) for s in self.selftests.values()))

    def to_dict(self) -> dict:
        return {"passed": self.passed, "trials": self.trials,
                "checks": {k: asdict(v) for k, v in self.checks.items()},
                "selftests": self.selftests}


def run_lemma_suite(trials: int = 1000, k_list=(1, 2, 4, 8), d_per_k: int = 64,
                    algos=None, base_seed: int = 0, suites=SUITES, d: int | None = None,
                    probes: int = 16, pairs: int = 16, selftests: bool = True) -> SuiteReport:
    """Run the invariant checkers over ``trials`` randomized full runs.

    Trial ``i`` uses ``k = k_list[i % len(k_list)]``, ``d = d_per_k * k`` (or
    the fixed ``d``) and algorithm ``algos[i % len(algos)]`` with budget ``k``.
    """
    unknown = set(suites) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}; expected a subset of {SUITES}")
    algos = list(algos or available_algorithms())
    checks = {s: CheckTally() for s in suites if s != "cap"}
    needs_runs = bool(checks.keys() & {"lemma1", "lemma2", "projection", "oracle", "subgradient"})
    for i in range(trials if checks else 0):
        k = k_list[i % len(k_list)]
        dim = d if d is not None else d_per_k * k
        inst = build_instance(k, dim, seed=derive_seed(base_seed, i, "instance"))
        prng = np.random.default_rng(derive_seed(base_seed, i, "probe"))
        if "lipschitz" in checks:
            checks["lipschitz"].add(pairs, check_lipschitz(inst, pairs, prng))
        if "convexity" in checks:
            checks["convexity"].add(pairs, check_convexity(inst, pairs, prng))
        if not needs_runs:
            continue
        algo = algos[i % len(algos)]
        rec = run_algorithm(inst, algo, k, derive_seed(base_seed, i, "algorithm"))
        ctx = {"trial": i, "k": k, "d": dim, "algo": algo}
        if "lemma1" in checks:
            v = check_g_implies_e(rec.trace)
            checks["lemma1"].add(1, int(v.failed), {**ctx, **v.detail} if v.failed else None)
        if "lemma2" in checks:
            v = check_all_oracle_responses(rec.trace, rec.ledger)
            checks["lemma2"].add(1, int(v.failed), {**ctx, **v.detail} if v.failed else None)
        if "projection" in checks:
            diags = trace_diagnostics(rec.trace, inst)
            flagged = [dg for dg in diags if not dg.ok]
            checks["projection"].add(len(diags), len(flagged),
                                     {**ctx, "t": flagged[0].t, "j": flagged[0].flagged}
                                     if flagged else None)
        if "oracle" in checks:
            for t, (x, r) in enumerate(zip(rec.ledger.queries, rec.ledger.responses), 1):
                ok = (r.value == evaluate(inst, x)
                      and np.array_equal(r.subgradient, inst.L * inst.V.vectors[r.active_index - 1]))
                checks["oracle"].add(1, int(not ok), None if ok else {**ctx, "t": t})
        if "subgradient" in checks:
            for t, (x, r) in enumerate(zip(rec.ledger.queries, rec.ledger.responses), 1):
                ok = subgradient_validity_check(inst, x, r, probes=probes, rng=prng)
                checks["subgradient"].add(probes, int(not ok), None if ok else {**ctx, "t": t})

    report = SuiteReport(checks=checks, selftests={}, trials=trials)
    if "cap" in suites:
        cap = cap_probability_experiment(2000, 0.05, 100_000,
                                         rng=derive_seed(base_seed, 0, "probe"))
        report.selftests["cap"] = {"ok": cap.within_bound, "empirical": cap.empirical,
                                   "analytic_bound": cap.analytic_bound}
    if selftests and checks.keys() & {"lemma1", "lemma2"}:
        report.selftests.update(_fault_injection(base_seed))
    return report


def _fault_injection(base_seed: int) -> dict:
    """Checker sensitivity: a shifted oracle must trip the oracle-response checker."""
    inst = build_instance(4, 256, seed=derive_seed(base_seed, 0, "instance"))
    rec = run_algorithm(inst, "subgradient", 4, derive_seed(base_seed, 0, "algorithm"),
                        oracle=shifted_index_oracle)
    fired2 = check_all_oracle_responses(rec.trace, rec.ledger).failed
    # doubling the G threshold may or may not break the implication; reported only
    fired1 = 0
    n = 50
    for i in range(n):
        inst_i = build_instance(4, 8, seed=derive_seed(base_seed, i, "instance"))
        r = run_algorithm(inst_i, "random-search", 4, derive_seed(base_seed, i, "algorithm"),
                          threshold_scale=2.0)
        fired1 += check_g_implies_e(r.trace).failed
    return {
        "shifted_oracle": {"ok": bool(fired2), "lemma2_fired": bool(fired2)},
        "doubled_threshold": {"ok": True, "lemma1_fired_runs": fired1, "runs": n},
    }


# -- output -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_results(stats, path, format: str = "csv") -> Path:
    """Write one row per :class:`SummaryStats` as CSV or JSON, in a fixed field order."""
    rows = [stats] if isinstance(stats, SummaryStats) else list(stats)
    rows = sorted(rows, key=lambda s: (s.k, s.d, s.algo, s.seed))
    if format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for s in rows:
            w.writerow([_fmt(getattr(s, c)) for c in CSV_COLUMNS])
        text = buf.getvalue()
    elif format == "json":
        text = json.dumps([{c: _json_safe(getattr(s, c)) for c in CSV_COLUMNS} for s in rows],
                          indent=1) + "\n"
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {format!r}")
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v
