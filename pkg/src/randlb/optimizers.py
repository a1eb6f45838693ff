"""First-order algorithms behind one deterministic-given-seed interface.

Every algorithm is a small state machine: ``next_query(ledger)`` reads the
oracle's answers so far and returns the next feasible point, and ``output()``
is the point it would report after the queries made so far. All randomness
comes from the private generator handed in at construction, so a run is a
deterministic function of ``(instance, seed, budget)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .events import EventTrace, ProjectionTracker, observe_round
from .instance import (HardInstance, certify_not_suboptimal, evaluate,
                       reference_solution)
from .oracle import QueryLedger, resisting_query
from .vecspace import sample_unit_sphere

_REGISTRY = {}


def register(name):
    def deco(cls):
        cls.name = name
        _REGISTRY[name] = cls
        return cls
    return deco


def available_algorithms() -> list:
    return sorted(_REGISTRY)


def project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    nrm = float(np.linalg.norm(x))
    if nrm > radius:
        return x * (radius / nrm)
    return x


class Algorithm:
    name = "base"

    def __init__(self, d: int, L: float, B: float, budget: int, rng: np.random.Generator,
                 **params):
        if params:
            raise TypeError(f"{self.name}: unknown parameters {sorted(params)}")
        self.d, self.L, self.B, self.budget = d, L, B, budget
        self.rng = rng
        self.t = 0  # queries issued

    def next_query(self, ledger: QueryLedger) -> np.ndarray:
        raise NotImplementedError

    def output(self) -> np.ndarray | None:
        """Reported point; ``None`` means "the latest query"."""
        return None


class _ProjectedSubgradient(Algorithm):
    """Projected subgradient from ``x_1 = 0``, reporting the running average."""

    def __init__(self, d, L, B, budget, rng, **params):
        super().__init__(d, L, B, budget, rng, **params)
        self.x = np.zeros(d)
        self._sum = np.zeros(d)

    def step(self, t: int) -> float:
        raise NotImplementedError

    def next_query(self, ledger):
        if self.t > 0:
            g = ledger.last.subgradient
            self.x = project_ball(self.x - self.step(self.t) * g, self.B)
        self.t += 1
        self._sum += self.x
        return self.x

    def output(self):
        return self._sum / self.t


@register("subgradient")
class ConstantStepSubgradient(_ProjectedSubgradient):
    """Constant step ``B / (L sqrt T)`` with ``T`` the query budget."""

    def step(self, t):
        return self.B / (self.L * math.sqrt(self.budget))


@register("subgradient-avg")
class DecayingStepSubgradient(_ProjectedSubgradient):
    """Step ``B / (L sqrt t)`` at iteration ``t``, running average reported."""

    def step(self, t):
        return self.B / (self.L * math.sqrt(t))


@register("random-search")
class RandomSearch(Algorithm):
    """Uniform points on the radius-``B`` sphere."""

    def next_query(self, ledger):
        self.t += 1
        return self.B * sample_unit_sphere(self.d, self.rng)


@register("span")
class SpanGreedy(Algorithm):
    """Span-restricted: query ``-(B/sqrt m) sum`` of the ``m`` distinct directions seen.

    This is ``x_hat`` restricted to the revealed gradients, the natural
    span method for a max of linear pieces. ``x_1 = 0``.
    """

    def __init__(self, d, L, B, budget, rng, **params):
        super().__init__(d, L, B, budget, rng, **params)
        self._seen = set()
        self._dir_sum = np.zeros(d)

    def _absorb(self, ledger):
        if self.t == 0:
            return
        r = ledger.last
        if r.active_index not in self._seen:
            self._seen.add(r.active_index)
            g = r.subgradient
            self._dir_sum += g / np.linalg.norm(g)

    def span_point(self):
        m = len(self._seen)
        if m == 0:
            return np.zeros(self.d)
        return project_ball(-(self.B / math.sqrt(m)) * self._dir_sum, self.B)

    def next_query(self, ledger):
        self._absorb(ledger)
        self.t += 1
        return self.span_point()


@register("hybrid")
class HybridSpanGuess(SpanGreedy):
    """The span point plus a fresh random guess ``mix * B * u`` each round, projected."""

    def __init__(self, d, L, B, budget, rng, mix: float = 0.5, **params):
        super().__init__(d, L, B, budget, rng, **params)
        if not 0.0 < mix <= 1.0:
            raise ValueError(f"mix must lie in (0, 1], got {mix}")
        self.mix = float(mix)

    def next_query(self, ledger):
        self._absorb(ledger)
        self.t += 1
        u = sample_unit_sphere(self.d, self.rng)
        return project_ball(self.span_point() + self.mix * self.B * u, self.B)


def make_algorithm(name: str, inst: HardInstance, budget: int, rng, **params) -> Algorithm:
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; available: {available_algorithms()}") from None
    return cls(inst.d, inst.L, inst.B, budget, rng, **params)


def next_query(state: Algorithm, ledger: QueryLedger) -> np.ndarray:
    return state.next_query(ledger)


@dataclass
class TrialRecord:
    algo: str
    seed: int
    budget: int
    ledger: QueryLedger
    trace: EventTrace
    best_value: float
    best_certified: bool        # every examined point carried a non-suboptimality certificate
    first_success_value: int | None
    first_success_cert: int | None
    final_output_value: float

    @property
    def E_holds(self) -> bool:
        return self.trace.E_holds

    @property
    def G_all(self) -> bool:
        return self.trace.G_all


def run_algorithm(inst: HardInstance, algo_name: str, budget: int, seed, *,
                  params: dict | None = None, oracle=resisting_query,
                  threshold_scale: float = 1.0) -> TrialRecord:
    """Run ``budget`` oracle queries of ``algo_name`` with event instrumentation.

    A round counts as a value-based success when the query or the algorithm's
    reported point has ``f <= f(x_hat) + eps``, and as a certificate-based
    success when one of them carries no non-suboptimality certificate.
    Events are recorded for rounds ``t <= k``.
    """
    if int(budget) != budget or budget < 1:
        raise ValueError(f"budget must be a positive integer, got {budget!r}")
    budget = int(budget)
    rng = np.random.default_rng(seed)
    algo = make_algorithm(algo_name, inst, budget, rng, **(params or {}))
    ref = reference_solution(inst)
    target = ref.f_x_hat + inst.eps

    ledger = QueryLedger()
    tracker = ProjectionTracker(inst)
    trace = EventTrace.for_instance(inst, threshold_scale)
    best = math.inf
    all_certified = True
    first_val = first_cert = None
    out_val = math.nan
    for t in range(1, budget + 1):
        x = algo.next_query(ledger)
        resp = oracle(inst, ledger, x)
        if t <= inst.k:
            observe_round(tracker, trace, inst, x, resp.active_index)
        cert = certify_not_suboptimal(inst, x).certified
        out = algo.output()
        if out is None:
            out_val = resp.value
        else:
            out_val = evaluate(inst, out)
            cert = cert and certify_not_suboptimal(inst, out).certified
        round_best = min(resp.value, out_val)
        best = min(best, round_best)
        all_certified &= cert
        if first_val is None and round_best <= target:
            first_val = t
        if first_cert is None and not cert:
            first_cert = t
    return TrialRecord(algo=algo_name, seed=seed, budget=budget, ledger=ledger, trace=trace,
                       best_value=best, best_certified=all_certified,
                       first_success_value=first_val, first_success_cert=first_cert,
                       final_output_value=out_val)
