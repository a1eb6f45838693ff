"""Run instrumentation: the span tracker, the G_t / E events, and lemma checkers.

Everything here works on unit-scaled quantities (``x/B`` and the unit-norm
``v_j``), whatever ``L`` and ``B`` the instance uses.

Rounds are 1-based throughout; ``trace.rounds[t-1]`` holds round ``t``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .instance import HardInstance
from .vecspace import DEFAULT_DROP_TOL, OrthonormalBasis, as_vector

PROJ_BOUND_ATOL = 1e-12


class StateError(RuntimeError):
    """Instrumentation called in the wrong order."""


def g_threshold(inst: HardInstance) -> float:
    """``c / (2 (sqrt 2 + sqrt(k - 1)))``."""
    return inst.c / (2.0 * (math.sqrt(2.0) + math.sqrt(inst.k - 1)))


def projection_bound(inst: HardInstance, t: int) -> float:
    """Inductive bound ``c^2 (t-1) / (2 (sqrt 2 + sqrt(k-1))^2)`` on ``||P_{t-1} v_j||^2``."""
    s = math.sqrt(2.0) + math.sqrt(inst.k - 1)
    return inst.c ** 2 * (t - 1) / (2.0 * s * s)


class ProjectionTracker:
    """Incremental Gram-Schmidt basis of ``S_t = span{x^(1..t), v_1..v_t}``.

    Each round appends the residual of ``x^(t)/B`` and then that of ``v_t``;
    residuals with norm at most ``drop_tol`` are dropped and counted.
    """

    def __init__(self, inst: HardInstance, drop_tol: float = DEFAULT_DROP_TOL):
        self.d = inst.d
        self.k = inst.k
        self.drop_tol = drop_tol
        self._Q = np.empty((min(2 * inst.k, inst.d), inst.d))
        self.size = 0
        self.t = 0
        self.dropped = 0

    @property
    def basis(self) -> OrthonormalBasis:
        return OrthonormalBasis(self._Q[:self.size], self.d, check=False)

    def residual(self, v: np.ndarray):
        """Normalized residual of ``v`` against the current basis, or ``None``."""
        r, nrm = _kernels.gs_residual(self._Q, self.size, v)
        if nrm <= self.drop_tol:
            return None
        return r / nrm

    def push(self, r) -> None:
        if r is None:
            self.dropped += 1
            return
        self._Q[self.size] = r
        self.size += 1

    def projected_sq_norms(self, V: np.ndarray) -> np.ndarray:
        """``||P v||^2`` for every row of ``V`` onto the current span."""
        if self.size == 0:
            return np.zeros(V.shape[0])
        C = V @ self._Q[:self.size].T
        return np.einsum("ij,ij->i", C, C)


@dataclass
class RoundRecord:
    t: int
    inner_products: np.ndarray   # |<x^(t)/B, v_j>| for all j = 1..k
    g_margin: float
    g_flag: bool
    proj_sq: np.ndarray          # ||P_{t-1} v_j||^2 for j >= t
    active_index: int | None = None

    @property
    def max_future_ip(self) -> float:
        """``max_{j >= t} |<x^(t), v_j>|``."""
        return float(self.inner_products[self.t - 1:].max())


@dataclass
class EventTrace:
    k: int
    c: float
    threshold: float
    rounds: list = field(default_factory=list)

    @classmethod
    def for_instance(cls, inst: HardInstance, threshold_scale: float = 1.0) -> "EventTrace":
        return cls(k=inst.k, c=inst.c, threshold=g_threshold(inst) * threshold_scale)

    @property
    def g_flags(self) -> list:
        return [r.g_flag for r in self.rounds]

    @property
    def g_margins(self) -> list:
        return [r.g_margin for r in self.rounds]

    @property
    def G_all(self) -> bool:
        return all(self.g_flags)

    @property
    def E_holds(self) -> bool:
        half_c = 0.5 * self.c
        return all(bool(np.all(r.inner_products[r.t - 1:] < half_c)) for r in self.rounds)

    def first_E_violation(self):
        """``(t, j)`` of the first round/index breaking E, or ``None``."""
        half_c = 0.5 * self.c
        for r in self.rounds:
            bad = np.flatnonzero(r.inner_products[r.t - 1:] >= half_c)
            if bad.size:
                return r.t, int(bad[0]) + r.t
        return None


def observe_round(tracker: ProjectionTracker, trace: EventTrace, inst: HardInstance,
                  x_t, active_index: int | None = None) -> EventTrace:
    """Record round ``t = tracker.t + 1`` for the accepted query ``x_t``."""
    if len(trace.rounds) != tracker.t:
        raise StateError(f"trace has {len(trace.rounds)} rounds but tracker is at t={tracker.t}")
    t = tracker.t + 1
    if t > inst.k:
        raise StateError(f"events are defined for t <= k={inst.k}; got round {t}")
    u = as_vector(x_t, inst.d, "x_t") / inst.B
    V = inst.V.vectors
    future = V[t - 1:]

    proj_sq = tracker.projected_sq_norms(future)
    r = tracker.residual(u)
    margin = 0.0 if r is None else float(np.max(np.abs(future @ r)))
    rec = RoundRecord(t=t, inner_products=np.abs(V @ u), g_margin=margin,
                      g_flag=margin < trace.threshold, proj_sq=proj_sq,
                      active_index=active_index)
    trace.rounds.append(rec)

    tracker.push(r)
    tracker.push(tracker.residual(V[t - 1]))
    tracker.t = t
    return trace


@dataclass(frozen=True)
class Verdict:
    status: str                  # "pass", "counterexample" or "not_applicable"
    detail: dict | None = None

    @property
    def failed(self) -> bool:
        return self.status == "counterexample"


PASS = Verdict("pass")
NOT_APPLICABLE = Verdict("not_applicable")


def check_g_implies_e(trace: EventTrace) -> Verdict:
    """Executable ``G_1 and ... and G_k  =>  E`` over the recorded prefix.

    Checked prefix-wise: whenever ``G_1..G_t`` all hold, every ``j >= t`` must
    have ``|<x^(t), v_j>| < c/2``. A counterexample means the instrumentation
    (not the math) is wrong.
    """
    half_c = 0.5 * trace.c
    checked = False
    for r in trace.rounds:
        if not r.g_flag:
            break
        checked = True
        ips = r.inner_products[r.t - 1:]
        bad = np.flatnonzero(ips >= half_c)
        if bad.size:
            j = int(bad[0]) + r.t
            return Verdict("counterexample", {"t": r.t, "j": j,
                                              "inner_product": float(ips[bad[0]]),
                                              "half_c": half_c})
    return PASS if checked else NOT_APPLICABLE


def check_oracle_responses(trace: EventTrace, ledger, t: int) -> Verdict:
    """Executable ``G_{<=t}  =>  active_index(t) <= t``."""
    if t < 1 or t > len(trace.rounds) or t > ledger.count:
        raise StateError(f"round {t} not observed")
    if not all(r.g_flag for r in trace.rounds[:t]):
        return NOT_APPLICABLE
    idx = ledger.responses[t - 1].active_index
    if idx > t:
        return Verdict("counterexample", {"t": t, "active_index": idx})
    return PASS


def check_all_oracle_responses(trace: EventTrace, ledger) -> Verdict:
    """:func:`check_oracle_responses` for every observed round; first failure wins."""
    applicable = False
    for t in range(1, len(trace.rounds) + 1):
        v = check_oracle_responses(trace, ledger, t)
        if v.failed:
            return v
        applicable |= v.status == "pass"
    return PASS if applicable else NOT_APPLICABLE


@dataclass(frozen=True)
class ProjectionDiagnostic:
    t: int
    sq_norms: np.ndarray   # ||P_{t-1} v_j||^2 for j = t..k
    bound: float
    flagged: tuple         # 1-based j exceeding the bound

    @property
    def ok(self) -> bool:
        return not self.flagged


def projection_bound_diagnostic(tracker: ProjectionTracker, inst: HardInstance,
                                t: int | None = None) -> ProjectionDiagnostic:
    """Compare ``||P_{t-1} v_j||^2`` (``j >= t``) with the inductive bound.

    Uses the tracker's current span, i.e. ``t = tracker.t + 1`` by default.
    A flag means an upstream ``G`` failure or an instrumentation bug.
    """
    if t is None:
        t = tracker.t + 1
    if t != tracker.t + 1:
        raise StateError(f"tracker holds S_{tracker.t}; cannot diagnose round {t}")
    sq = tracker.projected_sq_norms(inst.V.vectors[t - 1:])
    return _diagnose(sq, inst, t)


def _diagnose(sq, inst, t):
    bound = projection_bound(inst, t)
    flagged = tuple(int(i) + t for i in np.flatnonzero(sq > bound + PROJ_BOUND_ATOL))
    return ProjectionDiagnostic(t=t, sq_norms=sq, bound=bound, flagged=flagged)


def trace_diagnostics(trace: EventTrace, inst: HardInstance) -> list:
    """Projection diagnostics for each recorded round whose ``G_{<t}`` held."""
    out = []
    for r in trace.rounds:
        out.append(_diagnose(r.proj_sq, inst, r.t))
        if not r.g_flag:
            break
    return out


TRACE_COLUMNS = ("t", "g_margin", "g_threshold", "g_flag", "max_future_ip", "half_c",
                 "active_index")


def export_trace(trace: EventTrace, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in trace.rounds:
                w.writerow([r.t, repr(r.g_margin), repr(trace.threshold), int(r.g_flag),
                            repr(r.max_future_ip), repr(0.5 * trace.c),
                            "" if r.active_index is None else r.active_index])
    except OSError as exc:
        raise OSError(f"cannot write trace to {path}: {exc}") from exc
    return path
