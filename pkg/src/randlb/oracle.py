"""Resisting first-order oracle and the per-trial query ledger."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .instance import HardInstance, evaluate, evaluate_batch, unit_point
from .vecspace import make_rng


@dataclass(frozen=True, eq=False)
class OracleResponse:
    value: float
    subgradient: np.ndarray
    active_index: int  # 1-based


@dataclass
class QueryLedger:
    queries: list = field(default_factory=list)
    responses: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.queries)

    def __len__(self):
        return len(self.queries)

    def append(self, x: np.ndarray, response: OracleResponse) -> None:
        x = np.array(x, dtype=np.float64)
        x.setflags(write=False)
        self.queries.append(x)
        self.responses.append(response)

    @property
    def last(self) -> OracleResponse | None:
        return self.responses[-1] if self.responses else None


def resisting_query(inst: HardInstance, ledger: QueryLedger, x) -> OracleResponse:
    """Answer ``x`` with ``f(x)`` and ``L v_l`` for the smallest maximizing ``l``.

    Ties are exact floating-point ties of the piece values. Infeasible points
    raise :class:`~randlb.instance.DomainError` and leave the ledger untouched.
    """
    u = unit_point(inst, x)
    best, idx = _kernels.piece_argmax(inst.V.vectors, u, inst.c)
    resp = OracleResponse(value=inst.L * inst.B * best,
                          subgradient=inst.L * inst.V.vectors[idx],
                          active_index=idx + 1)
    ledger.append(x, resp)
    return resp


def subgradient_validity_check(inst: HardInstance, x, response: OracleResponse,
                               probes: int = 1000, rng=None,
                               subgradient=None) -> bool:
    """Check ``f(y) >= f(x) + <g, y - x> - 1e-9 L B`` on random feasible ``y``.

    Probes are half uniform in the ball, half on the sphere of radius ``B``.
    ``subgradient`` overrides ``response.subgradient`` (used for fault tests).
    """
    rng = make_rng(0 if rng is None else rng)
    x = np.asarray(x, dtype=np.float64)
    g = response.subgradient if subgradient is None else np.asarray(subgradient, dtype=np.float64)
    fx = evaluate(inst, x)
    tol = 1e-9 * inst.L * inst.B
    done = 0
    while done < probes:
        n = min(probes - done, 2048)
        Y = random_ball_points(rng, n, inst.d, inst.B, surface_fraction=0.5)
        fy = evaluate_batch(inst, Y)
        if np.any(fy < fx + (Y - x) @ g - tol):
            return False
        done += n
    return True


def random_ball_points(rng, n: int, d: int, radius: float, surface_fraction: float = 0.0):
    """``n`` points in the ``d``-ball: a fraction on the sphere, the rest uniform inside."""
    G = rng.standard_normal((n, d))
    on_sphere = rng.random(n) < surface_fraction
    r = np.where(on_sphere, 1.0, rng.random(n) ** (1.0 / d))
    G *= (radius * r / np.sqrt(np.einsum("ij,ij->i", G, G)))[:, None]
    return G


LEDGER_COLUMNS = ("t", "active_index", "value", "norm_x")


def export_ledger(ledger: QueryLedger, path, include_x: bool = False) -> Path:
    """Write one CSV row per query: t, active_index, value, ||x|| [, x_0..x_{d-1}]."""
    path = Path(path)
    header = list(LEDGER_COLUMNS)
    if include_x and ledger.count:
        header += [f"x_{i}" for i in range(ledger.queries[0].shape[0])]
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for t, (x, r) in enumerate(zip(ledger.queries, ledger.responses), start=1):
                row = [t, r.active_index, repr(float(r.value)), repr(float(np.linalg.norm(x)))]
                if include_x:
                    row += [repr(float(v)) for v in x]
                w.writerow(row)
    except OSError as exc:
        raise OSError(f"cannot write ledger to {path}: {exc}") from exc
    return path
