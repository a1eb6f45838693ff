"""The hard max-of-linear instance family and its suboptimality certificates.

For an integer ``k`` the unit-scale instance is

    f(x) = max_{1<=j<=k} ( <x, v_j> - j*c ),   eps_unit = 1/(2 sqrt k),  c = eps_unit/k

with Haar-random orthonormal ``v_j``. General Lipschitz constant ``L`` and
radius ``B`` are obtained by ``f_{L,B}(x) = L*B*f(x/B)``, so the advertised
accuracy target is ``eps = L*B*eps_unit``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .vecspace import OrthonormalBasis, as_vector, sample_haar_orthonormal

FEAS_RTOL = 1e-9
FORMAT_VERSION = 1
TEXT_MAX_ENTRIES = 100_000


class DomainError(ValueError):
    """A point outside the feasible ball ``||x|| <= B(1 + 1e-9)``."""

    def __init__(self, norm: float, radius: float):
        self.norm = float(norm)
        self.radius = float(radius)
        super().__init__(f"||x|| = {self.norm!r} exceeds radius {self.radius!r} "
                         f"(relative tolerance {FEAS_RTOL})")


@dataclass(frozen=True, eq=False)
class HardInstance:
    k: int
    d: int
    eps_unit: float
    c: float
    L: float
    B: float
    V: OrthonormalBasis
    seed: int | None = None

    @property
    def eps(self) -> float:
        """Accuracy target at the instance's scale, ``L*B*eps_unit``."""
        return self.L * self.B * self.eps_unit

    @property
    def half_c(self) -> float:
        return 0.5 * self.c

    @classmethod
    def from_vectors(cls, V, L: float = 1.0, B: float = 1.0, seed=None,
                     require_dim: bool = True) -> "HardInstance":
        """Instance over explicitly given orthonormal rows ``V`` (shape (k, d))."""
        basis = V if isinstance(V, OrthonormalBasis) else OrthonormalBasis(np.atleast_2d(V))
        k, d = len(basis), basis.dim
        _check_params(k, d, L, B, require_dim)
        eps_unit, c = unit_constants(k)
        return cls(k=k, d=d, eps_unit=eps_unit, c=c, L=float(L), B=float(B),
                   V=basis, seed=seed)


def unit_constants(k: int) -> tuple[float, float]:
    """``(eps_unit, c)`` for ``k`` pieces: ``1/(2 sqrt k)`` and ``1/(2 k sqrt k)``."""
    return 1.0 / (2.0 * math.sqrt(k)), 1.0 / (2.0 * k * math.sqrt(k))


def _check_params(k, d, L, B, require_dim=True):
    if int(k) != k or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"L must be positive and finite, got {L!r}")
    if not (B > 0 and math.isfinite(B)):
        raise ValueError(f"B must be positive and finite, got {B!r}")
    if require_dim and d < 2 * k:
        raise ValueError(f"dimension d={d} must be at least 2k={2 * k}")


def build_instance(k: int, d: int, L: float = 1.0, B: float = 1.0, seed=0) -> HardInstance:
    """Draw a hard instance with ``k`` Haar-random orthonormal directions in R^d."""
    _check_params(k, d, L, B)
    basis = sample_haar_orthonormal(int(d), int(k), np.random.default_rng(seed))
    eps_unit, c = unit_constants(int(k))
    return HardInstance(k=int(k), d=int(d), eps_unit=eps_unit, c=c,
                        L=float(L), B=float(B), V=basis,
                        seed=None if seed is None else int(seed))


def unit_point(inst: HardInstance, x) -> np.ndarray:
    """Validate feasibility and return ``x/B``."""
    x = as_vector(x, inst.d)
    nrm = float(np.linalg.norm(x))
    if nrm > inst.B * (1.0 + FEAS_RTOL):
        raise DomainError(nrm, inst.B)
    return x / inst.B


def evaluate(inst: HardInstance, x) -> float:
    u = unit_point(inst, x)
    best, _ = _kernels.piece_argmax(inst.V.vectors, u, inst.c)
    return inst.L * inst.B * best


def evaluate_batch(inst: HardInstance, X) -> np.ndarray:
    """``evaluate`` for every row of ``X`` (feasibility checked row-wise)."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != inst.d:
        raise ValueError(f"expected shape (n, {inst.d}), got {X.shape}")
    norms = np.linalg.norm(X, axis=1)
    bad = np.flatnonzero(norms > inst.B * (1.0 + FEAS_RTOL))
    if bad.size:
        raise DomainError(norms[bad[0]], inst.B)
    vals = _kernels.batch_piece_max(inst.V.vectors, X / inst.B, inst.c)
    return inst.L * inst.B * vals


@dataclass(frozen=True)
class ReferenceSolution:
    x_hat: np.ndarray
    f_x_hat: float
    optimum_lower: float
    optimum_upper: float


def reference_solution(inst: HardInstance) -> ReferenceSolution:
    """The point ``-(B/sqrt k) sum_j v_j`` and a bracket on the true minimum.

    The upper end is ``f(x_hat)``; the lower end ``-3 L B eps_unit`` follows from
    ``max_j <y, v_j> >= -1/sqrt k`` on the unit ball and ``j c <= eps_unit``.
    """
    x_hat = -(inst.B / math.sqrt(inst.k)) * inst.V.vectors.sum(axis=0)
    f_hat = evaluate(inst, x_hat)
    lower = -3.0 * inst.L * inst.B * inst.eps_unit
    return ReferenceSolution(x_hat=x_hat, f_x_hat=f_hat,
                             optimum_lower=lower, optimum_upper=f_hat)


def reference_value(inst: HardInstance) -> float:
    """Closed form ``-L B (2 eps_unit + c)`` of ``f(x_hat)``."""
    return -inst.L * inst.B * (2.0 * inst.eps_unit + inst.c)


class Certificate(NamedTuple):
    certified: bool
    witness: int | None


def certify_not_suboptimal(inst: HardInstance, x, eps: float | None = None) -> Certificate:
    """Certify that ``x`` is *not* eps-suboptimal.

    Returns ``(True, j)`` for the first (1-based) ``j`` with
    ``<x/B, v_j> > -c/2``; in that case ``f(x) > f(x_hat) + eps``. Otherwise
    ``(False, None)``: no certificate, ``x`` may or may not be suboptimal.
    """
    if eps is not None and not math.isclose(eps, inst.eps, rel_tol=1e-12):
        raise ValueError(f"certificate only holds for eps = L*B*eps_unit = {inst.eps!r}")
    u = unit_point(inst, x)
    ips = inst.V.vectors @ u
    hits = np.flatnonzero(ips > -inst.half_c)
    if hits.size:
        return Certificate(True, int(hits[0]) + 1)
    return Certificate(False, None)


def event_dimension_threshold(eps_unit: float) -> float:
    """Dimension threshold ``(2/eps^8) log(1/eps^4)`` for ``P[E] > 15/16``."""
    return (2.0 / eps_unit ** 8) * math.log(1.0 / eps_unit ** 4)


def event_probability_bound(k: int, d: int) -> float:
    """``1 - k^2 exp(-c^2 (d - 2k + 1) / (40 k))`` with ``c = 1/(2k^{3/2})``."""
    _, c = unit_constants(k)
    return 1.0 - k * k * math.exp(-(c * c) * (d - 2 * k + 1) / (40.0 * k))


# -- serialization ----------------------------------------------------------

def _meta(inst: HardInstance) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "k": inst.k,
        "d": inst.d,
        "L": inst.L,
        "B": inst.B,
        "seed": inst.seed,
        "eps_unit": inst.eps_unit,
        "c": inst.c,
    }


def save_instance(inst: HardInstance, path, text: bool | None = None) -> list[Path]:
    """Write ``inst`` as a JSON metadata file, plus a binary sidecar for ``V``.

    The sidecar ``<stem>.V.f64`` holds ``V`` row-major as little-endian float64.
    With ``text=True`` (default when ``k*d <= 100000``) ``V`` is embedded in the
    JSON instead. Returns the paths written.
    """
    path = Path(path)
    n = inst.k * inst.d
    if text is None:
        text = n <= TEXT_MAX_ENTRIES
    if text and n > TEXT_MAX_ENTRIES:
        raise ValueError(f"text encoding limited to k*d <= {TEXT_MAX_ENTRIES}, got {n}")
    meta = _meta(inst)
    written = [path]
    try:
        if text:
            meta["encoding"] = "text"
            meta["V"] = inst.V.vectors.tolist()
        else:
            blob = inst.V.vectors.astype("<f8", copy=False).tobytes(order="C")
            side = path.with_name(path.stem + ".V.f64")
            meta["encoding"] = "binary"
            meta["data_file"] = side.name
            meta["sha256"] = hashlib.sha256(blob).hexdigest()
            side.write_bytes(blob)
            written.append(side)
        path.write_text(json.dumps(meta, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write instance to {path}: {exc}") from exc
    return written


def load_instance(path) -> HardInstance:
    path = Path(path)
    try:
        meta = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"cannot read instance {path}: {exc}") from exc
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {meta.get('format_version')!r}")
    k, d = int(meta["k"]), int(meta["d"])
    if meta["encoding"] == "text":
        V = np.asarray(meta["V"], dtype=np.float64)
    elif meta["encoding"] == "binary":
        side = path.with_name(meta["data_file"])
        blob = side.read_bytes()
        if hashlib.sha256(blob).hexdigest() != meta["sha256"]:
            raise ValueError(f"{side}: checksum mismatch")
        V = np.frombuffer(blob, dtype="<f8").astype(np.float64)
    else:
        raise ValueError(f"{path}: unknown encoding {meta['encoding']!r}")
    V = V.reshape(k, d)
    inst = HardInstance.from_vectors(V, L=meta["L"], B=meta["B"], seed=meta["seed"])
    if inst.c != meta["c"] or inst.eps_unit != meta["eps_unit"]:
        raise ValueError(f"{path}: stored constants disagree with k={k}")
    return inst
