"""Dense vectors, orthonormal bases, projections and rotation-invariant sampling.

Vectors are plain 1-D ``float64`` numpy arrays. An :class:`OrthonormalBasis`
stores its vectors as the rows of a read-only ``(m, d)`` array.
"""
from __future__ import annotations

import hashlib

import numpy as np

from . import _kernels

DEFAULT_ORTHO_TOL = 1e-10
DEFAULT_DROP_TOL = 1e-10

_ROLES = ("instance", "algorithm", "probe", "trial")


def as_vector(x, dim: int | None = None, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, optionally checking its length."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite components")
    return arr


def derive_seed(base_seed: int, index: int, role: str) -> int:
    """Seed for substream ``(index, role)``: ``base_seed XOR blake2b(index, role)``.

    The hash is a fixed 64-bit blake2b digest of ``"<index>:<role>"``, so the
    mapping is stable across Python versions and processes.
    """
    if role not in _ROLES:
        raise ValueError(f"unknown seed role {role!r}; expected one of {_ROLES}")
    digest = hashlib.blake2b(f"{int(index)}:{role}".encode(), digest_size=8).digest()
    return (int(base_seed) & 0xFFFFFFFFFFFFFFFF) ^ int.from_bytes(digest, "little")


def make_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class OrthonormalBasis:
    """Ordered orthonormal vectors in R^dim, stored as rows.

    Parameters
    ----------
    vectors : array_like, shape (m, dim)
        Rows must be orthonormal within ``ortho_tol``; checked on construction
        unless ``check=False``.
    dim : int, optional
        Needed only for the empty basis.
    """

    __slots__ = ("_vectors", "dim", "ortho_tol")

    def __init__(self, vectors, dim: int | None = None,
                 ortho_tol: float = DEFAULT_ORTHO_TOL, check: bool = True):
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.size == 0:
            if dim is None:
                if arr.ndim == 2 and arr.shape[1] > 0:
                    dim = arr.shape[1]
                else:
                    raise ValueError("empty basis needs an explicit dim")
            arr = np.empty((0, int(dim)))
        if arr.ndim != 2:
            raise ValueError(f"basis vectors must form a 2-D array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise ValueError(f"basis vectors have dimension {arr.shape[1]}, expected {dim}")
        if arr.shape[0] > arr.shape[1]:
            raise ValueError(f"{arr.shape[0]} vectors cannot be orthonormal in R^{arr.shape[1]}")
        arr = np.array(arr, dtype=np.float64, order="C", copy=True)
        arr.setflags(write=False)
        self._vectors = arr
        self.dim = arr.shape[1]
        self.ortho_tol = float(ortho_tol)
        if check and not self.is_orthonormal():
            raise ValueError(f"vectors are not orthonormal within {ortho_tol}: "
                             f"max Gram error {self.gram_error():.3e}")

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    def __len__(self):
        return self._vectors.shape[0]

    def __getitem__(self, i):
        return self._vectors[i]

    def __repr__(self):
        return f"OrthonormalBasis(m={len(self)}, dim={self.dim})"

    def gram_error(self) -> float:
        if len(self) == 0:
            return 0.0
        G = self._vectors @ self._vectors.T
        return float(np.max(np.abs(G - np.eye(len(self)))))

    def is_orthonormal(self) -> bool:
        return self.gram_error() <= self.ortho_tol

    def extend(self, v: np.ndarray) -> "OrthonormalBasis":
        """New basis with the unit vector ``v`` appended (no re-checking)."""
        v = as_vector(v, self.dim, "v")
        return OrthonormalBasis(np.vstack([self._vectors, v]), self.dim,
                                self.ortho_tol, check=False)


def _check_dims(basis: OrthonormalBasis, x: np.ndarray, name: str) -> np.ndarray:
    return as_vector(x, basis.dim, name)


def gram_schmidt_residual(basis: OrthonormalBasis, v, drop_tol: float = DEFAULT_DROP_TOL):
    """Normalized component of ``v`` orthogonal to ``basis``, or ``None``.

    Classical Gram-Schmidt applied twice. Returns ``None`` when the residual
    norm is at most ``drop_tol`` (the vector already lies in the span).
    """
    v = _check_dims(basis, v, "v")
    r, nrm = _kernels.gs_residual(basis.vectors, len(basis), v)
    if nrm <= drop_tol:
        return None
    return r / nrm


def project(basis: OrthonormalBasis, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the span of ``basis``."""
    x = _check_dims(basis, x, "x")
    if len(basis) == 0:
        return np.zeros_like(x)
    Q = basis.vectors
    return Q.T @ (Q @ x)


def project_perp(basis: OrthonormalBasis, x) -> np.ndarray:
    """Projection of ``x`` onto the orthogonal complement of ``basis``."""
    x = _check_dims(basis, x, "x")
    return x - project(basis, x)


def sample_haar_orthonormal(d: int, m: int, rng) -> OrthonormalBasis:
    """Draw ``m`` orthonormal vectors in R^d from the Haar (rotation-invariant) law.

    Gaussian rows orthonormalized in order by two-pass Gram-Schmidt; the
    result is exactly Haar-distributed on the Stiefel manifold.
    """
    d, m = int(d), int(m)
    if d < 1 or m < 1:
        raise ValueError(f"d and m must be positive, got d={d}, m={m}")
    if m > d:
        raise ValueError(f"cannot draw {m} orthonormal vectors in dimension {d}")
    rng = make_rng(rng)
    Q = np.empty((m, d))
    i = 0
    while i < m:
        g = rng.standard_normal(d)
        r, nrm = _kernels.gs_residual(Q, i, g)
        if nrm <= DEFAULT_DROP_TOL:  # probability zero; redraw
            continue
        Q[i] = r / nrm
        i += 1
    return OrthonormalBasis(Q, d, check=True)


def sample_unit_sphere(d: int, rng) -> np.ndarray:
    """Uniform random point on the unit sphere in R^d."""
    d = int(d)
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    rng = make_rng(rng)
    while True:
        g = rng.standard_normal(d)
        nrm = np.linalg.norm(g)
        if nrm > 0.0:
            return g / nrm
