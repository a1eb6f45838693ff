import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from randlb.vecspace import (OrthonormalBasis, as_vector, derive_seed, gram_schmidt_residual,
                             project, project_perp, sample_haar_orthonormal, sample_unit_sphere)


def e(i, d=3):
    v = np.zeros(d)
    v[i] = 1.0
    return v


def test_haar_square_is_orthogonal():
    for seed in range(5):
        B = sample_haar_orthonormal(3, 3, seed)
        np.testing.assert_allclose(B.vectors @ B.vectors.T, np.eye(3), atol=1e-10)


def test_haar_one_dimensional():
    seen = {float(sample_haar_orthonormal(1, 1, s).vectors[0, 0]) for s in range(40)}
    assert seen == {1.0, -1.0}


def test_haar_rejects_m_above_d():
    with pytest.raises(ValueError):
        sample_haar_orthonormal(3, 4, 0)


def test_haar_isotropy_first_coordinate():
    rng = np.random.default_rng(7)
    xs = np.array([sample_haar_orthonormal(200, 1, rng).vectors[0, 0] for _ in range(100_000)])
    sig = xs.std(ddof=1) / math.sqrt(xs.size)
    assert -0.001 - 3 * sig <= xs.mean() <= 0.001 + 3 * sig
    # second moment of a uniform coordinate in R^d is exactly 1/d
    assert xs.var() == pytest.approx(1 / 200, rel=0.02)


@pytest.mark.parametrize("d,m", [(5, 5), (64, 10), (1000, 3)])
def test_haar_gram_identity(d, m):
    for seed in range(3):
        B = sample_haar_orthonormal(d, m, seed)
        assert B.gram_error() <= 1e-10


def test_haar_rotation_invariance_statistic():
    # distribution of <v_1, w> must not depend on the fixed unit vector w
    rng = np.random.default_rng(3)
    w1 = np.zeros(10)
    w1[0] = 1.0
    w2 = np.ones(10) / math.sqrt(10)
    a, b = [], []
    for _ in range(4000):
        v = sample_haar_orthonormal(10, 2, rng).vectors[1]
        a.append(v @ w1)
        b.append(v @ w2)
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_residual_examples():
    basis = OrthonormalBasis([e(0)])
    np.testing.assert_allclose(gram_schmidt_residual(basis, e(1)), e(1))
    assert gram_schmidt_residual(basis, e(0)) is None
    np.testing.assert_allclose(gram_schmidt_residual(basis, np.array([1, 1, 0]) / math.sqrt(2)),
                               [0, 1, 0], atol=1e-15)


def test_residual_dimension_mismatch():
    with pytest.raises(ValueError):
        gram_schmidt_residual(OrthonormalBasis([e(0)]), np.ones(4))


def test_residual_extends_basis(rng):
    basis = sample_haar_orthonormal(30, 5, rng)
    r = gram_schmidt_residual(basis, rng.standard_normal(30))
    assert basis.extend(r).is_orthonormal()


def test_project_examples():
    np.testing.assert_array_equal(project(OrthonormalBasis([[1.0, 0.0]]), [3.0, 4.0]), [3.0, 0.0])
    empty = OrthonormalBasis(np.empty((0, 4)), dim=4)
    np.testing.assert_array_equal(project(empty, [1.0, 2.0, 3.0, 4.0]), np.zeros(4))
    full = OrthonormalBasis(np.eye(4))
    x = np.array([0.3, -2.0, 5.5, 1e-3])
    np.testing.assert_allclose(project(full, x), x, atol=1e-10)


def test_project_dimension_mismatch():
    with pytest.raises(ValueError):
        project(OrthonormalBasis(np.eye(2)), np.ones(3))


def test_basis_rejects_non_orthonormal():
    with pytest.raises(ValueError):
        OrthonormalBasis([[1.0, 0.0], [1.0, 1.0]])


def test_basis_is_read_only():
    B = OrthonormalBasis(np.eye(3))
    with pytest.raises(ValueError):
        B.vectors[0, 0] = 2.0


def test_as_vector_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_vector([1.0, np.nan])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(0, 6),
       x=arrays(np.float64, 8, elements=st.floats(-1e3, 1e3)))
def test_projection_pythagoras_and_orthogonality(seed, m, x):
    basis = (sample_haar_orthonormal(8, m, seed) if m
             else OrthonormalBasis(np.empty((0, 8)), dim=8))
    p, q = project(basis, x), project_perp(basis, x)
    n2 = float(x @ x)
    assert abs(p @ q) <= 1e-9 * n2 + 1e-300
    assert abs(p @ p + q @ q - n2) <= 1e-9 * n2
    np.testing.assert_allclose(project(basis, p), p, atol=1e-10 * (1 + math.sqrt(n2)))


def test_unit_sphere_norm_and_d1():
    rng = np.random.default_rng(0)
    for d in (1, 2, 17, 5000):
        assert abs(np.linalg.norm(sample_unit_sphere(d, rng)) - 1.0) <= 1e-12
    signs = np.array([sample_unit_sphere(1, rng)[0] for _ in range(4000)])
    assert set(np.unique(signs)) == {-1.0, 1.0}
    assert abs(np.mean(signs > 0) - 0.5) < 4 * 0.5 / math.sqrt(4000)


def test_unit_sphere_angles_uniform_in_2d():
    rng = np.random.default_rng(11)
    pts = np.array([sample_unit_sphere(2, rng) for _ in range(100_000)])
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    counts, _ = np.histogram(ang, bins=36, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 0.01


def test_derive_seed_stable_and_distinct():
    # frozen values: changing the derivation breaks reproducibility of published runs
    assert derive_seed(0, 0, "instance") == 12201412001017785255
    assert derive_seed(42, 3, "algorithm") == 12720030114892260615
    seeds = {derive_seed(7, i, r) for i in range(50) for r in ("instance", "algorithm", "probe")}
    assert len(seeds) == 150
    assert derive_seed(5, 3, "instance") ^ derive_seed(0, 3, "instance") == 5
    with pytest.raises(ValueError):
        derive_seed(0, 0, "bogus")
