import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spectrum_matrix
from opspec.errors import (
    AmbiguousWindowError,
    ContainmentError,
    DimensionError,
    DomainError,
    RankDeficiencyError,
)
from opspec.linalg import (
    SubspaceBasis,
    complement_within,
    compress,
    direct_sum_defect,
    eigh,
    eigvalsh,
    haar_orthogonal,
    inertia,
    lambda_min,
    spectral_basis,
    sym_matrix,
)
from opspec.models import Interval

small_ints = st.integers(min_value=-6, max_value=6)


@st.composite
def symmetric_matrices(draw, max_dim=6):
    dim = draw(st.integers(min_value=1, max_value=max_dim))
    raw = draw(arrays(np.float64, (dim, dim), elements=small_ints.map(float)))
    return raw + raw.T


def test_sym_matrix_validates_shape_and_values():
    with pytest.raises(DimensionError):
        sym_matrix([[1.0, 2.0]])
    with pytest.raises(DimensionError):
        sym_matrix([[1.0, 2.0], [3.0]])
    with pytest.raises(DomainError):
        sym_matrix([[math.nan]])
    result = sym_matrix([[1.0, 2.0], [4.0, 1.0]])
    assert np.array_equal(result, result.T)
    assert result[0, 1] == 3.0


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices())
def test_eigh_reconstructs_and_normalizes_signs(matrix):
    values, vectors = eigh(matrix)
    q = vectors.cols
    assert np.all(np.diff(values) >= 0)
    assert np.allclose(q.T @ q, np.eye(q.shape[1]), atol=1e-10)
    assert np.allclose((q * values) @ q.T, matrix, atol=1e-9 * (1 + np.abs(matrix).max()))
    pivots = np.argmax(np.abs(q), axis=0)
    assert np.all(q[pivots, np.arange(q.shape[1])] > 0)


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices())
def test_inertia_adds_up_to_dimension(matrix):
    counts = inertia(matrix)
    values = eigvalsh(matrix)
    assert counts.dim == matrix.shape[0]
    tol = 1e-8 * (1 + np.abs(values).max())
    assert counts.n_minus == np.count_nonzero(values < -tol)
    assert counts.n_plus == np.count_nonzero(values > tol)


@settings(max_examples=60, deadline=None)
@given(symmetric_matrices(), st.integers(min_value=0, max_value=2**32 - 1))
def test_compression_matches_quadratic_form(matrix, seed):
    rng = np.random.default_rng(seed)
    dim = matrix.shape[0]
    k = int(rng.integers(1, dim + 1))
    basis = SubspaceBasis(rng.standard_normal((dim, k)))
    compressed = compress(matrix, basis)
    y = rng.standard_normal(k)
    x = basis.orthonormal() @ y
    assert math.isclose(y @ compressed @ y, x @ matrix @ x, rel_tol=1e-9, abs_tol=1e-9)
    # Interlacing: the compressed spectrum sits inside the global one
    outer = np.linalg.eigvalsh(matrix)
    tol = 1e-9 * (1 + np.abs(matrix).max())
    assert lambda_min(compressed) >= outer[0] - tol
    assert eigvalsh(compressed)[-1] <= outer[-1] + tol


def test_lambda_min_of_empty_matrix_is_infinite():
    assert lambda_min(np.zeros((0, 0))) == math.inf


def test_spectral_basis_closed_and_open_windows():
    matrix = np.diag([-2.0, 0.0, 1e-12, 3.0])
    nonneg = spectral_basis(matrix, Interval(lo=0.0, hi=math.inf, hi_open=True))
    assert nonneg.dim == 3
    with pytest.raises(AmbiguousWindowError):
        spectral_basis(matrix, Interval(lo=0.0, hi=math.inf, lo_open=True, hi_open=True))
    negative = spectral_basis(matrix, Interval(lo=-math.inf, hi=-1.0, lo_open=True, hi_open=True))
    assert negative.dim == 1
    assert np.allclose(np.abs(negative.cols[:, 0]), [1.0, 0.0, 0.0, 0.0])


def test_subspace_basis_rejects_dependent_columns():
    with pytest.raises(RankDeficiencyError):
        SubspaceBasis(np.array([[1.0, 2.0], [1.0, 2.0]]))
    with pytest.raises(RankDeficiencyError):
        SubspaceBasis(np.ones((2, 3)))
    assert SubspaceBasis.empty(3).dim == 0


def test_subspace_basis_is_read_only():
    basis = SubspaceBasis.identity(2)
    with pytest.raises(ValueError):
        basis.cols[0, 0] = 5.0


def test_complement_within(rng):
    outer = SubspaceBasis(rng.standard_normal((5, 3)))
    inner = SubspaceBasis(outer.cols[:, :1] + 2.0 * outer.cols[:, 1:2])
    rest = complement_within(outer, inner)
    assert rest.dim == 2
    assert outer.contains(rest)
    assert np.allclose(rest.orthonormal().T @ inner.orthonormal(), 0.0, atol=1e-12)

    with pytest.raises(ContainmentError):
        complement_within(outer, SubspaceBasis(rng.standard_normal((5, 1))))
    assert complement_within(outer, outer).dim == 0


def test_direct_sum_defect(rng):
    q = haar_orthogonal(rng, 4)
    blocks = [SubspaceBasis(q[:, :1]), SubspaceBasis(q[:, 1:3]), SubspaceBasis(q[:, 3:])]
    assert direct_sum_defect(blocks) == pytest.approx(1.0)

    skew = SubspaceBasis(np.column_stack([q[:, 0] + 1e-6 * q[:, 3], q[:, 1]]))
    defect = direct_sum_defect([SubspaceBasis(q[:, :1]), skew, SubspaceBasis(q[:, 2:3])])
    assert defect < 1e-5

    with pytest.raises(DimensionError):
        direct_sum_defect([SubspaceBasis(q[:, :2])])


def test_haar_orthogonal_is_orthogonal_and_seeded():
    first = haar_orthogonal(np.random.default_rng(3), 6)
    second = haar_orthogonal(np.random.default_rng(3), 6)
    assert np.array_equal(first, second)
    assert np.allclose(first.T @ first, np.eye(6), atol=1e-12)


def test_eigh_recovers_prescribed_spectrum(rng):
    for _ in range(10):
        values = np.sort(rng.uniform(-3, 3, 6))
        matrix = random_spectrum_matrix(rng, values)
        computed, _ = eigh(matrix)
        assert np.allclose(computed, values, atol=1e-10)


@st.composite
def inertia_cases(draw):
    counts = tuple(draw(st.integers(min_value=0, max_value=3)) for _ in range(3))
    assume(sum(counts) > 0)
    return counts, draw(st.integers(min_value=0, max_value=2**32 - 1))


@settings(max_examples=60, deadline=None)
@given(inertia_cases())
def test_inertia_survives_congruence(case):
    (n_minus, n_zero, n_plus), seed = case
    rng = np.random.default_rng(seed)
    values = np.concatenate(
        [rng.uniform(-5.0, -0.5, n_minus), np.zeros(n_zero), rng.uniform(0.5, 5.0, n_plus)]
    )
    matrix = random_spectrum_matrix(rng, values)
    dim = values.size
    P = haar_orthogonal(rng, dim) @ np.diag(rng.uniform(1.0, 30.0, dim)) @ haar_orthogonal(rng, dim)
    assert np.linalg.cond(P) < 1e3
    for candidate in (matrix, P.T @ matrix @ P):
        counts = inertia(candidate)
        assert (counts.n_minus, counts.n_zero, counts.n_plus) == (n_minus, n_zero, n_plus)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=4),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_direct_sum_defect_ignores_the_choice_of_basis(sizes, seed):
    rng = np.random.default_rng(seed)
    dim = sum(sizes)
    columns = np.split(rng.standard_normal((dim, dim)), np.cumsum(sizes)[:-1], axis=1)
    blocks = [SubspaceBasis(block) for block in columns]
    rotated = [SubspaceBasis(block @ haar_orthogonal(rng, block.shape[1])) for block in columns]
    assert abs(direct_sum_defect(blocks) - direct_sum_defect(rotated)) <= 1e-10
