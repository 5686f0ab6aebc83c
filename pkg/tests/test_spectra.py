import logging
import math

import numpy as np
import pytest
import scipy.linalg

from opspec import corpus
from opspec.errors import (
    DomainError,
    InternalConsistencyError,
    NotAnEigenvectorError,
    PreconditionError,
)
from opspec.models import Interval, Verdict
from opspec.spectra import (
    counting,
    counting_grid,
    crossing_slopes,
    decomposition_check,
    dual_bound,
    eigencurve_derivative,
    resolvent_certify,
    spectrum_in,
    vm_certify,
    vm_search,
)

from conftest import BumpFamily

SPECTRAL_FAMILIES = [name for name, entry in corpus.CORPUS.items() if entry.has_spectrum]


def _spectrum(name):
    entry = corpus.CORPUS[name]
    return spectrum_in(entry.family(), entry.search_interval())


@pytest.mark.parametrize(
    "name, expected",
    [
        ("linear", [1.0, 2.0, 3.0]),
        ("linear-rotated", [1.0, 2.0, 3.0]),
        ("multiplicity", [1.0, 2.0, 2.0, 5.0]),
        ("multiplicity-rotated", [1.0, 2.0, 2.0, 5.0]),
        ("gap-linear", [-1.0, 2.0]),
        ("quadratic-scalar", [(math.sqrt(5.0) - 1.0) / 2.0]),
        ("remark-iii-4", [0.25, 1.0 / 3.0, 0.5, 1.0]),
        ("remark-i", []),
    ],
)
def test_known_spectra(name, expected):
    report = _spectrum(name)
    assert report.flat_eigenvalues() == pytest.approx(expected, abs=1e-9)
    assert report.total_multiplicity == len(expected)


def test_multiplicity_two_has_two_dimensional_kernel():
    report = _spectrum("multiplicity-rotated")
    index = [entry.multiplicity for entry in report.eigenvalues].index(2)
    kernel = report.basis(index)
    assert kernel.shape == (4, 2)
    assert np.allclose(kernel.T @ kernel, np.eye(2), atol=1e-10)


def test_quadratic_matches_companion_linearization():
    # lambda^2 x + lambda D x - K x = 0 as a 4 x 4 standard eigenproblem
    K = np.array([[5.0, 1.0], [1.0, 3.0]])
    D = np.diag([2.0, 1.0])
    companion = np.block([[np.zeros((2, 2)), np.eye(2)], [K, -D]])
    roots = scipy.linalg.eigvals(companion)
    real = np.sort([root.real for root in roots if abs(root.imag) < 1e-12 and 0.0 < root.real < 4.0])
    report = _spectrum("quadratic-2x2")
    assert report.flat_eigenvalues() == pytest.approx(list(real), abs=1e-9)
    for j, entry in enumerate(report.eigenvalues):
        x = report.basis(j)[:, 0]
        assert np.linalg.norm(corpus.builtin("quadratic-2x2").evaluate(entry.value) @ x) < 1e-8


def test_schur_matches_block_matrix():
    family = corpus.builtin("schur")
    blocks = scipy.linalg.eigvalsh(family.block_matrix())
    expected = [value for value in blocks if -1.0 < value < 3.0]
    assert len(expected) == 2
    assert _spectrum("schur").flat_eigenvalues() == pytest.approx(expected, abs=1e-9)


def test_bump_family_spectrum_and_monotonicity_check():
    family = BumpFamily(np.eye(2))
    report = spectrum_in(family, Interval.closed(-2.0, 0.0))
    assert [(entry.value, entry.multiplicity) for entry in report.eigenvalues] == [
        (pytest.approx(-1.0, abs=1e-9), 2)
    ]
    with pytest.raises(InternalConsistencyError):
        spectrum_in(family, Interval.closed(0.0, 2.0))


def test_interval_preconditions():
    family = corpus.builtin("linear")
    with pytest.raises(PreconditionError):
        spectrum_in(family, Interval.closed(1.0, 4.0))
    with pytest.raises(PreconditionError):
        spectrum_in(family, Interval.real_line())
    with pytest.raises(PreconditionError):
        spectrum_in(corpus.builtin("quadratic-2x2"), Interval.closed(-1.0, 1.0))


def test_counting_values():
    assert counting(corpus.remark_iii(4), 0.3).count == 1
    remark_i = corpus.builtin("remark-i")
    assert {counting(remark_i, lam).count for lam in np.linspace(-2.0, 2.0, 9)} == {3}
    probe = counting(corpus.builtin("linear"), 2.0)
    assert probe.boundary and probe.count == 1


@pytest.mark.parametrize("name", SPECTRAL_FAMILIES)
def test_counting_is_monotone(name):
    entry = corpus.CORPUS[name]
    counts = [probe.count for probe in counting_grid(entry.family(), entry.search_interval().grid(1024))]
    assert all(a <= b for a, b in zip(counts, counts[1:]))


def test_counting_grid_threads_keep_order():
    family = corpus.builtin("quadratic-2x2")
    grid = np.linspace(0.0, 4.0, 50)
    assert counting_grid(family, grid, workers=4) == counting_grid(family, grid, workers=1)


def test_crossing_slopes():
    linear = corpus.builtin("linear")
    slopes = crossing_slopes(linear, _spectrum("linear"))
    assert [slope.slope for slope in slopes] == pytest.approx([-1.0, -1.0, -1.0])

    schur = corpus.builtin("schur")
    slopes = crossing_slopes(schur, _spectrum("schur"))
    assert len(slopes) == 2
    assert all(slope.slope < -1.0 for slope in slopes)


def test_eigencurve_derivative_along_any_eigenvector():
    family = corpus.builtin("quadratic-2x2")
    values, vectors = np.linalg.eigh(family.evaluate(1.0))
    for k in range(2):
        slope = eigencurve_derivative(family, 1.0, vectors[:, k])
        x = vectors[:, k]
        assert slope == pytest.approx(float(x @ family.derivative(1.0) @ x))
    with pytest.raises(NotAnEigenvectorError):
        eigencurve_derivative(family, 1.0, vectors[:, 0] + vectors[:, 1])
    with pytest.raises(DomainError):
        eigencurve_derivative(family, 1.0, [0.0, 0.0])


def test_dual_bound_for_linear_pencil():
    bound, multiplier = dual_bound(np.diag([1.0, -1.0]), -np.eye(2), 0.5)
    assert bound == pytest.approx(-1.0)
    assert multiplier == 0.0


def test_vm_certified_for_linear_pencil():
    certificate = vm_certify(corpus.builtin("linear"), Interval.closed(0.0, 4.0), eps=1.0, delta=0.5)
    assert certificate.verdict is Verdict.CERTIFIED
    assert certificate.evidence["margins"]["slack"] >= 0.0
    assert certificate.evidence["grid_n"] == 33


def test_vm_refuted_where_derivative_vanishes():
    family = corpus.builtin("remark-i-scalar")
    eps, delta = 1e-2, 0.1
    certificate = vm_certify(family, Interval.closed(-0.5, 0.5), eps=eps, delta=delta)
    assert certificate.verdict is Verdict.REFUTED
    witness = certificate.evidence["witness"]
    assert np.linalg.norm(witness["vector"]) == pytest.approx(1.0)
    assert abs(witness["form"]) <= eps
    assert witness["derivative_form"] > -delta


def test_dual_bound_with_vanishing_derivative(caplog):
    with caplog.at_level(logging.DEBUG, logger="opspec.spectra"):
        bound, multiplier = dual_bound(-np.diag([1e-3, 0.5]), np.zeros((2, 2)), 5e-4)
    assert (bound, multiplier) == (0.0, 0.0)
    assert "vanishes" in caplog.text


def test_vm_below_the_smallest_entry_is_unknown_not_refuted():
    # No unit x has |x.Tx| <= eps anywhere, yet the dual bound is 0 where T' = 0
    family = corpus.builtin("remark-i-scalar")
    certificate = vm_certify(family, Interval.closed(-0.5, 0.5), eps=5e-4, delta=0.1)
    assert certificate.verdict is Verdict.UNKNOWN
    assert certificate.evidence["worst_lam"] == 0.0
    assert certificate.evidence["max_dual_bound"] == 0.0
    assert "vacuously" in corpus.CORPUS["remark-i-scalar"].description


def test_vm_rejects_non_positive_constants():
    with pytest.raises(PreconditionError):
        vm_certify(corpus.builtin("linear"), Interval.closed(0.0, 1.0), eps=0.0, delta=1.0)


def test_vm_search_finds_constants():
    certificate = vm_search(corpus.builtin("gap-linear"), Interval.closed(0.0, 1.0))
    assert certificate.certified
    assert certificate.evidence["eps"] == 1.0


def test_resolvent_certified_inside_gap():
    certificate = resolvent_certify(corpus.builtin("gap-linear"), 0.0, 1.0)
    assert certificate.verdict is Verdict.CERTIFIED
    assert certificate.evidence["a"] == pytest.approx(1.0)
    assert certificate.evidence["dim_M"] == 1
    assert certificate.evidence["cross_check"]["boundary"] is False


def test_resolvent_refuted_at_eigenvalue():
    certificate = resolvent_certify(corpus.builtin("linear"), 0.5, 1.0)
    assert certificate.verdict is Verdict.REFUTED
    assert np.abs(certificate.evidence["witness"]["vector"]) == pytest.approx([1.0, 0.0, 0.0], abs=1e-12)


def test_resolvent_unknown_when_hypothesis_fails():
    certificate = resolvent_certify(corpus.builtin("linear"), 0.5, 1.5)
    assert certificate.verdict is Verdict.UNKNOWN
    assert certificate.evidence["failed_step"] == "hypothesis"


def test_resolvent_without_vm_is_not_certified():
    certificate = resolvent_certify(corpus.builtin("remark-i"), -1.0, 0.0)
    assert certificate.evidence["dim_M"] == 0
    assert certificate.evidence["a"] == "+inf"
    assert certificate.verdict is Verdict.UNKNOWN
    assert certificate.evidence["failed_step"] == "vm"
    assert certificate.evidence["vm"]["verdict"] == "refuted"


def _resolvent_soundness(attempts, seed):
    rng = np.random.default_rng(seed)
    certified = 0
    for _ in range(attempts):
        name = SPECTRAL_FAMILIES[rng.integers(len(SPECTRAL_FAMILIES))]
        entry = corpus.CORPUS[name]
        family = entry.family()
        lo, hi = entry.interval
        mu1, mu2 = np.sort(rng.uniform(lo, hi, 2))
        certificate = resolvent_certify(family, float(mu1), float(mu2))
        if certificate.certified:
            certified += 1
            assert np.min(np.abs(np.linalg.eigvalsh(family.evaluate(mu2)))) > 1e-9
            assert counting(family, mu2).boundary is False
    return certified


def test_resolvent_certificates_are_sound():
    assert _resolvent_soundness(25, seed=1) > 0


@pytest.mark.slow
def test_resolvent_certificates_are_sound_at_scale():
    assert _resolvent_soundness(500, seed=2) >= 100


@pytest.mark.parametrize("name", SPECTRAL_FAMILIES + ["remark-i"])
def test_decomposition_over_search_interval(name):
    entry = corpus.CORPUS[name]
    lo, hi = entry.interval
    report = decomposition_check(entry.family(), lo, hi)
    assert report.passed
    assert sum(report.dims) == report.ambient_dim


@pytest.mark.parametrize(
    "name, alpha, beta, dims",
    [
        ("linear", 1.5, 2.5, (1, 1, 1)),
        ("linear-rotated", 1.5, 2.5, (1, 1, 1)),
        ("multiplicity-rotated", 1.5, 3.0, (1, 2, 1)),
        ("remark-iii-4", 0.3, 0.6, (1, 2, 1)),
    ],
)
def test_decomposition_interior_windows(name, alpha, beta, dims):
    report = decomposition_check(corpus.builtin(name), alpha, beta)
    assert report.dims == dims
    assert report.passed
