import json

import numpy as np
import pytest

from opspec import corpus
from opspec.errors import (
    DimensionError,
    DomainError,
    FamilyParseError,
    FamilyValidationError,
    PoleProximityError,
)
from opspec.families import (
    PiecewiseLinearDiagonal,
    Polynomial,
    SchurComplement,
    ShiftedLinear,
    parse_family,
    serialize_family,
    validate_A3,
    validate_A3_strict,
)
from opspec.models import Interval

from conftest import BumpFamily


def _central_difference(family, lam, h=1e-6):
    return (family.evaluate(lam + h) - family.evaluate(lam - h)) / (2 * h)


@pytest.mark.parametrize("name", ["linear", "quadratic-2x2", "schur", "remark-i"])
def test_derivative_matches_finite_differences(name):
    family = corpus.builtin(name)
    for lam in (0.3, 0.7, 1.9):
        assert np.allclose(family.derivative(lam), _central_difference(family, lam), atol=1e-6)


def test_polynomial_horner_evaluation():
    coeffs = [np.diag([1.0, 2.0]), np.diag([0.5, -1.0]), np.diag([-1.0, 3.0])]
    family = Polynomial(coeffs)
    lam = 1.7
    expected = coeffs[0] + lam * coeffs[1] + lam**2 * coeffs[2]
    assert np.allclose(family.evaluate(lam), expected)
    assert np.allclose(family.derivative(lam), coeffs[1] + 2 * lam * coeffs[2])


def test_schur_complement_formula_and_poles():
    family = corpus.builtin("schur")
    lam = 0.25
    A, B, D = family.A, family.B, family.D
    expected = A - lam * np.eye(2) - B @ np.linalg.inv(D - lam * np.eye(1)) @ B.T
    assert np.allclose(family.evaluate(lam), expected)
    assert family.block_matrix().shape == (3, 3)

    with pytest.raises(FamilyValidationError) as exc:
        SchurComplement(np.eye(2), [[1.0], [0.0]], [[1.0]], Interval.closed(0.0, 2.0))
    assert exc.value.pointer == "/domain"

    with pytest.raises(FamilyValidationError):
        SchurComplement(np.eye(2), [[1.0], [0.0]], [[1.0]], Interval.real_line())

    # Default domain is the half-line below the smallest pole
    half_line = SchurComplement([[0.0]], [[1.0]], [[2.0]])
    assert half_line.evaluate(0.0) == pytest.approx(np.array([[-0.5]]))
    assert half_line.domain.hi < 2.0
    with pytest.raises(PoleProximityError):
        half_line.evaluate(2.0)
    with pytest.raises(DomainError):
        half_line.evaluate(3.0)

    restored = parse_family(json.dumps({"kind": "schur", "blocks": {"A": [[0.0]], "B": [[1.0]], "D": [[2.0]]}}))
    assert restored.domain == half_line.domain


@pytest.mark.parametrize("pole", [0.3, 0.5, 1.0, 1.5, 2.0, 4.0, 5.0, 9.0, -3.0, 1e3])
def test_default_schur_domain_is_evaluable_up_to_its_end(pole):
    family = SchurComplement([[0.0]], [[1.0]], [[pole]])
    hi = family.domain.hi
    assert hi < pole
    assert np.all(np.isfinite(family.evaluate(hi)))
    assert np.all(np.isfinite(family.derivative(hi)))

    wider = SchurComplement(np.eye(2), [[1.0, 0.0], [0.5, 0.5]], np.diag([pole, pole + 1.0]))
    assert np.all(np.isfinite(wider.evaluate(wider.domain.hi)))

    document = {"kind": "schur", "blocks": {"A": [[0.0]], "B": [[1.0]], "D": [[pole]]}}
    restored = parse_family(json.dumps(document))
    assert restored.domain == family.domain
    assert parse_family(serialize_family(restored)) == restored


def test_piecewise_linear_entries_and_breakpoints():
    family = corpus.remark_iii(4)
    values = np.diag(family.evaluate(0.25))
    assert values == pytest.approx([0.75, 0.5, 0.25, 0.0])
    assert np.diag(family.derivative(0.1)) == pytest.approx([-1.0, -2.0, -3.0, -4.0])
    # Right-hand slope at a knot, zero slope past the last knot
    assert np.diag(family.derivative(0.5))[3] == 0.0
    assert 0.5 in family.breakpoints()
    assert family.is_breakpoint(2.0)

    with pytest.raises(FamilyValidationError):
        PiecewiseLinearDiagonal([[[0.0, -1.0], [1.0, 1.0]]])
    with pytest.raises(FamilyValidationError):
        PiecewiseLinearDiagonal([[[1.0, 1.0], [0.0, -1.0]]])


def test_evaluation_outside_domain():
    family = corpus.builtin("quadratic-2x2")
    with pytest.raises(DomainError):
        family.evaluate(-1.0)
    with pytest.raises(DomainError):
        family.form(-1.0, [1.0, 2.0])
    with pytest.raises(DimensionError):
        family.form(1.0, [1.0, 2.0, 3.0])


def test_evaluations_are_cached_copies():
    family = ShiftedLinear(np.diag([1.0, 2.0]))
    first = family.evaluate(0.5)
    first[0, 0] = 100.0
    assert family.evaluate(0.5)[0, 0] == 0.5
    assert family._cache.hits >= 1


def test_document_round_trip_is_stable():
    for name in corpus.names():
        family = corpus.builtin(name)
        text = serialize_family(family)
        again = parse_family(text)
        assert again == family
        assert serialize_family(again) == text
        assert again.digest() == family.digest()


def test_parse_errors_carry_pointers():
    with pytest.raises(FamilyParseError) as exc:
        parse_family("{not json")
    assert exc.value.exit_code == 2

    with pytest.raises(FamilyParseError) as exc:
        parse_family(json.dumps({"kind": "polynomial", "coeffs": [[[1.0]], "x"]}))
    assert exc.value.pointer.startswith("/coeffs/1")

    with pytest.raises(FamilyParseError) as exc:
        parse_family(json.dumps({"kind": "cubic", "A": [[1.0]]}))

    with pytest.raises(FamilyValidationError) as exc:
        parse_family(json.dumps({"kind": "shifted_linear", "A": [[1.0, 2.0], [0.0, 1.0]]}))
    assert exc.value.pointer == "/A"

    with pytest.raises(FamilyValidationError) as exc:
        parse_family(json.dumps({"kind": "polynomial", "coeffs": [[[1.0]], [[1.0, 0.0], [0.0, 1.0]]]}))
    assert exc.value.pointer == "/coeffs/1"


def test_infinite_domain_endpoints_round_trip():
    family = ShiftedLinear(np.eye(1))
    payload = json.loads(serialize_family(family))
    assert payload["domain"]["lo"] == "-inf"
    assert payload["domain"]["hi"] == "+inf"
    assert parse_family(serialize_family(family)).domain == family.domain


@pytest.mark.parametrize("name", corpus.names())
def test_corpus_families_satisfy_a3(name):
    family = corpus.builtin(name)
    report = validate_A3(family, sample_count=16, grid_n=256)
    assert report.passed, report.witnesses[:1]


def test_bump_family_violates_a3():
    family = BumpFamily(np.eye(2), Interval.closed(-2.0, 2.0))
    report = validate_A3(family, sample_count=4, grid_n=101)
    assert not report.passed
    witness = report.witnesses[0]
    assert witness.lam_negative < witness.lam_positive
    assert witness.form_negative < 0 < witness.form_positive


def test_strict_crossing_check():
    family = corpus.builtin("schur")
    report = validate_A3_strict(family, Interval.closed(-1.0, 3.0), sample_count=8, grid_n=128)
    assert report.passed
    assert len(report.strict_slopes) == 2
    assert all(entry.slope < -1.0 for entry in report.strict_slopes)


def test_breakpoints_are_flagged_in_validation():
    family = corpus.builtin("remark-iii-4")
    report = validate_A3(family, sample_count=8, grid_n=128, interval=Interval.closed(-0.5, 2.5))
    assert report.passed
    assert report.breakpoint_flags == [0.0, 0.5, 2.0 / 3.0, 1.0, 2.0]


def test_unknown_builtin_and_file_loading(tmp_path):
    with pytest.raises(FamilyParseError):
        corpus.load_family("builtin:nope")
    path = tmp_path / "family.json"
    path.write_bytes(serialize_family(corpus.builtin("linear")))
    assert corpus.load_family(path) == corpus.builtin("linear")
    with pytest.raises(FamilyParseError):
        corpus.load_family(tmp_path / "missing.json")
