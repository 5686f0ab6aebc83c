"""
Operator families lambda -> T(lambda).

Four kinds are supported, each an immutable ``OperatorFamily`` subclass:

- ``ShiftedLinear``: T(lambda) = A - lambda I
- ``Polynomial``: T(lambda) = sum_j lambda^j C_j
- ``SchurComplement``: T(lambda) = A - lambda I - B (D - lambda I)^-1 B^T
- ``PiecewiseLinearDiagonal``: diagonal entries interpolated from knot tables

Families also read and write the JSON family document (see
:func:`parse_family` / :func:`serialize_family`) and carry the (A3) sign
scan used by ``opspec validate``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from typing import Annotated, Any, ClassVar, Literal

import numpy as np
import scipy.linalg
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError

from .cache import EvaluationCache
from .config_loader import config
from .errors import (
    DimensionError,
    DomainError,
    FamilyParseError,
    FamilyValidationError,
    PoleProximityError,
)
from .linalg import asymmetry, eigh, eigvalsh, norm2, sym_matrix
from .models import A3Witness, Interval, Matrix, ValidationReport, matrix_rows

logger = logging.getLogger(__name__)


def _symmetric(entries: Any, pointer: str) -> np.ndarray:
    """Check symmetry to the configured tolerance, then symmetrize exactly."""
    try:
        matrix = sym_matrix(entries)
    except (DimensionError, DomainError) as exc:
        raise FamilyValidationError(exc.detail, pointer=pointer) from exc
    gap = asymmetry(np.asarray(entries, dtype=float))
    if gap > config.tolerances.symmetry:
        raise FamilyValidationError("matrix is not symmetric", pointer=pointer, asymmetry=gap)
    return matrix


def as_vector(x: Any, dim: int) -> np.ndarray:
    vector = np.asarray(x, dtype=float).reshape(-1)
    if vector.shape[0] != dim:
        raise DimensionError("vector length does not match the family", length=vector.shape[0], dim=dim)
    if not np.all(np.isfinite(vector)):
        raise DomainError("vector entries must be finite")
    return vector


# =========================================================================
# Family kinds
# =========================================================================


class OperatorFamily(ABC):
    """
    Base class for symmetric-matrix-valued functions on an interval.

    Subclasses implement ``_evaluate`` and ``_derivative``; the public
    methods check the domain and route through a per-instance LRU cache.
    """

    kind: ClassVar[str]

    def __init__(self, domain: Interval) -> None:
        self.domain = domain
        self._cache = EvaluationCache(max_entries=config.runtime.cache_max_entries)

    @property
    @abstractmethod
    def dim(self) -> int: ...

    @abstractmethod
    def _evaluate(self, lam: float) -> np.ndarray: ...

    @abstractmethod
    def _derivative(self, lam: float) -> np.ndarray: ...

    @abstractmethod
    def to_document(self) -> FamilyDocument: ...

    def spectral_radius_bound(self) -> float:
        """Radius used to clip infinite domain endpoints for numeric scans."""
        return config.grids.scan_radius

    def _check_point(self, lam: float) -> float:
        lam = float(lam)
        if not self.domain.contains(lam) or not math.isfinite(lam):
            raise DomainError("evaluation point outside the family domain", lam=lam)
        return lam

    def evaluate(self, lam: float) -> np.ndarray:
        """T(lambda) as a symmetric ``dim x dim`` array."""
        lam = self._check_point(lam)
        return self._cache.get_or_compute(("T", lam), lambda: self._evaluate(lam))

    def derivative(self, lam: float) -> np.ndarray:
        """T'(lambda) as a symmetric ``dim x dim`` array."""
        lam = self._check_point(lam)
        return self._cache.get_or_compute(("dT", lam), lambda: self._derivative(lam))

    def form(self, lam: float, x: Any) -> float:
        """Quadratic form x . T(lambda) x."""
        vector = as_vector(x, self.dim)
        return float(vector @ self.evaluate(lam) @ vector)

    def derivative_form(self, lam: float, x: Any) -> float:
        vector = as_vector(x, self.dim)
        return float(vector @ self.derivative(lam) @ vector)

    def breakpoints(self) -> list[float]:
        """Points where the derivative is only one-sided (none for smooth kinds)."""
        return []

    def scan_interval(self) -> Interval:
        """
        Finite interval inside the domain used by grid scans.

        Infinite endpoints are replaced by ``-R`` / ``+R`` with
        R = :meth:`spectral_radius_bound`; finite endpoints keep their
        openness flags.
        """
        radius = self.spectral_radius_bound()
        lo, lo_open = self.domain.lo, self.domain.lo_open
        hi, hi_open = self.domain.hi, self.domain.hi_open
        if not math.isfinite(lo):
            lo, lo_open = -radius, False
        if not math.isfinite(hi):
            hi, hi_open = radius, False
        if not lo < hi:
            raise DomainError("scan radius does not reach into the domain", radius=radius)
        return Interval(lo=lo, hi=hi, lo_open=lo_open, hi_open=hi_open)

    def digest(self) -> str:
        """SHA-256 of the compact serialized document."""
        return hashlib.sha256(serialize_family(self, indent=None)).hexdigest()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OperatorFamily):
            return NotImplemented
        return self.to_document() == other.to_document()

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim}, domain=[{self.domain.lo}, {self.domain.hi}])"


class ShiftedLinear(OperatorFamily):
    """T(lambda) = A - lambda I, the classical linear pencil."""

    kind = "shifted_linear"

    def __init__(self, A: Any, domain: Interval | None = None) -> None:
        super().__init__(domain or Interval.real_line())
        self.A = _symmetric(A, "/A")
        self.A.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def spectral_radius_bound(self) -> float:
        return norm2(self.A) + 1.0

    def _evaluate(self, lam: float) -> np.ndarray:
        return self.A - lam * np.eye(self.dim)

    def _derivative(self, lam: float) -> np.ndarray:
        return -np.eye(self.dim)

    def to_document(self) -> ShiftedLinearDocument:
        return ShiftedLinearDocument(domain=self.domain, A=matrix_rows(self.A))


class Polynomial(OperatorFamily):
    """T(lambda) = C_0 + lambda C_1 + ... + lambda^m C_m."""

    kind = "polynomial"

    def __init__(self, coeffs: Sequence[Any], domain: Interval | None = None) -> None:
        super().__init__(domain or Interval.real_line())
        if len(coeffs) == 0:
            raise FamilyValidationError("at least one coefficient is required", pointer="/coeffs")
        matrices = [_symmetric(c, f"/coeffs/{j}") for j, c in enumerate(coeffs)]
        dim = matrices[0].shape[0]
        for j, matrix in enumerate(matrices):
            if matrix.shape[0] != dim:
                raise FamilyValidationError(
                    "coefficients must share one dimension", pointer=f"/coeffs/{j}"
                )
            matrix.setflags(write=False)
        self.coeffs = tuple(matrices)

    @property
    def dim(self) -> int:
        return self.coeffs[0].shape[0]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def spectral_radius_bound(self) -> float:
        # Cauchy bound 1 + ||C_m^-1|| max_j ||C_j||, padded by one
        leading = self.coeffs[-1]
        if self.degree >= 1:
            smallest = float(np.min(np.abs(eigvalsh(leading))))
            if smallest > config.tolerances.kernel_rel * (1.0 + norm2(leading)):
                ratio = max(norm2(c) for c in self.coeffs[:-1]) / smallest
                return 2.0 + ratio
        return config.grids.scan_radius

    def _evaluate(self, lam: float) -> np.ndarray:
        value = np.array(self.coeffs[-1], copy=True)
        for coeff in reversed(self.coeffs[:-1]):
            value = value * lam + coeff
        return value

    def _derivative(self, lam: float) -> np.ndarray:
        if self.degree == 0:
            return np.zeros((self.dim, self.dim))
        value = self.degree * np.array(self.coeffs[-1], copy=True)
        for j in range(self.degree - 1, 0, -1):
            value = value * lam + j * self.coeffs[j]
        return value

    def to_document(self) -> PolynomialDocument:
        return PolynomialDocument(domain=self.domain, coeffs=[matrix_rows(c) for c in self.coeffs])


class SchurComplement(OperatorFamily):
    """
    T(lambda) = A - lambda I - B (D - lambda I)^-1 B^T.

    The domain must stay away from the poles sigma(D) by at least
    ``domain_margin_rel * (1 + ||D||)``. Without an explicit domain the
    family lives on (-inf, min sigma(D) - 2 * margin]; the extra margin keeps
    the endpoint clear of the pole check after rounding.
    """

    kind = "schur"

    def __init__(self, A: Any, B: Any, D: Any, domain: Interval | None = None) -> None:
        self.A = _symmetric(A, "/blocks/A")
        self.D = _symmetric(D, "/blocks/D")
        self.poles = eigvalsh(self.D)
        self.margin = config.tolerances.domain_margin_rel * (1.0 + norm2(self.D))
        if domain is None:
            domain = Interval(lo=-math.inf, hi=float(self.poles[0]) - 2.0 * self.margin, lo_open=True)
        super().__init__(domain)
        try:
            self.B = np.array(B, dtype=float, ndmin=2)
        except ValueError as exc:
            raise FamilyValidationError("matrix rows have unequal lengths", pointer="/blocks/B") from exc
        if self.B.shape != (self.A.shape[0], self.D.shape[0]):
            raise FamilyValidationError(
                "B must be dim(A) x dim(D)",
                pointer="/blocks/B",
                shape=self.B.shape,
            )
        if not np.all(np.isfinite(self.B)):
            raise FamilyValidationError("matrix entries must be finite", pointer="/blocks/B")
        for matrix in (self.A, self.B, self.D):
            matrix.setflags(write=False)
        for pole in self.poles:
            if self._pole_distance(float(pole)) < self.margin:
                raise FamilyValidationError(
                    "domain must stay away from the spectrum of D",
                    pointer="/domain",
                    pole=float(pole),
                    margin=self.margin,
                )

    def _pole_distance(self, pole: float) -> float:
        if self.domain.lo <= pole <= self.domain.hi:
            return 0.0
        return min(abs(pole - self.domain.lo), abs(pole - self.domain.hi))

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def spectral_radius_bound(self) -> float:
        return norm2(self.block_matrix()) + 1.0

    def block_matrix(self) -> np.ndarray:
        """The symmetric block matrix [[A, B], [B^T, D]]."""
        return np.block([[self.A, self.B], [self.B.T, self.D]])

    def _check_point(self, lam: float) -> float:
        if math.isfinite(lam) and float(np.min(np.abs(self.poles - lam))) < self.margin:
            raise PoleProximityError("evaluation point too close to a pole", lam=float(lam))
        return super()._check_point(lam)

    def _resolved(self, lam: float) -> np.ndarray:
        """(D - lambda I)^-1 B^T."""
        shifted = self.D - lam * np.eye(self.D.shape[0])
        return scipy.linalg.solve(shifted, self.B.T, assume_a="sym")

    def _evaluate(self, lam: float) -> np.ndarray:
        value = self.A - lam * np.eye(self.dim) - self.B @ self._resolved(lam)
        return 0.5 * (value + value.T)

    def _derivative(self, lam: float) -> np.ndarray:
        resolved = self._resolved(lam)
        return -np.eye(self.dim) - resolved.T @ resolved

    def to_document(self) -> SchurDocument:
        return SchurDocument(
            domain=self.domain,
            blocks=SchurBlocks(A=matrix_rows(self.A), B=matrix_rows(self.B), D=matrix_rows(self.D)),
        )


class PiecewiseLinearDiagonal(OperatorFamily):
    """
    Diagonal family whose entries interpolate ``(lambda, value)`` knot tables.

    Entries are constant outside their knot range. Values must be
    non-increasing along each table. At a knot the derivative is the
    right-hand slope.
    """

    kind = "pwl_diag"

    def __init__(self, entries: Sequence[Sequence[Sequence[float]]], domain: Interval | None = None) -> None:
        super().__init__(domain or Interval.real_line())
        if len(entries) == 0:
            raise FamilyValidationError("at least one diagonal entry is required", pointer="/entries")
        tables: list[tuple[np.ndarray, np.ndarray]] = []
        for i, knots in enumerate(entries):
            pointer = f"/entries/{i}/knots"
            try:
                array = np.asarray(knots, dtype=float)
            except ValueError as exc:
                raise FamilyValidationError("knots must be (lambda, value) pairs", pointer=pointer) from exc
            if array.ndim != 2 or array.shape[1] != 2 or array.shape[0] == 0:
                raise FamilyValidationError("knots must be (lambda, value) pairs", pointer=pointer)
            if not np.all(np.isfinite(array)):
                raise FamilyValidationError("knot values must be finite", pointer=pointer)
            xs, ys = array[:, 0].copy(), array[:, 1].copy()
            if np.any(np.diff(xs) <= 0):
                raise FamilyValidationError("knot positions must increase strictly", pointer=pointer)
            if np.any(np.diff(ys) > 0):
                raise FamilyValidationError("entry values must be non-increasing", pointer=pointer)
            xs.setflags(write=False)
            ys.setflags(write=False)
            tables.append((xs, ys))
        self.tables = tuple(tables)

    @property
    def dim(self) -> int:
        return len(self.tables)

    def spectral_radius_bound(self) -> float:
        return max(float(np.max(np.abs(xs))) for xs, _ in self.tables) + 1.0

    def breakpoints(self) -> list[float]:
        return sorted({float(x) for xs, _ in self.tables for x in xs})

    def _evaluate(self, lam: float) -> np.ndarray:
        return np.diag([np.interp(lam, xs, ys) for xs, ys in self.tables])

    def _derivative(self, lam: float) -> np.ndarray:
        slopes = []
        for xs, ys in self.tables:
            segment = int(np.searchsorted(xs, lam, side="right")) - 1
            if segment < 0 or segment >= len(xs) - 1:
                slopes.append(0.0)
            else:
                slopes.append((ys[segment + 1] - ys[segment]) / (xs[segment + 1] - xs[segment]))
        if self.is_breakpoint(lam):
            logger.debug("Derivative at breakpoint %s uses the right-hand slope", lam)
        return np.diag(slopes)

    def is_breakpoint(self, lam: float) -> bool:
        return any(abs(lam - x) <= 1e-12 * (1.0 + abs(x)) for xs, _ in self.tables for x in xs)

    def to_document(self) -> PiecewiseLinearDocument:
        return PiecewiseLinearDocument(
            domain=self.domain,
            entries=[
                PiecewiseEntry(knots=[[float(x), float(y)] for x, y in zip(xs, ys, strict=True)])
                for xs, ys in self.tables
            ],
        )


# =========================================================================
# Family documents
# =========================================================================


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid")

    domain: Interval = Field(default_factory=Interval.real_line)


class ShiftedLinearDocument(_Document):
    kind: Literal["shifted_linear"] = "shifted_linear"
    A: Matrix


class PolynomialDocument(_Document):
    kind: Literal["polynomial"] = "polynomial"
    coeffs: list[Matrix] = Field(min_length=1)


class SchurBlocks(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A: Matrix
    B: Matrix
    D: Matrix


class SchurDocument(_Document):
    kind: Literal["schur"] = "schur"
    # None selects the half-line below the smallest pole
    domain: Interval | None = None
    blocks: SchurBlocks


class PiecewiseEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    knots: list[list[float]] = Field(min_length=1)


class PiecewiseLinearDocument(_Document):
    kind: Literal["pwl_diag"] = "pwl_diag"
    entries: list[PiecewiseEntry] = Field(min_length=1)


FamilyDocument = Annotated[
    ShiftedLinearDocument | PolynomialDocument | SchurDocument | PiecewiseLinearDocument,
    Field(discriminator="kind"),
]

_document_adapter: TypeAdapter[FamilyDocument] = TypeAdapter(FamilyDocument)
_KINDS = {"shifted_linear", "polynomial", "schur", "pwl_diag"}


def _pointer(loc: Sequence[int | str]) -> str:
    parts = list(loc)
    # Discriminated unions prefix the location with the tag
    if parts and parts[0] in _KINDS:
        parts = parts[1:]
    return "".join(f"/{part}" for part in parts)


def family_from_document(doc: FamilyDocument) -> OperatorFamily:
    if isinstance(doc, ShiftedLinearDocument):
        return ShiftedLinear(doc.A, doc.domain)
    if isinstance(doc, PolynomialDocument):
        return Polynomial(doc.coeffs, doc.domain)
    if isinstance(doc, SchurDocument):
        return SchurComplement(doc.blocks.A, doc.blocks.B, doc.blocks.D, doc.domain)
    return PiecewiseLinearDiagonal([entry.knots for entry in doc.entries], doc.domain)


def parse_family(text: bytes | str) -> OperatorFamily:
    """
    Parse a UTF-8 JSON family document.

    Raises:
        FamilyParseError: Malformed JSON or schema violation (with JSON pointer)
        FamilyValidationError: Asymmetric, non-square or otherwise inadmissible payload
    """
    try:
        doc = _document_adapter.validate_json(text)
    except ValidationError as exc:
        first = exc.errors()[0]
        pointer = _pointer(first["loc"])
        raise FamilyParseError(f"invalid family document: {first['msg']}", pointer=pointer) from exc
    family = family_from_document(doc)
    logger.debug("Parsed %r", family)
    return family


def serialize_family(family: OperatorFamily, indent: int | None = 2) -> bytes:
    """Deterministic JSON encoding (sorted keys) of a family document."""
    payload = family.to_document().model_dump(mode="json")
    separators = (",", ":") if indent is None else (",", ": ")
    return json.dumps(payload, sort_keys=True, indent=indent, separators=separators).encode("utf-8")


# =========================================================================
# (A3) validation
# =========================================================================


def _probe_vectors(family: OperatorFamily, interval: Interval, count: int, seed: int) -> np.ndarray:
    """Unit columns: random directions, coordinate axes and eigenvectors of T'(mid)."""
    dim = family.dim
    rng = np.random.default_rng(seed)
    random = rng.standard_normal((dim, count))
    random /= np.linalg.norm(random, axis=0)
    hull = interval.closed_inside()
    _, slope_vectors = eigh(family.derivative(0.5 * (hull.lo + hull.hi)))
    return np.hstack([random, np.eye(dim), slope_vectors.cols])


def validate_A3(
    family: OperatorFamily,
    sample_count: int | None = None,
    seed: int | None = None,
    interval: Interval | None = None,
    grid_n: int | None = None,
    max_witnesses: int = 16,
) -> ValidationReport:
    """
    Grid scan of the (A3) crossing condition.

    For every probe vector x, the form lambda -> x.T(lambda)x must not turn
    positive again after being negative. Unbounded domains are clipped to
    :meth:`OperatorFamily.scan_interval`.
    """
    sample_count = config.sampling.a3_samples if sample_count is None else sample_count
    seed = config.seed if seed is None else seed
    grid_n = config.grids.a3 if grid_n is None else grid_n
    if interval is None:
        interval = family.domain if family.domain.is_bounded else family.scan_interval()

    grid = interval.grid(grid_n)
    vectors = _probe_vectors(family, interval, sample_count, seed)
    forms = np.empty((grid.size, vectors.shape[1]))
    scale = 0.0
    for i, lam in enumerate(grid):
        value = family.evaluate(lam)
        forms[i] = np.sum(vectors * (value @ vectors), axis=0)
        scale = max(scale, norm2(value))
    band = config.tolerances.at_band_rel * (1.0 + scale)

    witnesses: list[A3Witness] = []
    for j in range(vectors.shape[1]):
        column = forms[:, j]
        negative = np.flatnonzero(column < -band)
        if negative.size == 0:
            continue
        start = negative[0]
        later = np.flatnonzero(column[start:] > band)
        if later.size == 0:
            continue
        end = start + later[0]
        witnesses.append(
            A3Witness(
                vector=vectors[:, j].tolist(),
                lam_negative=float(grid[start]),
                lam_positive=float(grid[end]),
                form_negative=float(column[start]),
                form_positive=float(column[end]),
            )
        )
        if len(witnesses) >= max_witnesses:
            break

    flags = [b for b in family.breakpoints() if interval.contains(b)]
    report = ValidationReport(
        interval=interval,
        grid_n=grid_n,
        sample_count=vectors.shape[1],
        passed=not witnesses,
        witnesses=witnesses,
        breakpoint_flags=flags,
    )
    if report.passed:
        logger.info("(A3) scan passed on [%s, %s] with %d probes", interval.lo, interval.hi, report.sample_count)
    else:
        logger.warning("(A3) scan found %d violating vectors", len(witnesses))
    return report


def validate_A3_strict(family: OperatorFamily, interval: Interval, **kwargs: Any) -> ValidationReport:
    """
    Grid scan plus the strict crossing check.

    Every eigencurve through a located eigenvalue must cross zero with
    strictly negative slope t'(lambda_j)[u] < 0.
    """
    from .spectra import crossing_slopes, spectrum_in

    report = validate_A3(family, interval=interval, **kwargs)
    slopes = crossing_slopes(family, spectrum_in(family, interval))
    strict_ok = all(entry.slope < -config.tolerances.at_band_rel for entry in slopes)
    if not strict_ok:
        logger.warning("Strict crossing check failed: non-negative eigencurve slope found")
    return report.model_copy(update={"strict_slopes": slopes, "passed": report.passed and strict_ok})


__all__ = [
    "OperatorFamily",
    "ShiftedLinear",
    "Polynomial",
    "SchurComplement",
    "PiecewiseLinearDiagonal",
    "FamilyDocument",
    "ShiftedLinearDocument",
    "PolynomialDocument",
    "SchurDocument",
    "SchurBlocks",
    "PiecewiseEntry",
    "PiecewiseLinearDocument",
    "as_vector",
    "family_from_document",
    "parse_family",
    "serialize_family",
    "validate_A3",
    "validate_A3_strict",
]
