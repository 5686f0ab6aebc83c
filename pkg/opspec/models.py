"""
Pydantic models shared across opspec.

This module contains the value types that cross module boundaries
(intervals, extended reals, inertia triples), the run configuration
schema, and every payload that ends up in a JSON report: spectrum
reports, certificates, variation results and gap certificates.

Matrices inside report models are stored as row-major nested lists so
that ``model_dump(mode="json")`` is byte-stable; helpers convert them back
to numpy arrays where the numerics need them.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Annotated, Any, Literal

import numpy as np
from pydantic import (
    AfterValidator,
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    NonNegativeFloat,
    PlainSerializer,
    PositiveFloat,
    model_validator,
)

SCHEMA_VERSION = "v1"


def _parse_extended(value: Any) -> Any:
    if isinstance(value, str):
        token = value.strip().lower()
        if token in {"-inf", "-infinity"}:
            return -math.inf
        if token in {"inf", "+inf", "infinity", "+infinity"}:
            return math.inf
    return value


def _reject_nan(value: float) -> float:
    if math.isnan(value):
        raise ValueError("NaN is not an admissible extended real")
    return value


def _dump_extended(value: float) -> float | str:
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return value


# Real number or +-inf; infinities travel through JSON as "+inf"/"-inf".
ExtFloat = Annotated[
    float,
    BeforeValidator(_parse_extended),
    AfterValidator(_reject_nan),
    PlainSerializer(_dump_extended, when_used="json"),
]

Matrix = list[list[float]]


def matrix_rows(array: np.ndarray) -> Matrix:
    """Row-major nested list of a 2-D array (empty rows are kept)."""
    return np.asarray(array, dtype=float).tolist()


def rows_matrix(rows: Matrix, ambient_dim: int) -> np.ndarray:
    """Inverse of :func:`matrix_rows`, robust to ``d x 0`` matrices."""
    array = np.asarray(rows, dtype=float)
    if array.size == 0:
        return np.zeros((ambient_dim, 0))
    return array.reshape(ambient_dim, -1)


# =========================================================================
# Intervals and extended reals
# =========================================================================


class Interval(BaseModel):
    """Real interval with extended-real endpoints and openness flags."""

    model_config = ConfigDict(frozen=True)

    lo: ExtFloat
    hi: ExtFloat
    lo_open: bool = False
    hi_open: bool = False

    @model_validator(mode="after")
    def _check_order(self) -> Interval:
        if not self.lo < self.hi:
            raise ValueError(f"interval requires lo < hi, got lo={self.lo}, hi={self.hi}")
        return self

    @classmethod
    def closed(cls, lo: float, hi: float) -> Interval:
        return cls(lo=lo, hi=hi)

    @classmethod
    def open(cls, lo: float, hi: float) -> Interval:
        return cls(lo=lo, hi=hi, lo_open=True, hi_open=True)

    @classmethod
    def real_line(cls) -> Interval:
        return cls(lo=-math.inf, hi=math.inf, lo_open=True, hi_open=True)

    @property
    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        if not self.is_bounded:
            raise ValueError("midpoint of an unbounded interval")
        return 0.5 * (self.lo + self.hi)

    def contains(self, lam: float) -> bool:
        if math.isnan(lam):
            return False
        above_lo = lam > self.lo if self.lo_open else lam >= self.lo
        below_hi = lam < self.hi if self.hi_open else lam <= self.hi
        return above_lo and below_hi

    def contains_interval(self, other: Interval) -> bool:
        lo_ok = other.lo > self.lo or (
            other.lo == self.lo and (other.lo_open or not self.lo_open)
        )
        hi_ok = other.hi < self.hi or (
            other.hi == self.hi and (other.hi_open or not self.hi_open)
        )
        return lo_ok and hi_ok

    def intersect(self, other: Interval) -> Interval | None:
        """Intersection of two intervals, or None when it is empty."""
        if self.lo > other.lo or (self.lo == other.lo and self.lo_open):
            lo, lo_open = self.lo, self.lo_open
        else:
            lo, lo_open = other.lo, other.lo_open
        if self.hi < other.hi or (self.hi == other.hi and self.hi_open):
            hi, hi_open = self.hi, self.hi_open
        else:
            hi, hi_open = other.hi, other.hi_open
        if not lo < hi:
            return None
        return Interval(lo=lo, hi=hi, lo_open=lo_open, hi_open=hi_open)

    def closed_inside(self, rel: float = 1e-9) -> Interval:
        """
        Closed bounded interval obtained by pulling open finite endpoints inward.

        The pull is ``rel * (1 + |endpoint|)`` so evaluation never touches an
        excluded endpoint.
        """
        if not self.is_bounded:
            raise ValueError("closed_inside requires a bounded interval")
        lo = self.lo + rel * (1.0 + abs(self.lo)) if self.lo_open else self.lo
        hi = self.hi - rel * (1.0 + abs(self.hi)) if self.hi_open else self.hi
        return Interval.closed(lo, hi)

    def grid(self, n: int) -> np.ndarray:
        """Uniform grid of ``n`` points on the closed hull (open endpoints pulled inward)."""
        if n < 2:
            raise ValueError("grid needs at least two points")
        hull = self.closed_inside()
        return np.linspace(hull.lo, hull.hi, n)


class ExtendedRealTag(str, Enum):
    FINITE = "finite"
    NEG_INF = "neg_inf"
    POS_INF = "pos_inf"


class ExtendedReal(BaseModel):
    """
    Value of the generalised Rayleigh functional: a real number or a +-inf sentinel.

    ``clipped`` marks sentinels produced because the scan window was narrower
    than the domain; ``at_boundary`` marks a zero reported at an excluded
    endpoint. Neither flag takes part in ordering or equality.
    """

    model_config = ConfigDict(frozen=True)

    tag: ExtendedRealTag
    value: float | None = None
    clipped: bool = False
    at_boundary: bool = False

    @model_validator(mode="after")
    def _check_value(self) -> ExtendedReal:
        if self.tag is ExtendedRealTag.FINITE:
            if self.value is None or not math.isfinite(self.value):
                raise ValueError("finite extended real needs a finite value")
        elif self.value is not None:
            raise ValueError("infinite sentinels carry no value")
        return self

    @classmethod
    def finite(cls, value: float, **flags: bool) -> ExtendedReal:
        return cls(tag=ExtendedRealTag.FINITE, value=float(value), **flags)

    @classmethod
    def neg_inf(cls, **flags: bool) -> ExtendedReal:
        return cls(tag=ExtendedRealTag.NEG_INF, **flags)

    @classmethod
    def pos_inf(cls, **flags: bool) -> ExtendedReal:
        return cls(tag=ExtendedRealTag.POS_INF, **flags)

    @property
    def is_finite(self) -> bool:
        return self.tag is ExtendedRealTag.FINITE

    def as_float(self) -> float:
        if self.tag is ExtendedRealTag.NEG_INF:
            return -math.inf
        if self.tag is ExtendedRealTag.POS_INF:
            return math.inf
        return float(self.value)  # type: ignore[arg-type]

    def _key(self) -> float:
        return self.as_float()

    @staticmethod
    def _other_key(other: Any) -> float:
        if isinstance(other, ExtendedReal):
            return other._key()
        if isinstance(other, int | float | np.floating | np.integer):
            return float(other)
        return NotImplemented  # type: ignore[return-value]

    def __eq__(self, other: object) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() == key

    def __hash__(self) -> int:
        return hash(self._key())

    def __lt__(self, other: Any) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() < key

    def __le__(self, other: Any) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() <= key

    def __gt__(self, other: Any) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() > key

    def __ge__(self, other: Any) -> bool:
        key = self._other_key(other)
        if key is NotImplemented:
            return NotImplemented
        return self._key() >= key

    def __repr__(self) -> str:
        if self.is_finite:
            return f"ExtendedReal({self.value!r})"
        return f"ExtendedReal({self.tag.value})"


class Inertia(BaseModel):
    """Counts of negative, (numerically) zero and positive eigenvalues."""

    model_config = ConfigDict(frozen=True)

    n_minus: int = Field(ge=0)
    n_zero: int = Field(ge=0)
    n_plus: int = Field(ge=0)

    @property
    def dim(self) -> int:
        return self.n_minus + self.n_zero + self.n_plus


# =========================================================================
# Run configuration
# =========================================================================


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Tolerances(_Section):
    kernel_rel: PositiveFloat = 1e-8
    rank: PositiveFloat = 1e-10
    bisection_rel: PositiveFloat = 1e-12
    at_band_rel: PositiveFloat = 1e-9
    domain_margin_rel: PositiveFloat = 1e-6
    contraction_slack: PositiveFloat = 1e-12
    symmetry: PositiveFloat = 1e-12
    decomposition_pass: PositiveFloat = 1e-10
    equality: PositiveFloat = 1e-6
    inequality: PositiveFloat = 1e-8


class Grids(_Section):
    rayleigh: int = Field(257, ge=2)
    a3: int = Field(1024, ge=2)
    vm: int = Field(33, ge=2)
    curves: int = Field(201, ge=2)
    scan_radius: PositiveFloat = 100.0


class Sampling(_Section):
    seed: int = Field(0, ge=0, lt=2**64)
    a3_samples: int = Field(64, ge=1)
    variation_samples: int = Field(200, ge=0)


class VMSettings(_Section):
    refute_samples: int = Field(256, ge=0)
    ascent_steps: int = Field(100, ge=0)
    eps0: PositiveFloat = 1.0
    eps_levels: int = Field(12, ge=1)
    mu_cap_factor: PositiveFloat = 10.0


class PerturbSettings(_Section):
    b_grid: list[NonNegativeFloat] = Field(
        default_factory=lambda: [0.0, 0.05, 0.1, 0.2, 0.4, 0.8], min_length=1
    )
    refine: bool = False


class Runtime(_Section):
    cache_max_entries: int = Field(4096, ge=0)
    workers: int = Field(1, ge=1)
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"


class RunConfig(_Section):
    """Validated configuration echoed into every report."""

    tolerances: Tolerances = Field(default_factory=Tolerances)
    grids: Grids = Field(default_factory=Grids)
    sampling: Sampling = Field(default_factory=Sampling)
    vm: VMSettings = Field(default_factory=VMSettings)
    perturb: PerturbSettings = Field(default_factory=PerturbSettings)
    runtime: Runtime = Field(default_factory=Runtime)


# =========================================================================
# Spectra and certificates
# =========================================================================


class Verdict(str, Enum):
    CERTIFIED = "certified"
    REFUTED = "refuted"
    UNKNOWN = "unknown"


class Certificate(BaseModel):
    """
    Machine-checkable verdict plus the numbers behind it.

    Attributes:
        kind: Which check produced the certificate ("vm" or "resolvent")
        verdict: Certified / Refuted / Unknown
        evidence: Verdict-specific numbers. Certified verdicts carry
            ``margins``, refuted verdicts carry a ``witness``.
    """

    kind: Literal["vm", "resolvent"]
    verdict: Verdict
    evidence: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_evidence(self) -> Certificate:
        if self.verdict is Verdict.REFUTED and "witness" not in self.evidence:
            raise ValueError("refuted certificates must carry a witness")
        if self.verdict is Verdict.CERTIFIED and "margins" not in self.evidence:
            raise ValueError("certified certificates must carry margins")
        return self

    @property
    def certified(self) -> bool:
        return self.verdict is Verdict.CERTIFIED


class EigenvalueEntry(BaseModel):
    value: float
    multiplicity: int = Field(ge=1)


class CountingProbe(BaseModel):
    """One evaluation of the counting function N(lam)."""

    lam: float
    count: int = Field(ge=0)
    boundary: bool = False


class SpectrumReport(BaseModel):
    """
    Eigenvalues of an operator function on an interval.

    Attributes:
        interval: Searched interval (endpoints in the resolvent set)
        ambient_dim: Dimension of the underlying space
        eigenvalues: Ascending eigenvalues with multiplicities
        eigenvector_bases: Per eigenvalue, an orthonormal kernel basis (d x k rows)
        counting_trace: Every probe of the counting function, in probe order
        count_lo: N at the lower endpoint
        count_hi: N at the upper endpoint
    """

    interval: Interval
    ambient_dim: int = Field(ge=1)
    eigenvalues: list[EigenvalueEntry] = Field(default_factory=list)
    eigenvector_bases: list[Matrix] = Field(default_factory=list)
    counting_trace: list[CountingProbe] = Field(default_factory=list)
    count_lo: int = Field(0, ge=0)
    count_hi: int = Field(0, ge=0)

    @model_validator(mode="after")
    def _check_multiplicities(self) -> SpectrumReport:
        if len(self.eigenvector_bases) != len(self.eigenvalues):
            raise ValueError("one eigenvector basis per eigenvalue is required")
        total = sum(entry.multiplicity for entry in self.eigenvalues)
        if total != self.count_hi - self.count_lo:
            raise ValueError(
                f"multiplicities sum to {total}, counting jump is {self.count_hi - self.count_lo}"
            )
        for entry, rows in zip(self.eigenvalues, self.eigenvector_bases, strict=True):
            if rows_matrix(rows, self.ambient_dim).shape[1] != entry.multiplicity:
                raise ValueError(f"kernel basis size mismatch at {entry.value}")
        values = [entry.value for entry in self.eigenvalues]
        if values != sorted(values):
            raise ValueError("eigenvalues must be ascending")
        return self

    @property
    def total_multiplicity(self) -> int:
        return self.count_hi - self.count_lo

    def basis(self, index: int) -> np.ndarray:
        """Kernel basis of the ``index``-th distinct eigenvalue as a d x k array."""
        return rows_matrix(self.eigenvector_bases[index], self.ambient_dim)

    def flat_eigenvalues(self) -> list[float]:
        """Eigenvalues repeated according to multiplicity (lambda_1 <= lambda_2 <= ...)."""
        return [entry.value for entry in self.eigenvalues for _ in range(entry.multiplicity)]

    def flat_vectors(self) -> np.ndarray:
        """Eigenvectors u_1, ..., u_N as columns, aligned with :meth:`flat_eigenvalues`."""
        blocks = [self.basis(j) for j in range(len(self.eigenvalues))]
        if not blocks:
            return np.zeros((self.ambient_dim, 0))
        return np.hstack(blocks)


class CrossingSlope(BaseModel):
    """Slope of an eigencurve through (eigenvalue, 0) along one kernel vector."""

    eigenvalue: float
    slope: float
    vector: list[float]


class DecompositionReport(BaseModel):
    alpha: float
    beta: float
    ambient_dim: int
    dims: tuple[int, int, int]
    defect: float
    passed: bool
    eigenvalues: list[EigenvalueEntry] = Field(default_factory=list)


class A3Witness(BaseModel):
    """A unit vector whose form is negative at one grid point and positive later."""

    vector: list[float]
    lam_negative: float
    lam_positive: float
    form_negative: float
    form_positive: float


class ValidationReport(BaseModel):
    interval: Interval
    grid_n: int
    sample_count: int
    passed: bool
    witnesses: list[A3Witness] = Field(default_factory=list)
    strict_slopes: list[CrossingSlope] | None = None
    breakpoint_flags: list[float] = Field(default_factory=list)


# =========================================================================
# Variational bounds
# =========================================================================


class VariationMode(str, Enum):
    SAMPLED = "sampled"
    WITNESS = "witness"
    CLASSICAL = "classical"


class VariationResult(BaseModel):
    """
    Outcome of a triple-variation evaluation.

    Attributes:
        n: Eigenvalue index (1-based)
        value: Best inner variation found
        witness_M: Basis of the maximal non-negative subspace achieving ``value``
        witness_L: Basis of the (n-1)-dimensional subspace of ``witness_M``
        mode: How the pair was obtained
        samples: Number of sampled (M, L) pairs examined
    """

    n: int = Field(ge=1)
    ambient_dim: int = Field(ge=1)
    value: ExtendedReal
    witness_M: Matrix
    witness_L: Matrix
    mode: VariationMode
    samples: int = 0

    @model_validator(mode="after")
    def _check_dims(self) -> VariationResult:
        if self.value.is_finite:
            dim_l = rows_matrix(self.witness_L, self.ambient_dim).shape[1]
            if dim_l != self.n - 1:
                raise ValueError(f"witness L has dimension {dim_l}, expected {self.n - 1}")
        return self


class EqualityReport(BaseModel):
    n: int
    gamma: float
    lambda_n: float
    mu: float
    witness_value: ExtendedReal
    sampled_max: ExtendedReal
    witness_pass: bool
    inequality_pass: bool

    @property
    def passed(self) -> bool:
        return self.witness_pass and self.inequality_pass


# =========================================================================
# Perturbation
# =========================================================================


class GapVerdict(str, Enum):
    CERTIFIED = "certified"
    INAPPLICABLE = "inapplicable"


class GapCertificate(BaseModel):
    alpha: float
    beta: float
    a: NonNegativeFloat
    b: NonNegativeFloat
    alpha_hat: float
    verdict: GapVerdict
    cross_check: SpectrumReport | None = None

    @model_validator(mode="after")
    def _check_formula(self) -> GapCertificate:
        if self.alpha_hat != self.alpha + self.a + self.b * self.alpha:
            raise ValueError("alpha_hat must equal alpha + a + b*alpha")
        if self.verdict is GapVerdict.CERTIFIED and not self.alpha_hat < self.beta:
            raise ValueError("certified gap requires alpha_hat < beta")
        return self


# =========================================================================
# CLI report envelope
# =========================================================================


class Report(BaseModel):
    """Envelope written by every CLI command."""

    schema_version: Literal["v1"] = SCHEMA_VERSION
    command: str
    config: RunConfig
    family_digest: str | None = None
    results: dict[str, Any] = Field(default_factory=dict)
    timings: dict[str, float] = Field(default_factory=dict)


__all__ = [
    "SCHEMA_VERSION",
    "ExtFloat",
    "Matrix",
    "matrix_rows",
    "rows_matrix",
    "Interval",
    "ExtendedRealTag",
    "ExtendedReal",
    "Inertia",
    "Tolerances",
    "Grids",
    "Sampling",
    "VMSettings",
    "PerturbSettings",
    "Runtime",
    "RunConfig",
    "Verdict",
    "Certificate",
    "EigenvalueEntry",
    "CountingProbe",
    "SpectrumReport",
    "CrossingSlope",
    "DecompositionReport",
    "A3Witness",
    "ValidationReport",
    "VariationMode",
    "VariationResult",
    "EqualityReport",
    "GapVerdict",
    "GapCertificate",
    "Report",
]
