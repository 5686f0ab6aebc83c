"""
Reference spectrum solver and certificates.

The eigenvalue counting function N(lambda) = #{negative eigenvalues of
T(lambda)} is non-decreasing under (A3) and jumps by the multiplicity at
every eigenvalue of the family, so bisection on N finds the whole spectrum
of an interval. On top of it sit the eigencurve slope formula, the
Virozub-Matsaev (VM) check, the resolvent-point certificate and the
three-way decomposition verifier.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from concurrent.futures import ThreadPoolExecutor
from typing import Any

import numpy as np
import scipy.optimize

from .config_loader import config
from .errors import (
    DomainError,
    HypothesisError,
    InternalConsistencyError,
    NotAnEigenvectorError,
    PreconditionError,
)
from .families import OperatorFamily, as_vector
from .kreinsub import MaxNonnegSubspace, canonical_subspace, is_maximal_nonneg, krein_frame
from .linalg import (
    SubspaceBasis,
    compress,
    direct_sum_defect,
    eigh,
    eigvalsh,
    lambda_min,
    norm2,
    spectral_basis,
)
from .models import (
    Certificate,
    CountingProbe,
    CrossingSlope,
    DecompositionReport,
    EigenvalueEntry,
    Interval,
    SpectrumReport,
    Verdict,
    matrix_rows,
)

logger = logging.getLogger(__name__)


def _num(value: float) -> float | str:
    """JSON-safe float: infinities become "+inf" / "-inf"."""
    value = float(value)
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return value


# =========================================================================
# Counting function and spectrum
# =========================================================================


def _probe(family: OperatorFamily, lam: float, tol: float | None = None) -> tuple[int, CountingProbe]:
    """Strict count (eigenvalues < 0) and the tolerance-based probe at one point."""
    values = eigvalsh(family.evaluate(lam))
    if tol is None:
        tol = config.tolerances.kernel_rel * (1.0 + float(np.max(np.abs(values))))
    strict = int(np.count_nonzero(values < 0))
    probe = CountingProbe(
        lam=float(lam),
        count=int(np.count_nonzero(values < -tol)),
        boundary=bool(np.any(np.abs(values) <= tol)),
    )
    return strict, probe


def counting(family: OperatorFamily, lam: float, tol: float | None = None) -> CountingProbe:
    """
    N(lambda), the number of eigenvalues of T(lambda) below -tol.

    ``boundary`` is set when an eigenvalue of T(lambda) lies within tol of
    zero, i.e. lambda is (numerically) an eigenvalue of the family.
    """
    return _probe(family, lam, tol)[1]


def counting_grid(
    family: OperatorFamily,
    grid: Iterable[float],
    workers: int | None = None,
    tol: float | None = None,
) -> list[CountingProbe]:
    """N over a grid, optionally on a thread pool; results keep the grid order."""
    points = [float(lam) for lam in grid]
    workers = config.workers if workers is None else workers
    if workers <= 1:
        return [counting(family, lam, tol) for lam in points]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(lambda lam: counting(family, lam, tol), points))


def _check_interval(family: OperatorFamily, interval: Interval) -> tuple[float, float]:
    if not interval.is_bounded:
        raise PreconditionError("interval must be bounded", lo=interval.lo, hi=interval.hi)
    lo, hi = float(interval.lo), float(interval.hi)
    if not (family.domain.contains(lo) and family.domain.contains(hi)):
        raise PreconditionError("interval endpoints must lie in the family domain", lo=lo, hi=hi)
    return lo, hi


def spectrum_in(family: OperatorFamily, interval: Interval, tol: float | None = None) -> SpectrumReport:
    """
    All eigenvalues of the family in ``interval`` with multiplicities and kernel bases.

    Raises:
        PreconditionError: an endpoint lies in the spectrum
        InternalConsistencyError: N decreases, or a jump size differs from the kernel dimension
    """
    lo, hi = _check_interval(family, interval)
    trace: list[CountingProbe] = []

    def probe(lam: float) -> tuple[int, CountingProbe]:
        strict, record = _probe(family, lam, tol)
        trace.append(record)
        return strict, record

    n_lo, probe_lo = probe(lo)
    n_hi, probe_hi = probe(hi)
    for record in (probe_lo, probe_hi):
        if record.boundary:
            raise PreconditionError("interval endpoint lies in the spectrum", lam=record.lam)

    jumps: list[tuple[float, int]] = []
    stack = [(lo, hi, n_lo, n_hi)]
    while stack:
        a, b, n_a, n_b = stack.pop()
        if n_b == n_a:
            continue
        if n_b < n_a:
            logger.error("Counting function decreases between %s and %s", a, b)
            raise InternalConsistencyError(
                "counting function is not monotone", lo=a, hi=b, count_lo=n_a, count_hi=n_b
            )
        if b - a <= config.tolerances.bisection_rel * (1.0 + max(abs(a), abs(b))):
            jumps.append((0.5 * (a + b), n_b - n_a))
            continue
        mid = 0.5 * (a + b)
        n_mid, _ = probe(mid)
        # Right half first so the left half is popped next (ascending order)
        stack.append((mid, b, n_mid, n_b))
        stack.append((a, mid, n_a, n_mid))

    entries: list[EigenvalueEntry] = []
    bases = []
    for lam, multiplicity in jumps:
        values, vectors = eigh(family.evaluate(lam))
        ktol = config.tolerances.kernel_rel * (1.0 + float(np.max(np.abs(values))))
        kernel = vectors.cols[:, np.abs(values) <= ktol]
        if kernel.shape[1] != multiplicity:
            logger.error("Kernel dimension %d at %s, counting jump %d", kernel.shape[1], lam, multiplicity)
            raise InternalConsistencyError(
                "counting jump differs from kernel dimension",
                lam=lam,
                jump=multiplicity,
                kernel_dim=kernel.shape[1],
            )
        entries.append(EigenvalueEntry(value=lam, multiplicity=multiplicity))
        bases.append(matrix_rows(kernel))

    report = SpectrumReport(
        interval=Interval.closed(lo, hi),
        ambient_dim=family.dim,
        eigenvalues=entries,
        eigenvector_bases=bases,
        counting_trace=trace,
        count_lo=probe_lo.count,
        count_hi=probe_hi.count,
    )
    logger.info(
        "Found %d eigenvalues (%d with multiplicity) in [%s, %s]",
        len(entries),
        report.total_multiplicity,
        lo,
        hi,
    )
    return report


# =========================================================================
# Eigencurves
# =========================================================================


def eigencurve_derivative(
    family: OperatorFamily, lam0: float, x0: np.ndarray, tol: float | None = None
) -> float:
    """
    Slope x.T'(lam0)x / ||x||^2 of the eigencurve through (lam0, nu) along x.

    Raises:
        DomainError: ``x0`` is zero
        NotAnEigenvectorError: ``x0`` is not an eigenvector of T(lam0) within tol
    """
    vector = as_vector(x0, family.dim)
    weight = float(vector @ vector)
    if weight == 0.0:
        raise DomainError("eigencurve direction must be non-zero")
    value = family.evaluate(lam0)
    image = value @ vector
    nu = float(vector @ image) / weight
    residual = float(np.linalg.norm(image - nu * vector)) / math.sqrt(weight)
    tol = config.tolerances.kernel_rel * (1.0 + norm2(value)) if tol is None else tol
    if residual > tol:
        raise NotAnEigenvectorError("vector is not an eigenvector", lam=lam0, residual=residual)
    return family.derivative_form(lam0, vector) / weight


def crossing_slopes(family: OperatorFamily, report: SpectrumReport) -> list[CrossingSlope]:
    """Eigencurve slope at every located eigenvalue, one per kernel basis vector."""
    slopes = []
    for j, entry in enumerate(report.eigenvalues):
        kernel = report.basis(j)
        for column in kernel.T:
            slopes.append(
                CrossingSlope(
                    eigenvalue=entry.value,
                    slope=eigencurve_derivative(family, entry.value, column),
                    vector=column.tolist(),
                )
            )
    return slopes


# =========================================================================
# Virozub-Matsaev condition
# =========================================================================


def dual_bound(value: np.ndarray, slope: np.ndarray, eps: float) -> tuple[float, float]:
    """
    Upper bound for max{x.T'x : ||x|| = 1, |x.Tx| <= eps} and its multiplier.

    phi(mu) = lambda_max(T' - mu T) + |mu| eps is convex; it is minimized on
    [-cap, cap] with cap = mu_cap_factor * ||T'|| / max(eps, 1e-12).

    When T' = 0 the cap is 0 and the bound is phi(0) = 0 with multiplier 0.
    This never certifies the point, even where (VM) holds vacuously because
    no unit x has |x.Tx| <= eps.
    """

    def phi(mu: float) -> float:
        return float(eigvalsh(slope - mu * value)[-1]) + abs(mu) * eps

    cap = config.vm.mu_cap_factor * norm2(slope) / max(eps, 1e-12)
    at_zero = phi(0.0)
    if cap == 0.0:
        logger.debug("T' vanishes: dual bound falls back to phi(0) = %g", at_zero)
        return at_zero, 0.0
    result = scipy.optimize.minimize_scalar(
        phi, bounds=(-cap, cap), method="bounded", options={"xatol": 1e-10 * (1.0 + cap)}
    )
    best = phi(float(result.x))
    if best < at_zero:
        return best, float(result.x)
    return at_zero, 0.0


def _refutation_witness(
    value: np.ndarray,
    slope: np.ndarray,
    eps: float,
    delta: float,
    rng: np.random.Generator,
) -> np.ndarray | None:
    """Unit x with |x.Tx| <= eps and x.T'x > -delta, found by sampling then penalized ascent."""
    dim = value.shape[0]

    def admissible(x: np.ndarray) -> bool:
        return abs(float(x @ value @ x)) <= eps and float(x @ slope @ x) > -delta

    _, vectors = eigh(value)
    samples = rng.standard_normal((dim, config.vm.refute_samples))
    samples /= np.linalg.norm(samples, axis=0)
    candidates = np.hstack([vectors.cols, samples])
    for x in candidates.T:
        if admissible(x):
            return x

    # Start the ascent from the most nearly admissible candidate
    forms = np.abs(np.sum(candidates * (value @ candidates), axis=0))
    x = candidates[:, int(np.argmin(forms))].copy()
    penalty = 1.0 / max(eps, 1e-12)
    step = 1.0 / (1.0 + norm2(slope) + penalty * norm2(value) ** 2)
    for _ in range(config.vm.ascent_steps):
        form = float(x @ value @ x)
        excess = max(0.0, abs(form) - eps)
        gradient = 2.0 * slope @ x - 4.0 * penalty * excess * math.copysign(1.0, form) * (value @ x)
        x = x + step * gradient
        x /= np.linalg.norm(x)
        if admissible(x):
            return x
    return None


def vm_certify(
    family: OperatorFamily,
    interval: Interval,
    eps: float,
    delta: float,
    grid_n: int | None = None,
    seed: int | None = None,
) -> Certificate:
    """
    Check (VM) with constants (eps, delta) on a grid of ``interval``.

    Certified when the dual bound is <= -delta at every grid point; Refuted
    when a unit x with |t(lambda)[x]| <= eps and t'(lambda)[x] > -delta is
    found; Unknown otherwise.
    """
    if not (eps > 0 and delta > 0):
        raise PreconditionError("eps and delta must be positive", eps=eps, delta=delta)
    lo, hi = _check_interval(family, interval)
    grid_n = config.grids.vm if grid_n is None else grid_n
    seed = config.seed if seed is None else seed
    grid = Interval.closed(lo, hi).grid(grid_n)

    bounds, multipliers = [], []
    for lam in grid:
        bound, mu = dual_bound(family.evaluate(lam), family.derivative(lam), eps)
        bounds.append(bound)
        multipliers.append(mu)
    worst = int(np.argmax(bounds))
    base = {"eps": eps, "delta": delta, "interval": [lo, hi], "grid_n": grid_n}

    if bounds[worst] <= -delta:
        logger.info("VM certified on [%s, %s] with eps=%g, delta=%g", lo, hi, eps, delta)
        return Certificate(
            kind="vm",
            verdict=Verdict.CERTIFIED,
            evidence={
                **base,
                "margins": {"max_dual_bound": bounds[worst], "slack": -delta - bounds[worst]},
                "grid": grid.tolist(),
                "dual_bounds": bounds,
                "multipliers": multipliers,
            },
        )

    for index in np.argsort(bounds)[::-1]:
        if bounds[index] <= -delta:
            break
        lam = float(grid[index])
        rng = np.random.default_rng([seed, int(index)])
        witness = _refutation_witness(family.evaluate(lam), family.derivative(lam), eps, delta, rng)
        if witness is not None:
            logger.info("VM refuted at lambda=%s", lam)
            return Certificate(
                kind="vm",
                verdict=Verdict.REFUTED,
                evidence={
                    **base,
                    "witness": {
                        "lam": lam,
                        "vector": witness.tolist(),
                        "form": family.form(lam, witness),
                        "derivative_form": family.derivative_form(lam, witness),
                    },
                },
            )

    logger.info("VM undecided on [%s, %s]: worst dual bound %g", lo, hi, bounds[worst])
    return Certificate(
        kind="vm",
        verdict=Verdict.UNKNOWN,
        evidence={**base, "max_dual_bound": bounds[worst], "worst_lam": float(grid[worst])},
    )


def vm_search(family: OperatorFamily, interval: Interval, grid_n: int | None = None) -> Certificate:
    """
    Search (eps, delta) for a VM certificate.

    Tries eps_k = eps0 * 2^-k; the first level whose worst dual bound is
    negative is certified with delta = half that margin. Without success the
    eps0 level is probed for a refutation.
    """
    lo, hi = _check_interval(family, interval)
    grid_n = config.grids.vm if grid_n is None else grid_n
    grid = Interval.closed(lo, hi).grid(grid_n)
    points = [(family.evaluate(lam), family.derivative(lam)) for lam in grid]
    for level in range(config.vm.eps_levels):
        eps = config.vm.eps0 * 2.0**-level
        worst = max(dual_bound(value, slope, eps)[0] for value, slope in points)
        if worst < 0:
            certificate = vm_certify(family, interval, eps, -0.5 * worst, grid_n)
            if certificate.certified:
                return certificate
    return vm_certify(family, interval, config.vm.eps0, config.tolerances.kernel_rel, grid_n)


def vm_lower_bound(
    family: OperatorFamily,
    mu1: float,
    mu2: float,
    eps: float,
    delta: float,
    x: np.ndarray,
) -> float:
    """
    Slack of the VM propagation inequality.

    If (eps, delta) satisfy VM on [mu1, mu2] and t(mu2)[x] >= -eps||x||^2, then
    t(mu1)[x] >= min{eps||x||^2, t(mu2)[x] + delta (mu2 - mu1)||x||^2}.
    Returns the left side minus the right side.
    """
    if not mu1 < mu2:
        raise PreconditionError("mu1 must be smaller than mu2", mu1=mu1, mu2=mu2)
    vector = as_vector(x, family.dim)
    weight = float(vector @ vector)
    upper = family.form(mu2, vector)
    if upper < -eps * weight:
        raise PreconditionError("t(mu2)[x] is below -eps ||x||^2", form=upper)
    floor = min(eps * weight, upper + delta * (mu2 - mu1) * weight)
    return family.form(mu1, vector) - floor


# =========================================================================
# Resolvent certificate and decomposition
# =========================================================================


def resolvent_certify(
    family: OperatorFamily,
    mu1: float,
    mu2: float,
    subspace: MaxNonnegSubspace | SubspaceBasis | str = "canonical",
    eps: float | None = None,
    delta: float | None = None,
) -> Certificate:
    """
    Certify mu2 in the resolvent set from t(mu2) >= a > 0 on a maximal
    t(mu1)-non-negative subspace together with VM on [mu1, mu2].

    Verdicts: Certified (both steps pass, cross-checked by counting),
    Refuted (mu2 is numerically an eigenvalue; carries a kernel vector),
    Unknown (a step failed without contradicting the conclusion).

    Raises:
        HypothesisError: a supplied subspace is not maximal non-negative at mu1
    """
    if not mu1 < mu2:
        raise PreconditionError("mu1 must be smaller than mu2", mu1=mu1, mu2=mu2)
    for lam in (mu1, mu2):
        if not family.domain.contains(lam):
            raise PreconditionError("certificate points must lie in the domain", lam=lam)

    if isinstance(subspace, str):
        if subspace != "canonical":
            raise PreconditionError("subspace must be a basis or 'canonical'", subspace=subspace)
        basis = canonical_subspace(krein_frame(family, mu1)).basis
    else:
        basis = subspace.basis if isinstance(subspace, MaxNonnegSubspace) else subspace
        if not is_maximal_nonneg(family, mu1, basis):
            raise HypothesisError("subspace is not maximal non-negative at mu1", mu1=mu1)

    value = family.evaluate(mu2)
    a = lambda_min(compress(value, basis)) if basis.dim else math.inf
    tol = config.tolerances.kernel_rel * (1.0 + norm2(value))
    interval = Interval.closed(mu1, mu2)
    if eps is not None and delta is not None:
        vm = vm_certify(family, interval, eps, delta)
    else:
        vm = vm_search(family, interval)

    evidence: dict[str, Any] = {
        "mu1": mu1,
        "mu2": mu2,
        "a": _num(a),
        "dim_M": basis.dim,
        "basis": matrix_rows(basis.orthonormal()),
        "vm": vm.model_dump(mode="json"),
    }
    probe = counting(family, mu2)

    if a > tol and vm.certified:
        if probe.boundary:
            logger.error("Certified mu2=%s but counting flags it as spectral", mu2)
            raise InternalConsistencyError("certified point is spectral", mu2=mu2)
        evidence["margins"] = {
            "a": _num(a),
            "eps": vm.evidence["eps"],
            "delta": vm.evidence["delta"],
            "vm_slack": vm.evidence["margins"]["slack"],
        }
        evidence["cross_check"] = probe.model_dump(mode="json")
        logger.info("Certified %s in the resolvent set (a=%s)", mu2, a)
        return Certificate(kind="resolvent", verdict=Verdict.CERTIFIED, evidence=evidence)

    if probe.boundary:
        values, vectors = eigh(value)
        index = int(np.argmin(np.abs(values)))
        evidence["witness"] = {
            "mu2": mu2,
            "vector": vectors.cols[:, index].tolist(),
            "eigenvalue": float(values[index]),
        }
        logger.warning("mu2=%s is an eigenvalue of the family", mu2)
        return Certificate(kind="resolvent", verdict=Verdict.REFUTED, evidence=evidence)

    evidence["failed_step"] = "hypothesis" if not a > tol else "vm"
    logger.warning("No resolvent certificate for %s: %s step failed", mu2, evidence["failed_step"])
    return Certificate(kind="resolvent", verdict=Verdict.UNKNOWN, evidence=evidence)


def decomposition_check(family: OperatorFamily, alpha: float, beta: float) -> DecompositionReport:
    """
    Verify R^d = L(-inf,0)(T(alpha)) + span{eigenvectors in (alpha, beta)} + L(0,inf)(T(beta)).

    The sum passes when dimensions add up to d and the direct-sum defect
    exceeds ``tolerances.decomposition_pass``.
    """
    report = spectrum_in(family, Interval.closed(alpha, beta))
    below = spectral_basis(family.evaluate(alpha), Interval(lo=-math.inf, hi=0.0, lo_open=True, hi_open=True))
    above = spectral_basis(family.evaluate(beta), Interval(lo=0.0, hi=math.inf, lo_open=True, hi_open=True))
    blocks = [below] + [SubspaceBasis(report.basis(j)) for j in range(len(report.eigenvalues))] + [above]
    dims = (below.dim, report.total_multiplicity, above.dim)

    defect = direct_sum_defect(blocks) if sum(dims) == family.dim else 0.0
    passed = sum(dims) == family.dim and defect > config.tolerances.decomposition_pass
    if passed:
        logger.info("Decomposition on [%s, %s]: dims %s, defect %.3g", alpha, beta, dims, defect)
    else:
        logger.warning("Decomposition on [%s, %s] failed: dims %s, defect %.3g", alpha, beta, dims, defect)
    return DecompositionReport(
        alpha=alpha,
        beta=beta,
        ambient_dim=family.dim,
        dims=dims,
        defect=defect,
        passed=passed,
        eigenvalues=report.eigenvalues,
    )


__all__ = [
    "counting",
    "counting_grid",
    "spectrum_in",
    "eigencurve_derivative",
    "crossing_slopes",
    "dual_bound",
    "vm_certify",
    "vm_search",
    "vm_lower_bound",
    "resolvent_certify",
    "decomposition_check",
]
