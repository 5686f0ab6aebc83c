"""
Variational characterizations of eigenvalues above a resolvent point.

- ``classical_double_variation``: min-max / max-min for a symmetric matrix
- ``inner_variation``: inf of p over M minus L (Euclidean complement)
- ``triple_lower_bound``: sampled sup over maximal non-negative M and L inside M
- ``witness_subspaces``: the explicit pair (M, L) attaining the n-th eigenvalue
- ``verify_equality``: witness value vs the reference spectrum
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config_loader import config
from .errors import (
    DomainError,
    InsufficientSpectrumError,
    InternalConsistencyError,
    NoGapError,
    PoleProximityError,
    PreconditionError,
    RankDeficiencyError,
)
from .families import OperatorFamily
from .kreinsub import (
    KreinFrame,
    canonical_subspace,
    is_maximal_nonneg,
    krein_frame,
    sample_from_frame,
)
from .linalg import (
    SubspaceBasis,
    compress,
    complement_within,
    eigh,
    norm2,
    spectral_basis,
    sym_matrix,
)
from .models import EqualityReport, ExtendedReal, Interval, VariationMode, VariationResult
from .rayleigh import min_rayleigh_over
from .spectra import counting, spectrum_in

logger = logging.getLogger(__name__)


def classical_double_variation(A: np.ndarray, n: int) -> float:
    """
    n-th smallest eigenvalue of A as min-max and as max-min of the Rayleigh quotient.

    The optimal subspaces are spanned by eigenvectors: S = span(v_1..v_n)
    for the min-max and L = span(v_1..v_{n-1}) for the max-min. Both values
    must agree with the eigensolver.
    """
    matrix = sym_matrix(A)
    dim = matrix.shape[0]
    if not 1 <= n <= dim:
        raise PreconditionError("n must satisfy 1 <= n <= dim", n=n, dim=dim)
    values, vectors = eigh(matrix)
    top = SubspaceBasis(vectors.cols[:, :n])
    min_max = float(eigh(compress(matrix, top))[0][-1])
    below = SubspaceBasis(vectors.cols[:, : n - 1])
    rest = complement_within(SubspaceBasis.identity(dim), below)
    max_min = float(eigh(compress(matrix, rest))[0][0])
    tol = 1e-9 * (1.0 + norm2(matrix))
    if abs(min_max - values[n - 1]) > tol or abs(max_min - values[n - 1]) > tol:
        raise InternalConsistencyError(
            "min-max and max-min disagree with the eigensolver",
            min_max=min_max,
            max_min=max_min,
            eigenvalue=float(values[n - 1]),
        )
    return float(values[n - 1])


def inner_variation(
    family: OperatorFamily,
    M: SubspaceBasis,
    L: SubspaceBasis,
    scan: Interval | None = None,
) -> ExtendedReal:
    """
    inf of p(x) over x in M with x orthogonal to L.

    Raises:
        PreconditionError: dim L >= dim M
        ContainmentError: L is not a subspace of M
    """
    if L.dim >= M.dim:
        raise PreconditionError("L must have smaller dimension than M", dim_L=L.dim, dim_M=M.dim)
    return min_rayleigh_over(family, complement_within(M, L, tol=1e-10), scan)


def variation_scan(family: OperatorFamily, gamma: float) -> Interval:
    """[gamma, upper end of the family scan]: p >= gamma on every t(gamma)-non-negative vector."""
    upper = family.scan_interval()
    return Interval(lo=gamma, hi=upper.hi, hi_open=upper.hi_open)


@dataclass(frozen=True, eq=False)
class Witness:
    M: SubspaceBasis
    L: SubspaceBasis
    mu: float
    lambda_n: float
    eigenvalues: tuple[float, ...]


def _search_ceiling(family: OperatorFamily, gamma: float) -> float:
    """
    Upper search end inside the scan.

    Starts at the top of the scan and steps down, doubling the step, past
    eigenvalues of the family and past points where T cannot be evaluated
    (domain edges, pole layers). Once it reaches gamma the caller reports
    that there is no room above gamma.
    """
    hull = family.scan_interval().closed_inside()
    ceiling = hull.hi
    step = 1e-6 * (1.0 + abs(ceiling))
    for _ in range(48):
        if ceiling <= gamma:
            return ceiling
        try:
            if not counting(family, ceiling).boundary:
                if ceiling < hull.hi:
                    logger.debug("Search ceiling clipped from %s to %s", hull.hi, ceiling)
                return ceiling
        except (DomainError, PoleProximityError) as exc:
            logger.debug("Search ceiling %s is not evaluable: %s", ceiling, exc.detail)
        ceiling = max(ceiling - step, hull.lo)
        step *= 2.0
    raise PreconditionError("no resolvent point at the top of the scan", hi=hull.hi, gamma=gamma)


def _witness(family: OperatorFamily, gamma: float, n: int) -> Witness:
    if n < 1:
        raise PreconditionError("n must be at least 1", n=n)
    krein_frame(family, gamma)
    ceiling = _search_ceiling(family, gamma)
    if not gamma < ceiling:
        raise InsufficientSpectrumError("no room above gamma inside the domain", gamma=gamma)
    report = spectrum_in(family, Interval.closed(gamma, ceiling))
    eigenvalues = report.flat_eigenvalues()
    if len(eigenvalues) < n:
        raise InsufficientSpectrumError(
            "fewer eigenvalues above gamma than requested", found=len(eigenvalues), n=n
        )
    vectors = report.flat_vectors()
    lambda_n = eigenvalues[n - 1]
    m = max(k for k in range(1, len(eigenvalues) + 1) if eigenvalues[k - 1] == lambda_n)
    upper = eigenvalues[m] if m < len(eigenvalues) else ceiling
    mu = 0.5 * (lambda_n + upper)
    if not (lambda_n < mu < upper) or not family.domain.contains(mu):
        raise NoGapError("no resolvent point above the eigenvalue", lambda_n=lambda_n, upper=upper)

    positive = spectral_basis(family.evaluate(mu), Interval(lo=0.0, hi=math.inf, lo_open=True, hi_open=True))
    try:
        M = SubspaceBasis(np.hstack([vectors[:, :m], positive.cols]))
        K = SubspaceBasis(np.hstack([vectors[:, n - 1 : m], positive.cols]))
        projector = K.projector()
        first = vectors[:, : n - 1]
        L = SubspaceBasis(first - projector @ first)
    except RankDeficiencyError as exc:
        logger.error("Witness construction lost rank at gamma=%s, n=%d", gamma, n)
        raise InternalConsistencyError(f"witness subspaces are degenerate: {exc.detail}") from exc

    if not is_maximal_nonneg(family, gamma, M):
        logger.error("Witness M is not maximal non-negative at gamma=%s", gamma)
        raise InternalConsistencyError("witness M is not maximal non-negative", gamma=gamma, dim_M=M.dim)
    return Witness(M=M, L=L, mu=mu, lambda_n=lambda_n, eigenvalues=tuple(eigenvalues))


def witness_subspaces(family: OperatorFamily, gamma: float, n: int) -> tuple[SubspaceBasis, SubspaceBasis, float]:
    """
    Subspaces (M, L) with inner_variation(M, L) = lambda_n, and the gap point mu.

    M = span{u_1..u_m} + L(0,inf)(T(mu)), L = (I - P) span{u_1..u_{n-1}} where
    P projects onto span{u_n..u_m} + L(0,inf)(T(mu)) and m is the last index
    with lambda_m = lambda_n.

    Raises:
        NotInResolventError: gamma is an eigenvalue
        InsufficientSpectrumError: fewer than n eigenvalues above gamma
        NoGapError: no resolvent point above lambda_n inside the domain
    """
    witness = _witness(family, gamma, n)
    return witness.M, witness.L, witness.mu


def _random_frame(M: SubspaceBasis, size: int, rng: np.random.Generator) -> SubspaceBasis:
    """Random ``size``-dimensional subspace of span(M)."""
    if size == 0:
        return SubspaceBasis.empty(M.ambient_dim)
    return SubspaceBasis(M.orthonormal() @ rng.standard_normal((M.dim, size)))


def _sampled_value(
    family: OperatorFamily,
    frame: KreinFrame,
    n: int,
    seed: np.random.SeedSequence,
    pinned: bool,
    scan: Interval,
) -> tuple[ExtendedReal, SubspaceBasis, SubspaceBasis]:
    rng = np.random.default_rng(seed)
    M = sample_from_frame(frame, rng, pinned).basis
    L = _random_frame(M, n - 1, rng)
    return inner_variation(family, M, L, scan), M, L


def triple_lower_bound(
    family: OperatorFamily,
    gamma: float,
    n: int,
    samples: int | None = None,
    seed: int | None = None,
) -> VariationResult:
    """
    Sampled sup over (M, L) of the inner variation.

    Every value is a lower bound for lambda_n. Each sample draws M from
    the maximal non-negative subspaces at gamma (every eighth one with
    unit singular values) and L as a random (n-1)-frame inside M. The
    canonical M and the witness pair are always included when they exist.
    """
    if n < 1:
        raise PreconditionError("n must be at least 1", n=n)
    samples = config.sampling.variation_samples if samples is None else samples
    seed = config.seed if seed is None else seed
    frame = krein_frame(family, gamma)

    if frame.dim_plus < n:
        logger.info("dim K+ = %d < n = %d at gamma=%s: empty supremum", frame.dim_plus, n, gamma)
        return VariationResult(
            n=n,
            ambient_dim=family.dim,
            value=ExtendedReal.neg_inf(),
            witness_M=canonical_subspace(frame).basis.to_rows(),
            witness_L=SubspaceBasis.empty(family.dim).to_rows(),
            mode=VariationMode.SAMPLED,
            samples=0,
        )

    scan = variation_scan(family, gamma)
    children = np.random.SeedSequence(seed).spawn(samples)

    def draw(index: int) -> tuple[ExtendedReal, SubspaceBasis, SubspaceBasis]:
        return _sampled_value(family, frame, n, children[index], index % 8 == 7, scan)

    workers = config.workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            draws = list(executor.map(draw, range(samples)))
    else:
        draws = [draw(index) for index in range(samples)]

    canonical = canonical_subspace(frame).basis
    canonical_L = _random_frame(canonical, n - 1, np.random.default_rng(seed))
    candidates = [(value, M, L, VariationMode.SAMPLED) for value, M, L in draws]
    candidates.append((inner_variation(family, canonical, canonical_L, scan), canonical, canonical_L, VariationMode.SAMPLED))
    try:
        witness = _witness(family, gamma, n)
    except (InsufficientSpectrumError, NoGapError) as exc:
        logger.debug("No witness pair at gamma=%s, n=%d: %s", gamma, n, exc)
    else:
        candidates.append((inner_variation(family, witness.M, witness.L, scan), witness.M, witness.L, VariationMode.WITNESS))

    best_value, best_M, best_L, mode = candidates[0]
    for value, M, L, candidate_mode in candidates[1:]:
        if value > best_value:
            best_value, best_M, best_L, mode = value, M, L, candidate_mode
    logger.info("Triple variation n=%d at gamma=%s: best %r over %d pairs", n, gamma, best_value, len(candidates))
    return VariationResult(
        n=n,
        ambient_dim=family.dim,
        value=best_value,
        witness_M=best_M.to_rows(),
        witness_L=best_L.to_rows(),
        mode=mode,
        samples=len(candidates),
    )


def verify_equality(
    family: OperatorFamily,
    gamma: float,
    n: int,
    samples: int | None = None,
    seed: int | None = None,
) -> EqualityReport:
    """Compare the witness value and the sampled maximum with lambda_n from the reference solver."""
    witness = _witness(family, gamma, n)
    scan = variation_scan(family, gamma)
    witness_value = inner_variation(family, witness.M, witness.L, scan)
    sampled = triple_lower_bound(family, gamma, n, samples, seed)
    tolerances = config.tolerances
    witness_pass = witness_value.is_finite and abs(witness_value.as_float() - witness.lambda_n) <= tolerances.equality
    inequality_pass = sampled.value.as_float() <= witness.lambda_n + tolerances.inequality
    report = EqualityReport(
        n=n,
        gamma=gamma,
        lambda_n=witness.lambda_n,
        mu=witness.mu,
        witness_value=witness_value,
        sampled_max=sampled.value,
        witness_pass=witness_pass,
        inequality_pass=inequality_pass,
    )
    if report.passed:
        logger.info("Equality verified for n=%d: lambda_n=%s", n, witness.lambda_n)
    else:
        logger.warning(
            "Equality check failed for n=%d: lambda_n=%s, witness=%r, sampled=%r",
            n,
            witness.lambda_n,
            witness_value,
            sampled.value,
        )
    return report


__all__ = [
    "classical_double_variation",
    "inner_variation",
    "variation_scan",
    "triple_lower_bound",
    "witness_subspaces",
    "verify_equality",
]
