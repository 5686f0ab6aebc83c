"""
Spectral gaps under non-negative perturbations.

If (alpha, beta) is a gap of A and B >= 0 satisfies
x.Bx <= a||x||^2 + b x.Ax, then (alpha + a + b alpha, beta) is a gap of
A + B: the gap can only close from below.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.optimize

from .config_loader import config
from .errors import DimensionError, HypothesisError, InternalConsistencyError, PreconditionError
from .families import ShiftedLinear
from .linalg import eigvalsh, norm2, sym_matrix
from .models import GapCertificate, GapVerdict, Interval
from .spectra import spectrum_in

logger = logging.getLogger(__name__)


def _pair(A: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    base, perturbation = sym_matrix(A), sym_matrix(B)
    if base.shape != perturbation.shape:
        raise DimensionError("A and B must have the same shape", A=base.shape, B=perturbation.shape)
    return base, perturbation


def _check_psd(B: np.ndarray) -> None:
    smallest = float(eigvalsh(B)[0])
    if smallest < -config.tolerances.kernel_rel * (1.0 + norm2(B)):
        raise HypothesisError("perturbation must be positive semidefinite", lambda_min=smallest)


def relative_bound_a(A: np.ndarray, B: np.ndarray, b: float) -> float:
    """
    Least a >= 0 with x.Bx <= a||x||^2 + b x.Ax for all x, i.e. max(0, lambda_max(B - bA)).

    Raises:
        HypothesisError: B is not positive semidefinite
    """
    base, perturbation = _pair(A, B)
    if b < 0:
        raise PreconditionError("b must be non-negative", b=b)
    _check_psd(perturbation)
    return max(0.0, float(eigvalsh(perturbation - b * base)[-1]))


def alpha_hat(alpha: float, a: float, b: float) -> float:
    """Shifted lower gap edge alpha + a + b alpha (no clamping for negative alpha)."""
    if a < 0 or b < 0:
        raise PreconditionError("a and b must be non-negative", a=a, b=b)
    return alpha + a + b * alpha


def certify_gap(
    A: np.ndarray,
    B: np.ndarray,
    alpha: float,
    beta: float,
    b_grid: list[float] | None = None,
    refine: bool | None = None,
) -> GapCertificate:
    """
    Certify that (alpha_hat, beta) is free of spectrum of A + B.

    alpha_hat is minimized over ``b_grid`` (and optionally refined by a bounded
    scalar search). A certified gap is cross-checked against the spectrum of
    the pencil A + B - lambda I.

    Raises:
        HypothesisError: (alpha, beta) contains eigenvalues of A, or B is not PSD
    """
    base, perturbation = _pair(A, B)
    if not alpha < beta:
        raise PreconditionError("alpha must be smaller than beta", alpha=alpha, beta=beta)
    b_grid = list(config.perturb.b_grid) if b_grid is None else list(b_grid)
    refine = config.perturb.refine if refine is None else refine
    if not b_grid:
        raise PreconditionError("b_grid must not be empty")

    values = eigvalsh(base)
    tol = config.tolerances.kernel_rel * (1.0 + norm2(base))
    inside = values[(values > alpha + tol) & (values < beta - tol)]
    if inside.size:
        raise HypothesisError("(alpha, beta) is not a spectral gap of A", eigenvalues=inside.tolist())
    _check_psd(perturbation)

    def evaluate(b: float) -> tuple[float, float, float]:
        a = relative_bound_a(base, perturbation, b)
        return alpha_hat(alpha, a, b), a, b

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as executor:
            options = list(executor.map(evaluate, b_grid))
    else:
        options = [evaluate(b) for b in b_grid]
    best = min(options, key=lambda option: option[0])

    if refine:
        upper = max(max(b_grid), 1.0)
        result = scipy.optimize.minimize_scalar(
            lambda b: evaluate(b)[0], bounds=(0.0, upper), method="bounded"
        )
        refined = evaluate(float(result.x))
        if refined[0] < best[0]:
            logger.debug("Refined b=%s improves alpha_hat to %s", refined[2], refined[0])
            best = refined

    hat, a, b = best
    verdict = GapVerdict.CERTIFIED if hat < beta else GapVerdict.INAPPLICABLE
    cross_check = None
    if verdict is GapVerdict.CERTIFIED:
        combined = base + perturbation
        margin = 10.0 * config.tolerances.kernel_rel * (1.0 + norm2(combined) + abs(hat) + abs(beta))
        if hat + margin < beta - margin:
            cross_check = spectrum_in(ShiftedLinear(combined), Interval.closed(hat + margin, beta - margin))
            if cross_check.total_multiplicity:
                logger.error("Certified gap (%s, %s) contains eigenvalues of A + B", hat, beta)
                raise InternalConsistencyError(
                    "certified gap contains spectrum",
                    eigenvalues=cross_check.flat_eigenvalues(),
                )
        logger.info("Gap (%s, %s) certified with a=%s, b=%s", hat, beta, a, b)
    else:
        logger.warning("Gap bound inapplicable: alpha_hat=%s >= beta=%s", hat, beta)

    return GapCertificate(
        alpha=alpha,
        beta=beta,
        a=a,
        b=b,
        alpha_hat=hat,
        verdict=verdict,
        cross_check=cross_check,
    )


__all__ = ["relative_bound_a", "alpha_hat", "certify_gap"]
