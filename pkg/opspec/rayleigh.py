"""
Generalized Rayleigh functional.

p(x) is the unique zero of lambda -> x.T(lambda)x on the scan interval.
Under (A3) that scalar function is positive before its zero and negative
after it, so a uniform grid finds a bracket and sign-only bisection
refines it. The same locator computes the subspace minimum through
g(lambda) = lambda_min of the compression of T(lambda): p(x) >= lambda
for every x in S exactly when g(lambda) >= 0.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from enum import Enum

import numpy as np
import scipy.optimize

from .config_loader import config
from .errors import A3InconsistencyError, DimensionError, DomainError, PreconditionError
from .families import OperatorFamily, as_vector
from .linalg import SubspaceBasis, as_basis, compress, lambda_min, norm2
from .models import ExtendedReal, Interval

logger = logging.getLogger(__name__)


class Position(str, Enum):
    """Where lambda sits relative to p(x)."""

    BELOW = "below"  # lambda < p(x), form positive
    AT = "at"
    ABOVE = "above"  # lambda > p(x), form negative


def _resolve_scan(family: OperatorFamily, scan: Interval | None) -> Interval:
    scan = family.scan_interval() if scan is None else scan
    if not scan.is_bounded:
        raise PreconditionError("scan interval must be bounded", lo=scan.lo, hi=scan.hi)
    if not family.domain.contains_interval(scan):
        raise PreconditionError("scan interval leaves the family domain", lo=scan.lo, hi=scan.hi)
    return scan


def _band(family: OperatorFamily, lam: float, weight: float) -> float:
    return config.tolerances.at_band_rel * (1.0 + norm2(family.evaluate(lam))) * weight


def locate_crossing(
    family: OperatorFamily,
    fn: Callable[[float], float],
    scan: Interval,
    grid_n: int | None = None,
    weight: float = 1.0,
) -> ExtendedReal:
    """
    Zero of a scalar function that crosses from positive to negative at most once.

    Args:
        family: Family the function is built from (for domain and tolerance scale)
        fn: lambda -> value, a form or a smallest compressed eigenvalue
        scan: Bounded sub-interval of the domain
        grid_n: Bracketing grid size (default ``grids.rayleigh``)
        weight: Scale of ``fn`` relative to ||T|| (``||x||^2`` for forms)

    Returns:
        The zero, or NegInf / PosInf when ``fn`` is negative / positive on the
        whole scan. Sentinels are flagged ``clipped`` when the scan stops short
        of the domain on that side.

    Raises:
        A3InconsistencyError: ``fn`` turns positive again after being negative
    """
    grid_n = config.grids.rayleigh if grid_n is None else grid_n
    grid = scan.grid(grid_n)
    values = np.array([fn(lam) for lam in grid])
    noise = _band(family, grid[grid.size // 2], weight)

    negative = np.flatnonzero(values < 0)
    if negative.size:
        first = negative[0]
        rebound = np.flatnonzero(values[first:] > noise)
        if rebound.size:
            later = first + rebound[0]
            raise A3InconsistencyError(
                "form changes sign twice on the scan",
                negative_at=float(grid[first]),
                positive_at=float(grid[later]),
                first_bracket=(float(grid[max(first - 1, 0)]), float(grid[first])),
                second_bracket=(float(grid[later - 1]), float(grid[later])),
            )

    if not negative.size:
        zeros = np.flatnonzero(values == 0)
        if zeros.size:
            return ExtendedReal.finite(grid[zeros[0]])
        # Positive on the whole scan; a zero right at an excluded upper end
        if values[-1] <= _band(family, grid[-1], weight):
            return ExtendedReal.finite(scan.hi, at_boundary=scan.hi_open)
        return ExtendedReal.pos_inf(clipped=scan.hi < family.domain.hi)

    first = negative[0]
    if first == 0:
        if values[0] >= -_band(family, grid[0], weight):
            return ExtendedReal.finite(scan.lo, at_boundary=scan.lo_open)
        return ExtendedReal.neg_inf(clipped=scan.lo > family.domain.lo)
    if values[first - 1] == 0:
        return ExtendedReal.finite(grid[first - 1])

    lo, hi = float(grid[first - 1]), float(grid[first])
    xtol = config.tolerances.bisection_rel * (1.0 + max(abs(lo), abs(hi)))

    # Sign-only bisection: scaling fn never changes the iterates
    def sign(lam: float) -> float:
        return float(np.sign(fn(lam)))

    root = scipy.optimize.bisect(sign, lo, hi, xtol=xtol, maxiter=200)
    logger.debug("Crossing bracketed in [%s, %s], refined to %s", lo, hi, root)
    return ExtendedReal.finite(root)


def rayleigh_p(
    family: OperatorFamily,
    x: np.ndarray,
    scan: Interval | None = None,
    grid_n: int | None = None,
) -> ExtendedReal:
    """
    Generalized Rayleigh functional p(x).

    Raises:
        DomainError: ``x`` is the zero vector
        A3InconsistencyError: the form of ``x`` crosses zero twice
    """
    vector = as_vector(x, family.dim)
    weight = float(vector @ vector)
    if weight == 0.0:
        raise DomainError("Rayleigh functional is undefined at x = 0")
    scan = _resolve_scan(family, scan)
    return locate_crossing(family, lambda lam: family.form(lam, vector), scan, grid_n, weight)


def min_rayleigh_over(
    family: OperatorFamily,
    subspace: SubspaceBasis | np.ndarray,
    scan: Interval | None = None,
    grid_n: int | None = None,
) -> ExtendedReal:
    """
    inf of p(x) over the non-zero vectors of ``subspace``.

    Computed as the zero of g(lambda) = lambda_min(B^T T(lambda) B).
    """
    basis = as_basis(subspace)
    if basis.dim == 0:
        raise DimensionError("subspace must be non-trivial")
    if basis.ambient_dim != family.dim:
        raise DimensionError("subspace and family dimensions differ")
    scan = _resolve_scan(family, scan)
    return locate_crossing(
        family, lambda lam: lambda_min(compress(family.evaluate(lam), basis)), scan, grid_n
    )


def sign_equivalence_check(family: OperatorFamily, x: np.ndarray, lam: float) -> Position:
    """Classify lambda against p(x) by the sign of x.T(lambda)x (with an At band)."""
    vector = as_vector(x, family.dim)
    weight = float(vector @ vector)
    if weight == 0.0:
        raise DomainError("Rayleigh functional is undefined at x = 0")
    value = family.form(lam, vector)
    band = _band(family, lam, weight)
    if value > band:
        return Position.BELOW
    if value < -band:
        return Position.ABOVE
    return Position.AT


__all__ = [
    "Position",
    "locate_crossing",
    "rayleigh_p",
    "min_rayleigh_over",
    "sign_equivalence_check",
]
