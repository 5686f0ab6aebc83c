"""
Maximal non-negative subspaces of the form t(gamma) at a resolvent point.

At gamma in the resolvent set, R^d splits into the positive and negative
spectral subspaces K+ and K- of T(gamma). Scaling each eigenvector by
|mu|^(-1/2) turns t(gamma) into |xi|^2 - |eta|^2 in the weighted
coordinates (xi, eta), and the maximal non-negative subspaces are exactly
the graphs {xi + C xi} of contractions C: K+ -> K-.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config_loader import config
from .errors import ContractionError, DimensionError, HypothesisError, NotInResolventError
from .families import OperatorFamily
from .linalg import SubspaceBasis, as_basis, compress, eigh, haar_orthogonal, lambda_min, norm2

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class KreinFrame:
    """
    Spectral splitting of T(gamma) with square-root weights.

    Attributes:
        gamma: Resolvent point
        k_plus: Orthonormal eigenvectors of T(gamma) with positive eigenvalues
        k_minus: Orthonormal eigenvectors with negative eigenvalues
        w_plus: sqrt of the positive eigenvalues
        w_minus: sqrt of the absolute negative eigenvalues
    """

    gamma: float
    k_plus: SubspaceBasis
    k_minus: SubspaceBasis
    w_plus: np.ndarray
    w_minus: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.k_plus.ambient_dim

    @property
    def dim_plus(self) -> int:
        return self.k_plus.dim

    @property
    def dim_minus(self) -> int:
        return self.k_minus.dim

    def weighted_plus(self) -> np.ndarray:
        """K+ diag(1/w+): maps xi to the ambient space."""
        return self.k_plus.cols / self.w_plus

    def weighted_minus(self) -> np.ndarray:
        return self.k_minus.cols / self.w_minus


@dataclass(frozen=True, eq=False)
class MaxNonnegSubspace:
    """Graph of a contraction over K+, in the weighted coordinates of ``frame``."""

    frame: KreinFrame
    contraction: np.ndarray
    basis: SubspaceBasis

    @property
    def dim(self) -> int:
        return self.basis.dim


def krein_frame(family: OperatorFamily, gamma: float) -> KreinFrame:
    """
    Split R^d by the sign of T(gamma).

    Raises:
        NotInResolventError: T(gamma) has an eigenvalue within the kernel tolerance of 0
    """
    values, vectors = eigh(family.evaluate(gamma))
    tol = config.tolerances.kernel_rel * (1.0 + float(np.max(np.abs(values))))
    if np.any(np.abs(values) <= tol):
        raise NotInResolventError(
            "gamma is not in the resolvent set",
            gamma=gamma,
            smallest=float(np.min(np.abs(values))),
        )
    plus = values > 0
    frame = KreinFrame(
        gamma=float(gamma),
        k_plus=SubspaceBasis(vectors.cols[:, plus]),
        k_minus=SubspaceBasis(vectors.cols[:, ~plus]),
        w_plus=np.sqrt(values[plus]),
        w_minus=np.sqrt(-values[~plus]),
    )
    logger.debug("Frame at gamma=%s: dim K+ = %d, dim K- = %d", gamma, frame.dim_plus, frame.dim_minus)
    return frame


def max_nonneg_from_contraction(frame: KreinFrame, contraction: np.ndarray) -> MaxNonnegSubspace:
    """
    Maximal non-negative subspace {xi + C xi} for a contraction C.

    Raises:
        DimensionError: C is not dim(K-) x dim(K+)
        ContractionError: ||C|| exceeds 1 beyond the configured slack
    """
    shape = (frame.dim_minus, frame.dim_plus)
    matrix = np.asarray(contraction, dtype=float)
    if matrix.size == 0 and 0 in shape:
        matrix = np.zeros(shape)
    if matrix.shape != shape:
        raise DimensionError("contraction must be dim(K-) x dim(K+)", shape=matrix.shape, expected=shape)
    size = norm2(matrix)
    if size > 1.0 + config.tolerances.contraction_slack:
        raise ContractionError("angular operator is not a contraction", norm=size)
    matrix = matrix.copy()
    matrix.setflags(write=False)

    if frame.dim_plus == 0:
        basis = SubspaceBasis.empty(frame.ambient_dim)
    else:
        basis = SubspaceBasis(frame.weighted_plus() + frame.weighted_minus() @ matrix)
    return MaxNonnegSubspace(frame=frame, contraction=matrix, basis=basis)


def canonical_subspace(frame: KreinFrame) -> MaxNonnegSubspace:
    """C = 0, i.e. the positive spectral subspace of T(gamma)."""
    return max_nonneg_from_contraction(frame, np.zeros((frame.dim_minus, frame.dim_plus)))


def contraction_of(frame: KreinFrame, subspace: SubspaceBasis | np.ndarray) -> np.ndarray:
    """
    Recover the angular operator of a maximal non-negative subspace.

    Weighted coordinates of the columns are xi = diag(w+) K+^T X and
    eta = diag(w-) K-^T X; then C = eta xi^-1.
    """
    basis = as_basis(subspace)
    if basis.dim != frame.dim_plus:
        raise DimensionError("subspace dimension differs from dim K+", dim=basis.dim, dim_plus=frame.dim_plus)
    if basis.dim == 0:
        return np.zeros((frame.dim_minus, 0))
    xi = frame.w_plus[:, None] * (frame.k_plus.cols.T @ basis.cols)
    eta = frame.w_minus[:, None] * (frame.k_minus.cols.T @ basis.cols)
    if np.linalg.cond(xi) > 1.0 / config.tolerances.rank:
        raise HypothesisError("subspace is not the graph of an operator over K+")
    if frame.dim_minus == 0:
        return np.zeros((0, frame.dim_plus))
    return scipy.linalg.solve(xi.T, eta.T).T


def sample_from_frame(
    frame: KreinFrame,
    rng: np.random.Generator,
    pin_singular_values: bool = False,
) -> MaxNonnegSubspace:
    """Draw C = U diag(s) V^T with Haar factors and s ~ U[0, 1] (or s = 1 when pinned)."""
    rank = min(frame.dim_plus, frame.dim_minus)
    left = haar_orthogonal(rng, frame.dim_minus)[:, :rank]
    right = haar_orthogonal(rng, frame.dim_plus)[:, :rank]
    singular = np.ones(rank) if pin_singular_values else rng.uniform(0.0, 1.0, rank)
    contraction = (left * singular) @ right.T
    return max_nonneg_from_contraction(frame, contraction)


def sample_max_nonneg(
    family: OperatorFamily,
    gamma: float,
    seed: int | np.random.SeedSequence | None = None,
    pin_singular_values: bool = False,
) -> MaxNonnegSubspace:
    """Random maximal t(gamma)-non-negative subspace, deterministic for a fixed seed."""
    seed = config.seed if seed is None else seed
    return sample_from_frame(krein_frame(family, gamma), np.random.default_rng(seed), pin_singular_values)


def is_nonneg(
    family: OperatorFamily,
    gamma: float,
    subspace: SubspaceBasis | np.ndarray,
    tol: float | None = None,
) -> bool:
    """True iff t(gamma) >= -tol on the subspace (the trivial subspace qualifies)."""
    basis = as_basis(subspace)
    if basis.dim == 0:
        return True
    value = family.evaluate(gamma)
    tol = config.tolerances.kernel_rel * (1.0 + norm2(value)) if tol is None else tol
    return lambda_min(compress(value, basis)) >= -tol


def is_maximal_nonneg(
    family: OperatorFamily,
    gamma: float,
    subspace: SubspaceBasis | np.ndarray,
    tol: float | None = None,
) -> bool:
    """Non-negative and of dimension dim K+ (the finite-dimensional maximality criterion)."""
    basis = as_basis(subspace)
    frame = krein_frame(family, gamma)
    return basis.dim == frame.dim_plus and is_nonneg(family, gamma, basis, tol)


__all__ = [
    "KreinFrame",
    "MaxNonnegSubspace",
    "krein_frame",
    "max_nonneg_from_contraction",
    "canonical_subspace",
    "contraction_of",
    "sample_from_frame",
    "sample_max_nonneg",
    "is_nonneg",
    "is_maximal_nonneg",
]
