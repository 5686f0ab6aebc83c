"""
Dense real-symmetric linear algebra substrate.

Eigendecomposition, spectral subspaces, compressions to subspaces,
inertia, and the direct-sum defect used by the decomposition verifier.
Everything here is pure and reentrant; eigensolves go through
``scipy.linalg.eigh`` (LAPACK, backward stable, deterministic for a fixed
input) and eigenvector signs are normalized so repeated runs produce
identical bases.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg

from .config_loader import config
from .errors import (
    AmbiguousWindowError,
    ContainmentError,
    ConvergenceError,
    DimensionError,
    DomainError,
    RankDeficiencyError,
)
from .models import Inertia, Interval, Matrix, matrix_rows


def sym_matrix(entries: np.ndarray | Sequence[Sequence[float]]) -> np.ndarray:
    """
    Validate a square finite matrix and return its exact symmetrization.

    ``0.5 * (M + M.T)`` is bitwise symmetric because floating point
    addition is commutative.
    """
    try:
        matrix = np.array(entries, dtype=float)
    except ValueError as exc:
        raise DimensionError("matrix rows have unequal lengths") from exc
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionError("expected a non-empty square matrix", shape=matrix.shape)
    if not np.all(np.isfinite(matrix)):
        raise DomainError("matrix entries must be finite")
    return 0.5 * (matrix + matrix.T)


def asymmetry(entries: np.ndarray | Sequence[Sequence[float]]) -> float:
    """Largest entrywise deviation from symmetry."""
    matrix = np.asarray(entries, dtype=float)
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.T)))


def norm2(matrix: np.ndarray) -> float:
    """Spectral norm (0 for empty matrices)."""
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def kernel_tol(matrix: np.ndarray, rel: float | None = None) -> float:
    """Default rank/kernel tolerance ``rel * (1 + ||M||)``."""
    rel = config.tolerances.kernel_rel if rel is None else rel
    return rel * (1.0 + norm2(matrix))


def _normalize_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip columns so that each column's largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[pivots, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def haar_orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed n x n orthogonal matrix (QR of a Gaussian matrix, sign corrected)."""
    if n == 0:
        return np.zeros((0, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """
    Full-column-rank d x k matrix representing a subspace of R^d.

    ``k == 0`` is allowed and represents the trivial subspace. The column
    matrix is stored read-only.
    """

    cols: np.ndarray

    def __post_init__(self) -> None:
        cols = np.array(self.cols, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.ndim != 2 or cols.shape[0] == 0:
            raise DimensionError("basis must be a d x k matrix with d >= 1", shape=cols.shape)
        if not np.all(np.isfinite(cols)):
            raise DomainError("basis entries must be finite")
        dim, k = cols.shape
        if k > dim:
            raise RankDeficiencyError("more columns than the ambient dimension", k=k, d=dim)
        if k:
            singular = scipy.linalg.svdvals(cols, check_finite=False)
            if singular[-1] <= config.tolerances.rank * max(1.0, singular[0]):
                raise RankDeficiencyError(
                    "basis columns are linearly dependent", sigma_min=float(singular[-1])
                )
        cols.setflags(write=False)
        object.__setattr__(self, "cols", cols)

    @classmethod
    def empty(cls, ambient_dim: int) -> SubspaceBasis:
        return cls(np.zeros((ambient_dim, 0)))

    @classmethod
    def identity(cls, ambient_dim: int) -> SubspaceBasis:
        return cls(np.eye(ambient_dim))

    @classmethod
    def from_vectors(cls, *vectors: Sequence[float] | np.ndarray) -> SubspaceBasis:
        return cls(np.column_stack([np.asarray(v, dtype=float) for v in vectors]))

    @classmethod
    def from_rows(cls, rows: Matrix, ambient_dim: int) -> SubspaceBasis:
        array = np.asarray(rows, dtype=float)
        if array.size == 0:
            return cls.empty(ambient_dim)
        return cls(array.reshape(ambient_dim, -1))

    @property
    def ambient_dim(self) -> int:
        return self.cols.shape[0]

    @property
    def dim(self) -> int:
        return self.cols.shape[1]

    @cached_property
    def _orthonormal(self) -> np.ndarray:
        if self.dim == 0:
            return np.zeros((self.ambient_dim, 0))
        q, _ = np.linalg.qr(self.cols)
        q.setflags(write=False)
        return q

    def orthonormal(self) -> np.ndarray:
        """Orthonormal d x k matrix with the same column span."""
        return self._orthonormal

    def projector(self) -> np.ndarray:
        q = self.orthonormal()
        return q @ q.T

    def residual(self, other: SubspaceBasis | np.ndarray) -> float:
        """Largest relative distance of ``other``'s columns from this span."""
        cols = other.cols if isinstance(other, SubspaceBasis) else np.asarray(other, dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape[0] != self.ambient_dim:
            raise DimensionError(
                "ambient dimensions differ", left=self.ambient_dim, right=cols.shape[0]
            )
        if cols.shape[1] == 0:
            return 0.0
        q = self.orthonormal()
        rest = cols - q @ (q.T @ cols)
        norms = np.linalg.norm(cols, axis=0)
        norms[norms == 0] = 1.0
        return float(np.max(np.linalg.norm(rest, axis=0) / norms))

    def contains(self, other: SubspaceBasis | np.ndarray, tol: float = 1e-10) -> bool:
        return self.residual(other) <= tol

    def extended(self, other: SubspaceBasis | np.ndarray) -> SubspaceBasis:
        """Span of both column sets (must stay linearly independent)."""
        extra = other.cols if isinstance(other, SubspaceBasis) else np.asarray(other, dtype=float)
        return SubspaceBasis(np.hstack([self.cols, extra]))

    def to_rows(self) -> Matrix:
        return matrix_rows(self.cols)


def as_basis(subspace: SubspaceBasis | np.ndarray) -> SubspaceBasis:
    return subspace if isinstance(subspace, SubspaceBasis) else SubspaceBasis(subspace)


def eigvalsh(matrix: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix."""
    try:
        return scipy.linalg.eigvalsh(matrix, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc


def eigh(matrix: np.ndarray | Sequence[Sequence[float]]) -> tuple[np.ndarray, SubspaceBasis]:
    """
    Eigendecomposition of a symmetric matrix.

    Returns ascending eigenvalues and an orthonormal eigenvector basis whose
    columns have their largest-magnitude entry positive.
    """
    sym = sym_matrix(matrix)
    try:
        values, vectors = scipy.linalg.eigh(sym, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc
    return values, SubspaceBasis(_normalize_signs(vectors))


def spectral_basis(
    matrix: np.ndarray,
    window: Interval,
    tol: float | None = None,
) -> SubspaceBasis:
    """
    Orthonormal basis of the spectral subspace of ``matrix`` for ``window``.

    Closed finite endpoints capture eigenvalues within ``tol`` of the endpoint
    (so ``[0, inf)`` contains the numerical kernel). An open finite endpoint
    closer than ``tol`` to an eigenvalue is ambiguous and rejected.
    """
    values, vectors = eigh(matrix)
    if tol is None:
        tol = config.tolerances.kernel_rel * (1.0 + float(np.max(np.abs(values))))
    mask = np.ones(values.shape, dtype=bool)

    if np.isfinite(window.lo):
        if window.lo_open:
            if np.any(np.abs(values - window.lo) <= tol):
                raise AmbiguousWindowError(
                    "open window endpoint within tolerance of an eigenvalue",
                    endpoint=window.lo,
                    tol=tol,
                )
            mask &= values > window.lo
        else:
            mask &= values >= window.lo - tol
    if np.isfinite(window.hi):
        if window.hi_open:
            if np.any(np.abs(values - window.hi) <= tol):
                raise AmbiguousWindowError(
                    "open window endpoint within tolerance of an eigenvalue",
                    endpoint=window.hi,
                    tol=tol,
                )
            mask &= values < window.hi
        else:
            mask &= values <= window.hi + tol

    return SubspaceBasis(vectors.cols[:, mask])


def compress(matrix: np.ndarray, subspace: SubspaceBasis | np.ndarray) -> np.ndarray:
    """
    Compression ``B^T M B`` to a subspace, B an orthonormal basis of it.

    ``x . (compressed x)`` equals the form of ``B x`` in the ambient space.
    """
    basis = as_basis(subspace)
    if basis.ambient_dim != matrix.shape[0]:
        raise DimensionError(
            "subspace and matrix dimensions differ",
            ambient_dim=basis.ambient_dim,
            matrix_dim=matrix.shape[0],
        )
    q = basis.orthonormal()
    compressed = q.T @ matrix @ q
    return 0.5 * (compressed + compressed.T)


def lambda_min(matrix: np.ndarray) -> float:
    """Smallest eigenvalue; +inf for the 0 x 0 matrix (empty infimum)."""
    if matrix.size == 0:
        return float("inf")
    return float(eigvalsh(matrix)[0])


def inertia(matrix: np.ndarray, tol: float | None = None) -> Inertia:
    """Counts of eigenvalues below -tol, within [-tol, tol], above tol."""
    values = eigvalsh(sym_matrix(matrix))
    if tol is None:
        tol = config.tolerances.kernel_rel * (1.0 + float(np.max(np.abs(values))))
    n_minus = int(np.count_nonzero(values < -tol))
    n_plus = int(np.count_nonzero(values > tol))
    return Inertia(n_minus=n_minus, n_zero=values.size - n_minus - n_plus, n_plus=n_plus)


def direct_sum_defect(bases: Sequence[SubspaceBasis]) -> float:
    """
    Smallest singular value of the concatenated, individually orthonormalized bases.

    Positive exactly when the subspaces form a direct sum spanning the whole
    space.
    """
    if not bases:
        raise DimensionError("at least one basis is required")
    ambient = bases[0].ambient_dim
    if any(basis.ambient_dim != ambient for basis in bases):
        raise DimensionError("bases live in different ambient spaces")
    total = sum(basis.dim for basis in bases)
    if total != ambient:
        raise DimensionError(
            "column count must equal the ambient dimension", columns=total, ambient=ambient
        )
    stacked = np.hstack([basis.orthonormal() for basis in bases])
    return float(scipy.linalg.svdvals(stacked, check_finite=False)[-1])


def complement_within(
    outer: SubspaceBasis, inner: SubspaceBasis, tol: float = 1e-10
) -> SubspaceBasis:
    """Orthogonal complement of ``inner`` inside ``span(outer)`` (Euclidean inner product)."""
    if inner.ambient_dim != outer.ambient_dim:
        raise DimensionError("bases live in different ambient spaces")
    q = outer.orthonormal()
    if inner.dim == 0:
        return SubspaceBasis(q)
    residual = outer.residual(inner)
    if residual > tol:
        raise ContainmentError("subspace is not contained in the outer subspace", residual=residual)
    coords = q.T @ inner.orthonormal()
    null = scipy.linalg.null_space(coords.T)
    if null.shape[1] == 0:
        return SubspaceBasis.empty(outer.ambient_dim)
    return SubspaceBasis(q @ null)


__all__ = [
    "SubspaceBasis",
    "as_basis",
    "sym_matrix",
    "asymmetry",
    "norm2",
    "kernel_tol",
    "haar_orthogonal",
    "eigvalsh",
    "eigh",
    "spectral_basis",
    "compress",
    "lambda_min",
    "inertia",
    "direct_sum_defect",
    "complement_within",
]
