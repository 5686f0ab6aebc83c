"""
Built-in demo corpus.

Every family here is addressable as ``builtin:<name>`` wherever a family
file is accepted. Entries also carry a search interval whose endpoints lie
in the resolvent set and, when one exists, a resolvent point ``gamma``
below the spectrum of interest, so that tests and the CLI can run every
check offline without choosing parameters.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FamilyParseError
from .families import (
    OperatorFamily,
    PiecewiseLinearDiagonal,
    Polynomial,
    SchurComplement,
    ShiftedLinear,
    parse_family,
)
from .linalg import haar_orthogonal
from .models import Interval

logger = logging.getLogger(__name__)

BUILTIN_PREFIX = "builtin:"
ROTATION_SEED = 20240607


def rotated(matrix: np.ndarray, seed: int = ROTATION_SEED) -> np.ndarray:
    """Q M Q^T for a Haar orthogonal Q drawn from ``seed``."""
    q = haar_orthogonal(np.random.default_rng(seed), matrix.shape[0])
    result = q @ matrix @ q.T
    return 0.5 * (result + result.T)


def remark_iii(d: int) -> PiecewiseLinearDiagonal:
    """
    Truncation of the piecewise linear counterexample family.

    Entry k is 1 for lambda <= 0, 1 - k lambda on (0, 2/k) and -1 beyond,
    so the spectrum is {1/k : k = 1..d}.
    """
    entries = [[[0.0, 1.0], [2.0 / k, -1.0]] for k in range(1, d + 1)]
    return PiecewiseLinearDiagonal(entries, Interval.closed(-1.0, 3.0))


def remark_i(a: tuple[float, ...] = (1e-3, 0.5, 1.0)) -> Polynomial:
    """T(lambda) = -lambda^2 I - diag(a): every form is negative, no real spectrum."""
    dim = len(a)
    return Polynomial(
        [-np.diag(a), np.zeros((dim, dim)), -np.eye(dim)], Interval.closed(-2.0, 2.0)
    )


def quadratic_2x2() -> Polynomial:
    """T(lambda) = K - lambda D - lambda^2 M with K = [[5,1],[1,3]], D = diag(2,1), M = I."""
    K = np.array([[5.0, 1.0], [1.0, 3.0]])
    D = np.diag([2.0, 1.0])
    return Polynomial([K, -D, -np.eye(2)], Interval.closed(0.0, 4.0))


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    description: str
    build: Callable[[], OperatorFamily]
    interval: tuple[float, float]
    gamma: float | None = None
    has_spectrum: bool = True

    def family(self) -> OperatorFamily:
        return self.build()

    def search_interval(self) -> Interval:
        return Interval.closed(*self.interval)


CORPUS: dict[str, CorpusEntry] = {
    entry.name: entry
    for entry in [
        CorpusEntry(
            "linear",
            "A - lambda I with A = diag(1, 2, 3)",
            lambda: ShiftedLinear(np.diag([1.0, 2.0, 3.0])),
            (0.0, 4.0),
            gamma=0.5,
        ),
        CorpusEntry(
            "multiplicity",
            "A - lambda I with A = diag(1, 2, 2, 5)",
            lambda: ShiftedLinear(np.diag([1.0, 2.0, 2.0, 5.0])),
            (0.0, 6.0),
            gamma=0.0,
        ),
        CorpusEntry(
            "gap-linear",
            "A - lambda I with A = diag(-1, 2), gap (-1, 2)",
            lambda: ShiftedLinear(np.diag([-1.0, 2.0])),
            (-2.0, 3.0),
            gamma=0.0,
        ),
        CorpusEntry(
            "linear-rotated",
            "linear family conjugated by a fixed Haar rotation",
            lambda: ShiftedLinear(rotated(np.diag([1.0, 2.0, 3.0]))),
            (0.0, 4.0),
            gamma=0.5,
        ),
        CorpusEntry(
            "multiplicity-rotated",
            "multiplicity family conjugated by a fixed Haar rotation",
            lambda: ShiftedLinear(rotated(np.diag([1.0, 2.0, 2.0, 5.0]))),
            (0.0, 6.0),
            gamma=0.0,
        ),
        CorpusEntry(
            "quadratic-scalar",
            "1 - lambda - lambda^2 on [-0.25, 4]",
            lambda: Polynomial([[[1.0]], [[-1.0]], [[-1.0]]], Interval.closed(-0.25, 4.0)),
            (0.0, 2.0),
            gamma=0.0,
        ),
        CorpusEntry(
            "quadratic-2x2",
            "K - lambda D - lambda^2 I on [0, 4]",
            quadratic_2x2,
            (0.0, 4.0),
            gamma=0.0,
        ),
        CorpusEntry(
            "schur",
            "Schur complement of [[diag(1,2), B], [B^T, 4]] with B = (0.5, 0.5)^T",
            lambda: SchurComplement(
                np.diag([1.0, 2.0]), [[0.5], [0.5]], [[4.0]], Interval.closed(-2.0, 3.5)
            ),
            (-1.0, 3.0),
            gamma=-1.0,
        ),
        CorpusEntry(
            "remark-i",
            (
                "-lambda^2 I - diag(1e-3, 0.5, 1): negative definite, empty real spectrum; "
                "(VM) holds only vacuously (eps < 1e-3), and the dual bound cannot show it "
                "at lambda = 0 where T' vanishes, so vm reports Unknown there"
            ),
            remark_i,
            (-1.0, 1.0),
            gamma=None,
            has_spectrum=False,
        ),
        CorpusEntry(
            "remark-i-scalar",
            "-lambda^2 - 1e-3; (VM) holds only vacuously (eps < 1e-3), reported Unknown at lambda = 0",
            lambda: remark_i((1e-3,)),
            (-1.0, 1.0),
            gamma=None,
            has_spectrum=False,
        ),
        *[
            CorpusEntry(
                f"remark-iii-{d}",
                f"piecewise linear diagonal truncation with spectrum {{1/k : k <= {d}}}",
                lambda d=d: remark_iii(d),
                (-0.5, 2.5),
                gamma=0.0,
            )
            for d in (4, 8, 16)
        ],
    ]
}


def names() -> list[str]:
    return list(CORPUS)


def builtin(name: str) -> OperatorFamily:
    """Build the named corpus family."""
    try:
        entry = CORPUS[name]
    except KeyError:
        raise FamilyParseError(
            f"unknown builtin family '{name}'", available=", ".join(CORPUS)
        ) from None
    return entry.family()


def load_family(ref: str | Path) -> OperatorFamily:
    """Load a family from ``builtin:<name>`` or a JSON file path."""
    text = str(ref)
    if text.startswith(BUILTIN_PREFIX):
        return builtin(text[len(BUILTIN_PREFIX):])
    path = Path(ref)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FamilyParseError(f"cannot read family file: {exc.strerror}", path=text) from exc
    logger.debug("Loading family from %s", path)
    return parse_family(data)


__all__ = [
    "BUILTIN_PREFIX",
    "CORPUS",
    "CorpusEntry",
    "builtin",
    "load_family",
    "names",
    "quadratic_2x2",
    "remark_i",
    "remark_iii",
    "rotated",
]
