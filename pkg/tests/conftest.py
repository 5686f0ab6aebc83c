import pathlib
import sys

import numpy as np
import pytest

# Ensure repo root on sys.path for direct module imports when running tests locally.
ROOT = pathlib.Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from opspec.config_loader import SEED_ENV, config  # noqa: E402
from opspec.families import ShiftedLinear  # noqa: E402


@pytest.fixture(autouse=True)
def _fresh_config(monkeypatch, tmp_path):
    """Every test starts from built-in defaults, away from any opspec.yaml or OPSPEC_* env."""
    monkeypatch.delenv(SEED_ENV, raising=False)
    monkeypatch.delenv("OPSPEC_CONFIG", raising=False)
    monkeypatch.chdir(tmp_path)
    config.reload()
    yield
    config.reload()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(rng: np.random.Generator, dim: int, scale: float = 1.0) -> np.ndarray:
    matrix = rng.standard_normal((dim, dim)) * scale
    return 0.5 * (matrix + matrix.T)


def random_spectrum_matrix(rng: np.random.Generator, eigenvalues) -> np.ndarray:
    """Q diag(eigenvalues) Q^T with a random orthogonal Q."""
    values = np.asarray(eigenvalues, dtype=float)
    q, _ = np.linalg.qr(rng.standard_normal((values.size, values.size)))
    matrix = (q * values) @ q.T
    return 0.5 * (matrix + matrix.T)


class BumpFamily(ShiftedLinear):
    """T(lambda) = (lambda^2 - 1) I: negative inside (-1, 1), positive outside, so (A3) fails."""

    def _evaluate(self, lam):
        return (lam * lam - 1.0) * np.eye(self.dim)

    def _derivative(self, lam):
        return 2.0 * lam * np.eye(self.dim)
