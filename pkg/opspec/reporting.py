"""
Report emission: JSON envelopes, eigencurve CSV tables and SVG plots.

Report bytes are deterministic for a fixed configuration and seed: keys
are sorted, numbers are written with Python's shortest round-trip repr,
and ``timings`` can be masked for comparisons. Files are written
atomically (temporary file in the target directory, then rename).
"""

from __future__ import annotations

import io
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from .config_loader import config  # noqa: E402
from .families import OperatorFamily  # noqa: E402
from .linalg import eigvalsh  # noqa: E402
from .models import Interval, Report  # noqa: E402

logger = logging.getLogger(__name__)


def jsonable(value: Any) -> Any:
    """Convert models, numpy scalars/arrays and infinities to plain JSON values."""
    if isinstance(value, BaseModel):
        return jsonable(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(key): jsonable(item) for key, item in value.items()}
    if isinstance(value, list | tuple):
        return [jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float | np.floating):
        number = float(value)
        if math.isinf(number):
            return "+inf" if number > 0 else "-inf"
        if math.isnan(number):
            return None
        return number
    return value


def build_report(
    command: str,
    results: dict[str, Any],
    family: OperatorFamily | None = None,
    timings: dict[str, float] | None = None,
) -> Report:
    return Report(
        command=command,
        config=config.run,
        family_digest=family.digest() if family is not None else None,
        results=jsonable(results),
        timings=timings or {},
    )


def report_bytes(report: Report, mask_timings: bool = False) -> bytes:
    payload = jsonable(report)
    if mask_timings:
        payload["timings"] = {}
    return (json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")


def write_atomic(path: str | Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a temporary file and ``os.replace``."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    handle, temporary = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(handle, "wb") as f:
            f.write(data)
        os.replace(temporary, target)
    except BaseException:
        Path(temporary).unlink(missing_ok=True)
        raise
    logger.debug("Wrote %d bytes to %s", len(data), target)


# =========================================================================
# Eigencurves
# =========================================================================


@dataclass(frozen=True)
class CurveTable:
    """Sorted eigenvalues mu_1(lambda) <= ... <= mu_d(lambda) on a grid."""

    lams: np.ndarray
    curves: np.ndarray  # grid_n x d
    crossings: list[float]
    breakpoints: list[float]

    def zero_crossings(self) -> list[list[float]]:
        """
        Per curve, where the curve changes sign.

        Exact zeros on the grid are skipped when pairing signs, so a zero at a
        single grid point is reported at that point.
        """
        result = []
        for column in self.curves.T:
            nonzero = np.flatnonzero(column != 0.0)
            signs = np.sign(column[nonzero])
            flips = np.flatnonzero(signs[:-1] * signs[1:] < 0)
            result.append(
                [float(0.5 * (self.lams[nonzero[i]] + self.lams[nonzero[i + 1]])) for i in flips]
            )
        return result


def eigencurves(family: OperatorFamily, interval: Interval, grid_n: int | None = None) -> CurveTable:
    """
    Sample the eigenvalues of T(lambda) on a uniform grid.

    Branches are matched by sorted order; grid points where two adjacent
    sorted curves come within the kernel tolerance are reported as
    crossings, where that matching is ambiguous.
    """
    grid_n = config.grids.curves if grid_n is None else grid_n
    lams = interval.grid(grid_n)
    curves = np.array([eigvalsh(family.evaluate(lam)) for lam in lams])
    crossings = []
    if curves.shape[1] > 1:
        scale = config.tolerances.kernel_rel * (1.0 + np.max(np.abs(curves), axis=1))
        gaps = np.min(np.diff(curves, axis=1), axis=1)
        crossings = [float(lam) for lam, gap, tol in zip(lams, gaps, scale, strict=True) if gap <= tol]
    breakpoints = [b for b in family.breakpoints() if interval.contains(b)]
    return CurveTable(lams=lams, curves=curves, crossings=crossings, breakpoints=breakpoints)


def curves_csv(table: CurveTable) -> str:
    """CSV with header ``lambda,mu1,...,mud`` and 17 significant digits."""
    dim = table.curves.shape[1]
    lines = [",".join(["lambda", *[f"mu{k}" for k in range(1, dim + 1)]])]
    for lam, row in zip(table.lams, table.curves, strict=True):
        lines.append(",".join(f"{value:.17g}" for value in (lam, *row)))
    return "\n".join(lines) + "\n"


def curves_svg(table: CurveTable, title: str = "") -> bytes:
    """Polyline plot of the eigencurves with a rule at zero."""
    figure = Figure(figsize=(6.0, 4.0))
    axes = figure.add_subplot()
    for k, column in enumerate(table.curves.T, start=1):
        axes.plot(table.lams, column, linewidth=1.0, label=f"mu{k}")
    axes.axhline(0.0, color="black", linewidth=0.8)
    axes.set_xlabel("lambda")
    axes.set_ylabel("eigenvalues of T(lambda)")
    if title:
        axes.set_title(title)
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": "opspec", "svg.fonttype": "none"}):
        figure.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


__all__ = [
    "jsonable",
    "build_report",
    "report_bytes",
    "write_atomic",
    "CurveTable",
    "eigencurves",
    "curves_csv",
    "curves_svg",
]
