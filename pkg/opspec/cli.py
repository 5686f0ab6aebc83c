"""
Command-line entry point for opspec.

Configures logging, applies ``--config`` / ``--seed`` overrides, and
dispatches to thin command handlers that delegate to the numerical
modules. Every command writes a JSON report to stdout or ``--out``.

Exit codes: 0 success, 1 verified failure (a check did not pass or an
internal consistency check fired), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from pydantic import TypeAdapter, ValidationError

from . import corpus
from .config_loader import config
from .errors import FamilyParseError, InsufficientSpectrumError, NoGapError, OpspecError
from .families import OperatorFamily, serialize_family, validate_A3, validate_A3_strict
from .models import Interval, Matrix
from .perturb import certify_gap
from .reporting import build_report, curves_csv, curves_svg, eigencurves, report_bytes, write_atomic
from .spectra import crossing_slopes, decomposition_check, resolvent_certify, spectrum_in, vm_certify
from .varbounds import triple_lower_bound, verify_equality

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


@dataclass
class Outcome:
    """What a command handler hands back to :func:`main`."""

    results: dict[str, Any]
    family: OperatorFamily | None = None
    exit_code: int = 0
    extra_files: dict[str, bytes] = field(default_factory=dict)


def _interval(values: Sequence[float]) -> Interval:
    lo, hi = values
    try:
        return Interval.closed(lo, hi)
    except ValidationError as exc:
        raise OpspecError(f"invalid interval: {exc.errors()[0]['msg']}") from exc


def _load_matrix(path: str) -> Matrix:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FamilyParseError(f"cannot read matrix file: {exc.strerror}", path=path) from exc
    try:
        return TypeAdapter(Matrix).validate_json(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        pointer = "".join(f"/{part}" for part in first["loc"])
        raise FamilyParseError(f"invalid matrix file: {first['msg']}", pointer=pointer, path=path) from exc


# =========================================================================
# Command handlers
# =========================================================================


def cmd_spectrum(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    report = spectrum_in(family, _interval(args.interval), tol=args.tol)
    return Outcome(
        results={"spectrum": report, "crossing_slopes": crossing_slopes(family, report)},
        family=family,
    )


def cmd_bounds(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    try:
        equality = verify_equality(family, args.gamma, args.n, args.samples, args.seed)
    except (InsufficientSpectrumError, NoGapError) as exc:
        logger.warning("%s", exc)
        sampled = triple_lower_bound(family, args.gamma, args.n, args.samples, args.seed)
        return Outcome(
            results={"error": exc.detail, "context": exc.context, "sampled": sampled},
            family=family,
            exit_code=exc.exit_code,
        )
    return Outcome(
        results={"equality": equality, "passed": equality.passed},
        family=family,
        exit_code=0 if equality.passed else 1,
    )


def cmd_certify(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    certificate = resolvent_certify(family, args.mu1, args.mu2, eps=args.eps, delta=args.delta)
    return Outcome(
        results={"certificate": certificate},
        family=family,
        exit_code=0 if certificate.certified else 1,
    )


def cmd_perturb(args: argparse.Namespace) -> Outcome:
    A = _load_matrix(args.A)
    B = _load_matrix(args.B)
    certificate = certify_gap(A, B, args.alpha, args.beta, b_grid=args.b_grid, refine=args.refine or None)
    return Outcome(
        results={"gap": certificate},
        exit_code=0 if certificate.verdict.value == "certified" else 1,
    )


def cmd_decompose(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    report = decomposition_check(family, args.alpha, args.beta)
    return Outcome(results={"decomposition": report}, family=family, exit_code=0 if report.passed else 1)


def cmd_vm(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    certificate = vm_certify(family, _interval(args.interval), args.eps, args.delta, grid_n=args.grid)
    return Outcome(
        results={"certificate": certificate},
        family=family,
        exit_code=0 if certificate.certified else 1,
    )


def cmd_curves(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    table = eigencurves(family, _interval(args.interval), args.grid)
    outcome = Outcome(
        results={
            "grid_n": int(table.lams.size),
            "zero_crossings": table.zero_crossings(),
            "crossings": table.crossings,
            "breakpoints": table.breakpoints,
        },
        family=family,
    )
    if args.csv:
        outcome.extra_files[args.csv] = curves_csv(table).encode("utf-8")
        outcome.results["csv"] = args.csv
    if args.svg:
        outcome.extra_files[args.svg] = curves_svg(table, title=args.family)
        outcome.results["svg"] = args.svg
    return outcome


def cmd_validate(args: argparse.Namespace) -> Outcome:
    family = corpus.load_family(args.family)
    interval = _interval(args.interval) if args.interval else None
    if args.strict:
        if interval is None:
            raise OpspecError("--strict needs --interval with endpoints in the resolvent set")
        report = validate_A3_strict(family, interval, sample_count=args.samples, grid_n=args.grid)
    else:
        report = validate_A3(family, sample_count=args.samples, interval=interval, grid_n=args.grid)
    return Outcome(results={"validation": report}, family=family, exit_code=0 if report.passed else 1)


def cmd_corpus(args: argparse.Namespace) -> Outcome:
    listing = {name: entry.description for name, entry in corpus.CORPUS.items()}
    outcome = Outcome(results={"families": listing})
    if args.export:
        for name in corpus.names():
            path = str(Path(args.export) / f"{name}.json")
            outcome.extra_files[path] = serialize_family(corpus.builtin(name)) + b"\n"
        outcome.results["exported"] = sorted(outcome.extra_files)
    return outcome


# =========================================================================
# Parser
# =========================================================================


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--seed", type=lambda text: int(text, 0), help="base seed (OPSPEC_SEED wins)")
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="opspec",
        description="Spectral analysis of self-adjoint operator functions T(lambda).",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name: str, handler: Callable[[argparse.Namespace], Outcome], help_text: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    family_help = "family JSON file or builtin:<name>"

    sub = command("spectrum", cmd_spectrum, "eigenvalues of the family in an interval")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--interval", nargs=2, type=float, required=True, metavar=("A", "B"))
    sub.add_argument("--tol", type=float)

    sub = command("bounds", cmd_bounds, "triple variational bounds and the witness equality")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--gamma", type=float, required=True)
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--samples", type=int)

    sub = command("certify", cmd_certify, "resolvent-point certificate for mu2")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--mu1", type=float, required=True)
    sub.add_argument("--mu2", type=float, required=True)
    sub.add_argument("--eps", type=float)
    sub.add_argument("--delta", type=float)

    sub = command("perturb", cmd_perturb, "spectral gap of A + B for a PSD perturbation B")
    sub.add_argument("A", help="JSON file with the symmetric matrix A")
    sub.add_argument("B", help="JSON file with the PSD matrix B")
    sub.add_argument("--alpha", type=float, required=True)
    sub.add_argument("--beta", type=float, required=True)
    sub.add_argument("--b-grid", type=float, nargs="+")
    sub.add_argument("--refine", action="store_true")

    sub = command("decompose", cmd_decompose, "verify the three-way spectral decomposition")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--alpha", type=float, required=True)
    sub.add_argument("--beta", type=float, required=True)

    sub = command("vm", cmd_vm, "check the Virozub-Matsaev condition")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--interval", nargs=2, type=float, required=True, metavar=("A", "B"))
    sub.add_argument("--eps", type=float, required=True)
    sub.add_argument("--delta", type=float, required=True)
    sub.add_argument("--grid", type=int)

    sub = command("curves", cmd_curves, "eigenvalues of T(lambda) along a grid")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--interval", nargs=2, type=float, required=True, metavar=("A", "B"))
    sub.add_argument("--grid", type=int)
    sub.add_argument("--csv", help="write the curve table as CSV")
    sub.add_argument("--svg", help="write an SVG plot")

    sub = command("validate", cmd_validate, "scan the family for (A3) violations")
    sub.add_argument("family", help=family_help)
    sub.add_argument("--interval", nargs=2, type=float, metavar=("A", "B"))
    sub.add_argument("--samples", type=int)
    sub.add_argument("--grid", type=int)
    sub.add_argument("--strict", action="store_true", help="also require negative slopes at eigenvalues")

    sub = command("corpus", cmd_corpus, "list or export the built-in families")
    sub.add_argument("--export", metavar="DIR", help="write every family as DIR/<name>.json")

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.config:
            config.reload(args.config)
        if args.seed is not None:
            config.override({"sampling": {"seed": args.seed}})
        # Handlers read the effective seed (environment override included)
        args.seed = config.seed
    except OpspecError as exc:
        print(f"opspec: error: {exc}", file=sys.stderr)
        return exc.exit_code

    logging.basicConfig(
        level=args.log_level or config.log_level,
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
    started = time.perf_counter()
    try:
        outcome = args.handler(args)
    except OpspecError as exc:
        logger.error("%s failed: %s", args.command, exc)
        print(f"opspec: error: {exc}", file=sys.stderr)
        return exc.exit_code
    elapsed = time.perf_counter() - started

    report = build_report(args.command, outcome.results, outcome.family, {"total_seconds": elapsed})
    data = report_bytes(report)
    for path, payload in outcome.extra_files.items():
        write_atomic(path, payload)
    if args.out:
        write_atomic(args.out, data)
    else:
        sys.stdout.write(data.decode("utf-8"))
    return outcome.exit_code


__all__ = ["main", "build_parser", "Outcome"]
