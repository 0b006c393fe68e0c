"""Command-line interface: align, tag, gradcheck and paths."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from pydantic import ValidationError

from .config import FLOAT_FORMAT, LOG_FORMAT, REGULARIZERS, Settings, get_settings
from .dag import dp_grad
from .dtw import dtw_grad, hard_dtw, squared_euclidean_costs
from .errors import InputFileError, SmoothedDPError
from .gradcheck import format_report, run_gradcheck
from .models import RunConfig
from .oracle import enumerate_paths, path_probabilities
from .parser import (
    expected_path_frame,
    format_node_path,
    read_dag_json,
    read_matrix_csv,
    read_potentials_json,
    write_matrix_csv,
)
from .viterbi import state_marginals, viterbi_grad

logger = logging.getLogger(__name__)


def _print_value(value: float) -> None:
    print(f"value={value:.17g}")


def _emit(matrix, out: Optional[Path]) -> None:
    write_matrix_csv(out if out is not None else sys.stdout, matrix)


def hard_output_path(out: Path) -> Path:
    """``align.csv`` -> ``align.hard.csv``."""
    return out.with_suffix(".hard.csv")


def cmd_align(config: RunConfig) -> int:
    """Soft (and optionally hard) alignment of two series or of a cost matrix."""
    if config.cost is not None:
        theta = read_matrix_csv(config.cost, header=config.header)
    else:
        series_a = read_matrix_csv(config.series_a, header=config.header)
        series_b = read_matrix_csv(config.series_b, header=config.header)
        theta = squared_euclidean_costs(series_a, series_b)

    value, alignment, _ = dtw_grad(theta, config.regularizer)
    _print_value(value)
    _emit(alignment, config.out)
    if config.hard:
        hard = hard_dtw(theta)
        logger.info(f"hard alignment cost {hard.value:.17g}")
        _emit(hard.alignment, hard_output_path(config.out) if config.out is not None else None)
    return 0


def cmd_tag(config: RunConfig) -> int:
    """State marginals of a potential tensor."""
    theta = read_potentials_json(config.input)
    value, marginals, _ = viterbi_grad(theta, config.regularizer)
    _print_value(value)
    _emit(state_marginals(marginals), config.out)
    return 0


def cmd_gradcheck(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Finite-difference and oracle suites; exit 0 only if every check passes."""
    settings = settings or get_settings()
    report = run_gradcheck(
        config.regularizers,
        size=config.sizes,
        trials=config.trials,
        seed=config.seed,
        epsilon=settings.fd_epsilon,
        max_concurrency=settings.max_concurrency,
    )
    print(format_report(report))
    if config.out is not None:
        report.to_csv(config.out, index=False, float_format=FLOAT_FORMAT)
    passed = bool(report["passed"].all())
    print("PASS" if passed else "FAIL")
    return 0 if passed else 1


def cmd_paths(config: RunConfig, settings: Optional[Settings] = None) -> int:
    """Enumerate every path with its probability, then the expected path."""
    settings = settings or get_settings()
    dag = read_dag_json(config.input, node_cap=settings.node_cap)
    paths = enumerate_paths(dag, cap=config.cap)
    value, expected, q = dp_grad(dag, config.regularizer)
    probabilities = path_probabilities(paths, q)

    _print_value(value)
    print(f"paths={len(paths)}")
    for nodes, probability in zip(paths.node_sequences(), probabilities):
        print(f"{format_node_path(nodes)}\t{probability:.17g}")
    frame = expected_path_frame(dag, expected)
    if config.out is not None:
        frame.to_csv(config.out, index=False, float_format=FLOAT_FORMAT)
    else:
        print(frame.to_csv(index=False, float_format=FLOAT_FORMAT), end="")
    return 0


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "align": cmd_align,
    "tag": cmd_tag,
    "gradcheck": cmd_gradcheck,
    "paths": cmd_paths,
}


def _add_shared_arguments(parser: argparse.ArgumentParser, settings: Settings, repeat_reg: bool = False) -> None:
    if repeat_reg:
        parser.add_argument(
            "--reg",
            dest="regs",
            action="append",
            choices=REGULARIZERS,
            help="Regularizer, repeatable (default: entropy and l2)",
        )
    else:
        parser.add_argument(
            "--reg",
            choices=REGULARIZERS,
            default=settings.default_reg,
            help=f"Regularizer (default: {settings.default_reg})",
        )
    parser.add_argument(
        "--gamma",
        type=float,
        default=settings.default_gamma,
        help=f"Temperature, strictly positive (default: {settings.default_gamma})",
    )
    parser.add_argument("--out", type=Path, help="Output file (default: stdout)")
    parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0)")
    parser.add_argument("--header", action="store_true", help="Skip one header line in CSV inputs")
    parser.add_argument(
        "--log-level",
        default=settings.log_level,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
        help=f"Logging level on stderr (default: {settings.log_level})",
    )


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothed-dp",
        description="Differentiable dynamic programming: smoothed DTW, Viterbi and DAG paths",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s align --cost costs.csv --reg l2 --gamma 0.1 --out align.csv --hard
  %(prog)s align --a series_a.csv --b series_b.csv
  %(prog)s tag potentials.json --out marginals.csv
  %(prog)s gradcheck --reg entropy --reg l2 --seed 7
  %(prog)s paths diamond.json --cap 1000
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    # Align command
    align_parser = subparsers.add_parser("align", help="Soft alignment of two time series")
    _add_shared_arguments(align_parser, settings)
    align_parser.add_argument("--cost", type=Path, help="Precomputed N_A x N_B cost matrix CSV")
    align_parser.add_argument("--a", dest="series_a", type=Path, help="Time series A CSV (one observation per row)")
    align_parser.add_argument("--b", dest="series_b", type=Path, help="Time series B CSV (one observation per row)")
    align_parser.add_argument(
        "--hard",
        action="store_true",
        help="Also write the unregularized alignment to <out stem>.hard.csv",
    )

    # Tag command
    tag_parser = subparsers.add_parser("tag", help="State marginals of a Viterbi potential tensor")
    _add_shared_arguments(tag_parser, settings)
    tag_parser.add_argument("input", type=Path, help="Potential tensor JSON")

    # Gradcheck command
    gradcheck_parser = subparsers.add_parser("gradcheck", help="Run the finite-difference and oracle suites")
    _add_shared_arguments(gradcheck_parser, settings, repeat_reg=True)
    gradcheck_parser.add_argument(
        "--sizes",
        type=int,
        default=4,
        help="Largest instance dimension (default: 4)",
    )
    gradcheck_parser.add_argument(
        "--trials",
        type=int,
        default=settings.gradcheck_trials,
        help=f"Trials per suite and regularizer (default: {settings.gradcheck_trials})",
    )

    # Paths command
    paths_parser = subparsers.add_parser("paths", help="Enumerate the paths of a small DAG")
    _add_shared_arguments(paths_parser, settings)
    paths_parser.add_argument("input", type=Path, help="DAG JSON (1-based nodes)")
    paths_parser.add_argument(
        "--cap",
        type=int,
        default=settings.path_cap,
        help=f"Refuse to enumerate more paths than this (default: {settings.path_cap})",
    )
    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    fields = {key: value for key, value in vars(args).items() if key in RunConfig.model_fields}
    if args.command == "gradcheck":
        fields["regs"] = list(args.regs or REGULARIZERS)
    return RunConfig(**{key: value for key, value in fields.items() if value is not None})


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the process exit code."""
    settings = get_settings()
    parser = build_parser(settings)
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return 2

    logging.basicConfig(level=args.log_level, format=LOG_FORMAT, stream=sys.stderr)

    try:
        config = _run_config(args)
    except ValidationError as exc:
        error = exc.errors()[0]
        message = f"{'.'.join(str(part) for part in error['loc']) or 'arguments'}: {error['msg']}"
        print(InputFileError(message).to_json(), file=sys.stderr)
        return 2

    try:
        return COMMANDS[config.command](config)
    except SmoothedDPError as exc:
        logger.error(exc.message)
        print(exc.to_json(), file=sys.stderr)
        return exc.exit_code
    except KeyboardInterrupt:
        print("\n\nOperation cancelled by user", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
