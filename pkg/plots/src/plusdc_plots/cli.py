"""Command line for rendering figures from fitter CLI outputs.

Subcommands: ``consistency`` (error-decay curves), ``cv`` (per-fold
score series, optionally several runs side by side), ``age`` (fitted
radial-basis age-effect curve).  Exit codes: 0 on success, 64 on usage
or data errors.
"""

from __future__ import annotations

import argparse
import sys

from .figures import plot_age_effect, plot_consistency, plot_cv
from .readers import SchemaError, read_params_json

EXIT_OK = 0
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_formats(text: str) -> tuple[str, ...]:
    formats = tuple(part.strip() for part in text.split(",") if part.strip())
    if not formats:
        raise SchemaError("--formats needs at least one of png, svg")
    return formats


def _parse_basis(text: str) -> list[tuple[float, float]]:
    """Basis grammar: comma-separated center:decay pairs, e.g. 25:0.01,30:0.01."""
    basis = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 2:
            raise SchemaError(f"--basis entries are center:decay pairs, got {part!r}")
        try:
            basis.append((float(pieces[0]), float(pieces[1])))
        except ValueError as exc:
            raise SchemaError(f"--basis entry {part!r} is not numeric") from exc
    if not basis:
        raise SchemaError("--basis needs at least one center:decay pair")
    return basis


def cmd_consistency(args) -> int:
    payload = plot_consistency(args.input, args.out, formats=_parse_formats(args.formats))
    print(f"wrote {args.out} ({len(payload['panels'])} panel(s))")
    return EXIT_OK


def cmd_cv(args) -> int:
    labels = (
        [part.strip() for part in args.labels.split(",")]
        if args.labels
        else [f"run {i + 1}" for i in range(len(args.input))]
    )
    if len(labels) != len(args.input):
        raise SchemaError(
            f"got {len(args.input)} input file(s) but {len(labels)} label(s)"
        )
    payload = plot_cv(
        list(zip(labels, args.input)), args.out, formats=_parse_formats(args.formats)
    )
    print(f"wrote {args.out} ({len(payload['panels'])} panel(s))")
    return EXIT_OK


def cmd_age(args) -> int:
    if (args.params is None) == (args.coefficients is None):
        raise SchemaError("age needs exactly one of --params or --coefficients")
    if args.params is not None:
        coefficients = read_params_json(args.params)["v"]
    else:
        try:
            coefficients = [float(p) for p in args.coefficients.split(",") if p.strip()]
        except ValueError as exc:
            raise SchemaError(
                f"--coefficients expects comma-separated numbers, got {args.coefficients!r}"
            ) from exc
    plot_age_effect(
        coefficients,
        _parse_basis(args.basis),
        args.out,
        t_min=args.t_min,
        t_max=args.t_max,
        n_points=args.points,
        formats=_parse_formats(args.formats),
    )
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="plots", description="Figures for fitter CLI outputs.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("consistency", help="error-decay curves from a study CSV")
    p.add_argument("--in", dest="input", required=True, help="consistency CSV")
    p.add_argument("--out", required=True, help="output base path (suffixes added)")
    p.add_argument("--formats", default="png,svg", help="comma-separated image formats")
    p.set_defaults(func=cmd_consistency)

    p = sub.add_parser("cv", help="per-fold score series from CV CSVs")
    p.add_argument(
        "--in", dest="input", required=True, nargs="+",
        help="one or more cross-validation CSVs (one series each)",
    )
    p.add_argument("--labels", default=None, help="comma-separated series labels")
    p.add_argument("--out", required=True, help="output base path (suffixes added)")
    p.add_argument("--formats", default="png,svg", help="comma-separated image formats")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("age", help="fitted radial-basis age-effect curve")
    p.add_argument("--params", default=None, help="parameter JSON (coefficients = v)")
    p.add_argument(
        "--coefficients", default=None,
        help="comma-separated coefficients (alternative to --params)",
    )
    p.add_argument(
        "--basis", required=True,
        help="comma-separated center:decay pairs, e.g. 25:0.01,25:0.03",
    )
    p.add_argument("--t-min", type=float, default=15.0, help="curve range start")
    p.add_argument("--t-max", type=float, default=45.0, help="curve range end")
    p.add_argument("--points", type=int, default=301, help="curve evaluation points")
    p.add_argument("--out", required=True, help="output base path (suffixes added)")
    p.add_argument("--formats", default="png,svg", help="comma-separated image formats")
    p.set_defaults(func=cmd_age)

    return parser


def main(argv: list[str] | None = None) -> int:
    raw_argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(raw_argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
