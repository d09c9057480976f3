"""Command-line driver.

Exit codes: 0 success, 1 input problems (I/O, parse, invalid values),
2 domain errors (e.g. a pole on the imaginary axis), 64 usage errors.
"""

from __future__ import annotations

import argparse
import sys

from . import io
from .demos import EXPERIMENTS, default_manifest, load_manifest, parse_grid, run_experiment
from .distances import (
    freq_distance,
    frequency_ensemble_from_systems,
    time_distance,
)
from .errors import DomainError, InvalidArgument, ParseError, SysdistError
from .gap import gap_metric, nu_gap

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DOMAIN = 2
EXIT_USAGE = 64

DEFAULT_GRID = "0.01:100:200:log"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p, grid=False):
    p.add_argument("--seed", type=int, help="override the manifest seed")
    p.add_argument("--q", type=float, help="transport cost exponent (>= 1)")
    if grid:
        p.add_argument("--grid", help="frequency grid as min:max:M[:log|linear]")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sysdist", description="Distances between stochastic SISO LTI systems.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        _common(p, grid=True)
        p.add_argument("--manifest", help="experiment manifest (JSON); defaults to the shipped one")
        p.add_argument("--out", help="output directory")
        p.add_argument("--N", type=int, help="override the sample count")

    p = sub.add_parser("gap", help="gap metric between two model files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--method", choices=("hankel", "laguerre"), default="hankel")

    p = sub.add_parser("nugap", help="nu-gap between two model files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--grid", default=DEFAULT_GRID)

    p = sub.add_parser("freq-dist", help="frequency-domain distance between two ensemble files")
    p.add_argument("first")
    p.add_argument("second")
    _common(p, grid=True)

    p = sub.add_parser("time-dist", help="time-domain distance between two ensemble files")
    p.add_argument("first")
    p.add_argument("second")
    _common(p)
    return parser


def _load_model(path):
    d = io.read_json(path)
    if isinstance(d, dict) and "family" in d:
        return io.family_from_dict(d["family"], f"{path}: family").nominal()
    return io.model_from_dict(d, str(path))


def _load_freq_ensemble(path, grid_text):
    d = io.read_json(path)
    if isinstance(d, dict) and "omegas" in d:
        return io.freq_ensemble_from_dict(d, str(path))
    ens = io.ensemble_from_dict(d, str(path))
    return frequency_ensemble_from_systems(ens, parse_grid(grid_text or DEFAULT_GRID).build())


def _print_json(obj) -> None:
    sys.stdout.write(io.dumps(obj))


def _run_demo(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else default_manifest(args.command)
    if manifest.experiment != args.command:
        raise InvalidArgument(f"manifest is for {manifest.experiment!r}, not {args.command!r}")
    grid = parse_grid(args.grid) if args.grid else None
    out_dir = args.out or manifest.output or f"{args.command}-out"
    manifest = manifest.with_overrides(seed=args.seed, q=args.q, grid=grid, N=args.N)
    res = run_experiment(manifest, out_dir)
    print(res["summary"])
    return EXIT_OK


def _run_compute(args) -> int:
    if args.command == "gap":
        r = gap_metric(_load_model(args.first), _load_model(args.second), method=args.method)
        _print_json({"gap": r.value, "directed_12": r.directed_12, "directed_21": r.directed_21})
    elif args.command == "nugap":
        r = nu_gap(_load_model(args.first), _load_model(args.second), parse_grid(args.grid).build())
        _print_json({"nugap": r.value, "winding_ok": r.winding_ok, "argmax_omega": r.argmax_omega})
    elif args.command == "freq-dist":
        q = 1.0 if args.q is None else args.q
        fe1 = _load_freq_ensemble(args.first, args.grid)
        fe2 = _load_freq_ensemble(args.second, args.grid)
        r = freq_distance(fe1, fe2, q)
        _print_json(
            {"distance": r.value, "lower_bound": r.lower_bound, "upper_bound": r.upper_bound, "argmax_omega": r.argmax_omega, "q": q}
        )
    else:
        q = 1.0 if args.q is None else args.q
        e1 = io.ensemble_from_dict(io.read_json(args.first), args.first)
        e2 = io.ensemble_from_dict(io.read_json(args.second), args.second)
        r = time_distance(e1, e2, q)
        _print_json(
            {
                "distance": r.value,
                "lower_bound": r.lower_bound,
                "upper_bound": r.upper_bound,
                "nominal_gap": r.bound_details["nominal_gap"],
                "q": q,
            }
        )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in EXPERIMENTS:
            return _run_demo(args)
        return _run_compute(args)
    except DomainError as exc:
        print(f"sysdist: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ParseError as exc:
        print(f"sysdist: parse error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (InvalidArgument, SysdistError) as exc:
        print(f"sysdist: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"sysdist: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
