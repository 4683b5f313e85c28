"""Command line entry point: ``capcoherence run|bounds|plot|verify-equivalence``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .coherence import verify_structural_equivalence
from .config import BUNDLED, bundled_config_path, load_config, parse_seeds
from .experiments import (
    ResultTable,
    bounds_text,
    compare_bounds,
    emit_plot_data,
    run_experiment,
    velocity_sweep,
)


def _config_path(arg: str) -> Path:
    """A file path, or the name of a bundled scenario."""
    path = Path(arg)
    if not path.exists() and arg in BUNDLED:
        return bundled_config_path(arg)
    return path


def _cmd_run(args) -> int:
    seeds = parse_seeds(args.seeds) if args.seeds else None
    table, status = run_experiment(_config_path(args.config), args.strategy, seeds, out=args.out)
    print(table.to_text())
    if args.out:
        print(f"results written to {args.out}")
    if status:
        print("bound violation detected", file=sys.stderr)
    return status


def _cmd_bounds(args) -> int:
    path = _config_path(args.config)
    rows = compare_bounds(path)
    print(bounds_text(rows))
    if args.velocity_sweep:
        print("\nRCC velocity sweep (v, predicted, observed per-capability max):")
        for v, predicted, observed in velocity_sweep(path):
            print(f"  v={v:<6} predicted={predicted:g} observed={observed:g}")
    return 1 if any(r.verdict == "Violated" for r in rows) else 0


def _cmd_plot(args) -> int:
    table = ResultTable.read(args.results)
    out = args.out or Path(args.results).with_suffix(".csv")
    emit_plot_data(table, out)
    print(f"plot data written to {out}")
    return 0


def _cmd_verify(args) -> int:
    report = verify_structural_equivalence()
    print("\n".join(report.lines()))
    return 0 if report.verdict else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capcoherence", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="batch-run strategies on a scenario config")
    p.add_argument("config", help=f"config path or bundled name ({', '.join(BUNDLED)})")
    p.add_argument("--strategy", default="all", choices=["all", "eager", "lazy", "lease", "rcc"])
    p.add_argument("--seeds", help="seed range a..b (default: the config's seeds)")
    p.add_argument("--out", help="write line-delimited JSON results here")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bounds", help="predicted vs observed damage bounds")
    p.add_argument("config")
    p.add_argument("--velocity-sweep", action="store_true", help="also run RCC at v = 10, 100, 10000")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("plot", help="emit bar-chart data from a results file")
    p.add_argument("results")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("verify-equivalence", help="enumerate the MESI correspondence")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
