"""Command line entry point.

Subcommands: ``run <config>``, ``compare <dir_a> <dir_b>``, ``verify`` and
``render <dir>``. Exit codes: 0 success, 1 invariant failure or regression,
2 bad configuration or input. ``INHOMVOL_SEED`` overrides a config's seeds
with consecutive seeds starting at that value.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiments.compare import ComparisonError, compare_runs
from .experiments.config import ConfigError, load_spec, seed_from_env
from .experiments.properties import run_suite
from .experiments.runner import read_csv, render_dir, run_experiment

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _cmd_run(args) -> int:
    spec = load_spec(args.config, seed_from_env())
    out = run_experiment(spec, args.out)
    print(f"wrote {out}")
    if spec.experiment == "property-suite":
        _, rows = read_csv(out / "properties.csv")
        print((out / "report.txt").read_text(), end="")
        return EXIT_OK if all(r[1] == "True" for r in rows) else EXIT_FAIL
    return EXIT_OK


def _cmd_compare(args) -> int:
    rep = compare_runs(args.dir_a, args.dir_b)
    print(rep.to_text(), end="")
    return EXIT_FAIL if rep.regressed(args.tol) else EXIT_OK


def _cmd_verify(args) -> int:
    seed = seed_from_env()
    results = run_suite(seed=args.seed if seed is None else seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _cmd_render(args) -> int:
    d = Path(args.dir)
    if not d.is_dir():
        raise ConfigError(f"no such run directory: {d}")
    written = render_dir(d)
    if not written:
        print(f"nothing to render in {d}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="inhomvol", description="Mean-volatility risk-averse RL experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("compare", help="diff two run directories")
    p.add_argument("dir_a")
    p.add_argument("dir_b")
    p.add_argument("--tol", type=float, default=1e-9, help="largest distance that is not a regression")
    p.set_defaults(func=_cmd_compare)
    p = sub.add_parser("verify", help="run the property suite")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)
    p = sub.add_parser("render", help="redraw SVG figures from a run directory")
    p.add_argument("dir")
    p.set_defaults(func=_cmd_render)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, ComparisonError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
