"""Command-line entry point: ``rbmh run | tables | figures | selftest``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ConfigError, ExperimentConfig, load_config, preset
from .experiment import run_experiment
from .output import emit_figure_data, read_report, write_report, write_tables

log = logging.getLogger("rbmh")

# flags that override config keys of the same name
_OVERRIDES = {
    "model": str, "scales": str, "N": int, "R": int, "k": str, "h": str, "lam": float,
    "data": str, "init": str, "max_proposals": int, "product_floor": float, "name": str,
}


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rbmh", description="Weighted Metropolis-Hastings experiment harness")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write report.json")
    src = run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="JSON file of flat config keys")
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    run.add_argument("--seed", type=int, required=True, help="base seed (required)")
    run.add_argument("--output-dir", "-o", dest="output_dir")
    run.add_argument("--workers", type=int, default=1)
    for key, typ in _OVERRIDES.items():
        run.add_argument(f"--{key}", type=typ, default=None)
    for key in ("oracle", "control_variate", "trace"):
        run.add_argument(f"--{key.replace('_', '-')}", dest=key, action=argparse.BooleanOptionalAction,
                         default=None)
    run.add_argument("--tables", action="store_true", help="also render tables")
    run.add_argument("--figures", action="store_true", help="also write envelope files")

    tab = sub.add_parser("tables", help="render a report as aligned text and CSV tables")
    tab.add_argument("report", help="report.json or its directory")
    tab.add_argument("--output-dir", "-o", dest="output_dir")
    tab.add_argument("--name")

    fig = sub.add_parser("figures", help="write per-iteration envelope files from a report")
    fig.add_argument("report", help="report.json or its directory")
    fig.add_argument("--output-dir", "-o", dest="output_dir")

    sub.add_parser("selftest", help="run the fast oracle checks")
    return ap


def _config_from_args(args) -> ExperimentConfig:
    base = load_config(args.config) if args.config else preset(args.preset)
    d = {f: getattr(base, f) for f in base.__dataclass_fields__}
    for key in list(_OVERRIDES) + ["oracle", "control_variate", "trace", "output_dir", "workers"]:
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    if isinstance(d.get("init"), str):
        try:
            d["init"] = float(d["init"])
        except ValueError:
            pass
    d["seed"] = args.seed
    return ExperimentConfig(**d).validate()


def _report_dir(path: str) -> Path:
    p = Path(path)
    return p if p.is_dir() else p.parent


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            cfg = _config_from_args(args)
            outdir = cfg.resolved_output_dir()
            report = run_experiment(cfg)
            path = write_report(report, outdir)
            print(path)
            if args.tables:
                for p in write_tables(report, outdir):
                    print(p)
            if args.figures:
                for p in emit_figure_data(report, outdir):
                    print(p)
        elif args.command == "tables":
            rep = read_report(args.report)
            for p in write_tables(rep, args.output_dir or _report_dir(args.report), args.name):
                print(p)
        elif args.command == "figures":
            rep = read_report(args.report)
            for p in emit_figure_data(rep, args.output_dir or _report_dir(args.report)):
                print(p)
        elif args.command == "selftest":
            from .selftest import run_selftest
            return 0 if run_selftest() else 1
    except (ConfigError, OSError, ValueError, KeyError) as exc:
        print(f"rbmh {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
