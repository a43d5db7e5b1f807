"""Command-line entry point: ``ssca run | plot | validate``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .bench import (OUTPUT_ENV, PROBLEMS, ConfigError, bundled_config_path, emit_plot_data, load_config,
                    resolve_out_dir, run_campaign, trace_files)


def _load(path):
    if path == "paper_sec5":
        path = bundled_config_path()
    return load_config(path)


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if args.problem is not None:
        cfg = replace(cfg, problem=args.problem, algorithm=args.algorithm)
    elif args.algorithm is not None:
        cfg = replace(cfg, algorithm=args.algorithm)
    out = resolve_out_dir(args.out)

    def progress(p):
        its = "not-reached" if p.iterations is None else p.iterations
        print(f"path {p.path:3d}  iterations={its}  slack={p.slack_sum:.3g}  "
              f"min_margin={p.min_margin:.4f}  elapsed={p.elapsed_s:.1f}s", flush=True)

    summary = run_campaign(cfg, out, paths=args.paths, seed=args.seed, jobs=args.jobs,
                           progress=None if args.quiet else progress)
    print(json.dumps(summary.to_dict(), indent=2))
    print(f"wrote {out}")
    return 0


def cmd_plot(args) -> int:
    files = trace_files(args.inp)
    if not files:
        print(f"error: no path_*.csv traces in {args.inp}", file=sys.stderr)
        return 2
    emit_plot_data(files, args.out)
    print(f"wrote {args.out} from {len(files)} traces")
    return 0


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    print(json.dumps(cfg.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ssca", description="Stochastic SCA experiment runner.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a multi-path campaign")
    r.add_argument("--config", required=True, help="JSON config file, or 'paper_sec5' for the bundled one")
    r.add_argument("--paths", type=int, default=None)
    r.add_argument("--seed", type=int, default=None, help="master seed (default: run.seed)")
    r.add_argument("--out", default=None, help=f"output directory (default: ${OUTPUT_ENV} or ./runs)")
    r.add_argument("--problem", choices=PROBLEMS, default=None, help="override the configured problem")
    r.add_argument("--algorithm", choices=("ssca", "parallel"), default=None)
    r.add_argument("--jobs", type=int, default=1, help="paths run concurrently")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="emit convergence table from traces")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    v = sub.add_parser("validate", help="check a config file")
    v.add_argument("--config", required=True)
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
