"""Run the coupled (sequential SSCA) and decoupled (parallel SSCA) power-control
campaigns with the bundled configuration and print a comparison table.

    python3 scripts/reproduce_table.py --paths 10 --out runs/table

Writes ``<out>/problem7`` and ``<out>/problem8`` (per-path traces and
summaries) plus ``convergence.csv`` in each, the median/quartile relative
error curve for plotting.
"""

import argparse
from dataclasses import replace
from pathlib import Path

from ssca.bench import bundled_config_path, emit_plot_data, load_config, run_campaign, trace_files


def row(name, s):
    med = s.median_iterations
    mean = s.mean_iterations
    return (f"{name:<22} {med if med != float('inf') else 'not-reached':>12} {mean:>10.1f} "
            f"{s.fraction_zero_slack:>9.2f} {s.min_margin:>10.4f} {s.mean_sum_rate:>9.4f} "
            f"{1e3 * s.seconds_per_iter:>8.2f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=10)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default="runs/table")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    base = load_config(bundled_config_path())
    out = Path(args.out)
    summaries = {}
    for problem in ("problem7", "problem8"):
        cfg = replace(base, problem=problem, algorithm=None)
        d = out / problem
        print(f"running {problem} ({cfg.algorithm}), {args.paths} paths -> {d}", flush=True)
        summaries[problem] = run_campaign(cfg, d, paths=args.paths, seed=args.seed, jobs=args.jobs)
        emit_plot_data(trace_files(d), d / "convergence.csv")

    print()
    print(f"{'':<22} {'median its':>12} {'mean its':>10} {'s*=0 frac':>9} {'min margin':>10} "
          f"{'sum rate':>9} {'ms/iter':>8}")
    print(row("coupled / Alg. 1", summaries["problem7"]))
    print(row("decoupled / Alg. 2", summaries["problem8"]))


if __name__ == "__main__":
    main()
