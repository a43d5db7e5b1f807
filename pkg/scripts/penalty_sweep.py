"""Slack behaviour of the coupled power-control problem across penalty
weights and rate requirements.

With P = 100 and the default gains every pair gets about 1.128 nats at full
power, so R = 1.2 is infeasible and the slacks cannot vanish for any rho;
for feasible R they do once rho is large enough.

    python3 scripts/penalty_sweep.py --iters 2000
"""

import argparse

import numpy as np

from ssca.core import PenaltyConfig
from ssca.driver import RunConfig, run_ssca
from ssca.subproblem import InnerSolverConfig
from ssca.wireless import NetworkModel, build_problem7, sample_rates


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    tail = max(1, args.iters // 10)
    print(f"{'R':>5} {'rho':>5} {'mean slack (last 10%)':>22} {'min rate':>9}  p*")
    for R in (1.0, 1.1, 1.2):
        model = NetworkModel.symmetric(5, rate=R)
        for rho in (0.5, 2.0, 8.0):
            cfg = RunConfig(max_outer_iters=args.iters, min_outer_iters=args.iters, seed=args.seed,
                            penalty=PenaltyConfig(rho), inner=InnerSolverConfig(prox_tau=1e-4))
            res = run_ssca(build_problem7(model), cfg)
            slack = res.trace.column("slack_sum")[-tail:].mean()
            rates = sample_rates(model, res.x_star, 100_000, seed=args.seed + 1).mean(axis=0)
            print(f"{R:>5.2f} {rho:>5.1f} {slack:>22.3e} {rates.min():>9.4f}  {np.round(res.x_star, 2)}")


if __name__ == "__main__":
    main()
