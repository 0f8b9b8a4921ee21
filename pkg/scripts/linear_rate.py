"""Empirical outer-loop contraction of MB-SARAH-RBB against the predicted rho_m.

For each (b, b_H, m) the step scale gamma is set to half of mu*b_H/L, the
step-size condition and rho_m = b_H/(gamma (m+1)) are evaluated, and the mean
ratio ||grad P(w_s)||^2 / ||grad P(w_{s-1})||^2 over seeds and outer loops is
printed next to them.

    python scripts/linear_rate.py --seeds 20
"""
import argparse

import numpy as np

from mbsarah.data import SyntheticSpec, generate_synthetic, normalize_rows
from mbsarah.objective import LogisticL2
from mbsarah.solvers import Method, SolverConfig, run
from mbsarah.stepsize import RBBRule
from mbsarah.theory import TheoryInputs, check_condition_13, rho_m

GRID = [(100, 10, 200), (50, 10, 400), (200, 20, 400), (20, 10, 100)]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--d", type=int, default=20)
    ap.add_argument("--lam", type=float, default=0.01)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--outer", type=int, default=5)
    args = ap.parse_args()

    obj = LogisticL2(normalize_rows(generate_synthetic(SyntheticSpec(args.n, args.d))), args.lam)
    c = obj.constants()
    print(f"L = {c.L:.4g}, mu = {c.mu:.4g}, n = {c.n}")
    print(f"{'b':>5} {'b_H':>5} {'m':>5} {'gamma':>8} {'cond LHS':>10} {'rho_m':>8} {'mean ratio':>11}")
    for b, b_H, m in GRID:
        gamma = 0.5 * c.mu * b_H / c.L
        t = TheoryInputs(c.L, c.mu, c.n, b, b_H, gamma, m)
        lhs, _ = check_condition_13(t)
        ratios = []
        for seed in range(args.seeds):
            cfg = SolverConfig(Method.MB_SARAH_RBB, m=m, b=b, outer_count=args.outer, seed=seed,
                               step_rule=RBBRule(b_H=b_H, gamma=gamma))
            tr = run(obj, cfg)
            g = np.array([tr.initial_grad_norm_sq] + list(tr.grad_norms_sq))
            ratios.extend(g[1:] / g[:-1])
        print(f"{b:>5} {b_H:>5} {m:>5} {gamma:>8.4f} {lhs:>10.4f} {rho_m(t):>8.4f} {np.mean(ratios):>11.3e}")


if __name__ == "__main__":
    main()
