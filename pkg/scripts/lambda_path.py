"""Active rows and TL error along the lambda grid, averaged over seeds.

    python scripts/lambda_path.py [--seeds 10]
"""
import argparse

import numpy as np

from gstl.align import error_frobenius_theta
from gstl.factor import FactorProblem, fit_burer_monteiro
from gstl.sensing import SyntheticSpec, generate_synthetic
from gstl.transfer import TransferProblem, fit_transfer


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    grid = np.logspace(-3, 1, 9)
    active = np.zeros((args.seeds, grid.size))
    err = np.zeros_like(active)
    for seed in range(args.seeds):
        inst = generate_synthetic(SyntheticSpec(seed=seed))
        u_p = fit_burer_monteiro(FactorProblem(inst.proxy_ensemble, inst.proxy_obs, 5)).u
        for k, lam in enumerate(grid):
            sol = fit_transfer(TransferProblem(inst.gold_ensemble, inst.gold_obs, u_p, lam))
            active[seed, k] = len(sol.active_rows)
            err[seed, k] = error_frobenius_theta(sol.u_g_hat, inst.u_g_star)
    print("lambda,mean_active_rows,mean_frob_theta_error")
    for lam, a, e in zip(grid, active.mean(0), err.mean(0)):
        print(f"{lam:.4g},{a:.2f},{e:.4f}")


if __name__ == "__main__":
    main()
