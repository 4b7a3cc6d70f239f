"""Sampled condition constants: word-pair 1/d^2 scaling and the Gaussian RSC pass rate."""
import numpy as np

from gstl.conditions import check_rsc_gaussian_identity, estimate_rwc, estimate_smoothness
from gstl.sensing import word_pair_ensemble_full


def main():
    for d in (3, 5, 8, 12):
        ens = word_pair_ensemble_full(d, 1)
        lo, hi = estimate_rwc(ens, 1)
        print(f"word-pair d={d:2d}: alpha={lo:.6g} beta={hi:.6g} "
              f"smooth={estimate_smoothness(ens, 1):.6g} 1/d^2={1 / d**2:.6g}")
    u = np.random.default_rng(0).standard_normal((15, 3))
    frac = check_rsc_gaussian_identity(15, 3, 600, u, trials=200, seed=0)
    print(f"Gaussian RSC pass fraction (d=15, r=3, n=600): {frac:.3f}")


if __name__ == "__main__":
    main()
