"""Swapped-context fixture: how often each method puts every swapped word in the top 10%.

    python scripts/run_domain_words.py [--seeds 20] [--lam 3]
"""
import argparse

import numpy as np

from gstl.experiment import domain_word_trial


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--lam", type=float, default=3.0)
    args = ap.parse_args()
    tl, mi = [], []
    for seed in range(args.seeds):
        a, b, s = domain_word_trial(seed, lam=args.lam)
        tl.append(a)
        mi.append(b)
        print(f"seed {seed:2d}  tl {a}/{s}  mittens {b}/{s}")
    tl, mi = np.array(tl), np.array(mi)
    print(f"all hit: tl {np.mean(tl == s):.2f}  mittens {np.mean(mi == s):.2f}")
    print(f"mean hits: tl {tl.mean():.2f}  mittens {mi.mean():.2f}")


if __name__ == "__main__":
    main()
