"""Sampled probes of the regularity conditions on a measurement operator.

Exact restricted constants require optimizing over low-rank sets, which is
intractable in general. Every estimator here evaluates the defining ratio on
random directions and reports the extreme values seen, i.e. an inner
approximation: ``alpha_hat >= alpha`` and ``beta_hat <= beta``.
"""
import math
from dataclasses import dataclass

import numpy as np

from .core import l21_norm
from .sensing import apply_operator, gaussian_ensemble

__all__ = [
    "ConditionEstimate",
    "estimate_rwc",
    "estimate_qcc",
    "qcc_ratio",
    "estimate_smoothness",
    "rsc_c6_identity",
    "check_rsc_gaussian_identity",
    "estimate_conditions",
]


@dataclass(frozen=True)
class ConditionEstimate:
    """Sampled bounds; ``kappa_hat`` is NaN when no support was given."""
    alpha_hat: float
    beta_hat: float
    kappa_hat: float
    smoothness_hat: float
    samples: int
    seed: int

    def rows(self):
        names = ("rwc_alpha", "rwc_beta", "qcc_kappa", "smoothness_beta")
        vals = (self.alpha_hat, self.beta_hat, self.kappa_hat, self.smoothness_hat)
        return [(f"{n} (sampled bound)", v, self.samples, self.seed)
                for n, v in zip(names, vals)]


def _apply_many(ens, zs):
    """``A(Z)`` for a stack of matrices; returns shape ``(len(zs), n)``."""
    zs = np.asarray(zs)
    if ens.kind == "word_pair":
        return zs[:, ens.pairs[:, 0], ens.pairs[:, 1]]
    flat = zs.reshape(len(zs), -1)
    out = np.empty((len(zs), ens.n))
    for start, blk in ens.blocks():
        out[:, start:start + len(blk)] = flat @ blk.T
    return out


def _low_rank_ratios(ens, r, samples, seed):
    if samples < 1:
        raise ValueError("samples must be at least 1")
    d = ens.d
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((samples, d, r))
    b = rng.standard_normal((samples, d, r))
    zs = a @ np.swapaxes(b, 1, 2)
    zs /= np.linalg.norm(zs, axis=(1, 2))[:, None, None]
    az = _apply_many(ens, zs)
    # dividing by ||Z||_F^2 keeps the ratio exact even if normalization rounds
    return np.sum(az * az, axis=1) / ens.n / np.sum(zs * zs, axis=(1, 2))


def estimate_rwc(ens, r, samples=200, seed=0):
    """Min and max of ``(1/n)||A(Z)||^2`` over random unit rank-``r`` ``Z = A B^T``."""
    ratios = _low_rank_ratios(ens, r, samples, seed)
    return float(ratios.min()), float(ratios.max())


def estimate_smoothness(ens, r, samples=200, seed=0):
    """Largest sampled ``(1/n)||A(Z)||^2`` over unit rank-``r`` ``Z``.

    For ``r == 1`` every basis matrix ``E_lk`` is probed as well.
    """
    beta = float(_low_rank_ratios(ens, r, samples, seed).max())
    if r == 1:
        d = ens.d
        if ens.kind == "word_pair":
            hits = np.bincount(ens.pairs[:, 0] * d + ens.pairs[:, 1], minlength=d * d)
            col = hits.astype(np.float64)
        else:
            col = np.zeros(d * d)
            for _, blk in ens.blocks():
                col += np.sum(blk * blk, axis=0)
        beta = max(beta, float(col.max()) / ens.n)
    return beta


def _qcc_matrix(u_star, delta):
    return delta @ u_star.T + u_star @ delta.T + delta @ delta.T


def qcc_ratio(ens, u_star, support, delta):
    """``(1/n)||A(Delta U*^T + U* Delta^T + Delta Delta^T)||^2 s / (sum_J ||Delta^j||)^2``."""
    support = np.asarray(support, dtype=np.intp)
    on = float(np.sum(np.linalg.norm(delta[support], axis=1)))
    if on == 0.0:
        raise ValueError("delta has zero mass on the support")
    az = apply_operator(ens, _qcc_matrix(u_star, delta))
    return float(az @ az) / ens.n * len(support) / on**2


def estimate_qcc(ens, u_star, support_j, samples=200, seed=0, cone=7.0,
                 on_support_only=False):
    """Smallest sampled QCC ratio over the cone ``sum_off <= cone * sum_on``.

    Each sample draws a Gaussian ``Delta`` and rescales its off-support block
    by ``u * cone * sum_on / sum_off`` with ``u ~ Uniform(0, 1)``.
    """
    u_star = np.asarray(u_star, dtype=np.float64)
    support = np.unique(np.asarray(support_j, dtype=np.intp))
    if support.size == 0:
        raise ValueError("support must be non-empty")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    d, r = u_star.shape
    off = np.setdiff1d(np.arange(d), support)
    rng = np.random.default_rng(seed)
    best = math.inf
    taken = 0
    while taken < samples:
        delta = rng.standard_normal((d, r))
        on_mass = float(np.sum(np.linalg.norm(delta[support], axis=1)))
        if on_mass == 0.0:
            continue
        if on_support_only:
            delta[off] = 0.0
        elif off.size:
            off_mass = float(np.sum(np.linalg.norm(delta[off], axis=1)))
            if off_mass > 0:
                delta[off] *= rng.uniform() * cone * on_mass / off_mass
        best = min(best, qcc_ratio(ens, u_star, support, delta))
        taken += 1
    return best


def rsc_c6_identity(sigma1_u, l_bar):
    """Concentration constant of the Gaussian RSC bound with identity covariance.

    Every variance and every covariance-block spectral norm equals one, so the
    constant reduces to ``2 L_bar + 2 sigma_1(U*)``.
    """
    return 2.0 * l_bar * 1.0 + sigma1_u * (1.0 + 1.0)


def check_rsc_gaussian_identity(d, r, n, u_star, trials=200, seed=0, l_bar=5.0):
    """Fraction of trials where the Gaussian RSC lower bound holds.

    Each trial draws a fresh identity-covariance ensemble and a random
    ``Delta`` with ``||Delta||_{2,1} = u * l_bar``, ``u ~ Uniform(0, 1)``.
    """
    u_star = np.asarray(u_star, dtype=np.float64)
    if u_star.shape != (d, r):
        raise ValueError(f"u_star must be {d}x{r}")
    sigma1 = float(np.linalg.svd(u_star, compute_uv=False)[0])
    c6 = rsc_c6_identity(sigma1, l_bar)
    slack = 3.0 * c6 * (2.0 * math.sqrt(r / n) + 3.0 * math.sqrt(math.log(d) / n))
    rng = np.random.default_rng(seed)
    passed = 0
    for _ in range(trials):
        ens = gaussian_ensemble(d, n, int(rng.integers(0, 2**62)))
        delta = rng.standard_normal((d, r))
        delta *= rng.uniform() * l_bar / l21_norm(delta)
        m = _qcc_matrix(u_star, delta)
        lhs = float(np.linalg.norm(apply_operator(ens, m))) / math.sqrt(n)
        rhs = 0.25 * float(np.linalg.norm(m)) - slack * l21_norm(delta)
        passed += lhs >= rhs
    return passed / trials


def estimate_conditions(ens, r, samples=200, seed=0, u_star=None, support=None,
                        cone=7.0):
    alpha, beta = estimate_rwc(ens, r, samples, seed)
    kappa = math.nan
    if u_star is not None and support is not None and len(support):
        kappa = estimate_qcc(ens, u_star, support, samples, seed, cone)
    smooth = estimate_smoothness(ens, r, samples, seed)
    return ConditionEstimate(alpha, beta, kappa, smooth, samples, seed)
