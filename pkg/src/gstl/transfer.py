"""Two-stage group-sparse transfer estimator.

Given proxy embeddings ``U_p_hat`` and scarce gold observations, solve for a
row-sparse correction ``Delta``::

    min_{||Delta||_{2,1} <= 2L}  (1/n_g) ||X_g - A_g((U_p + Delta)(U_p + Delta)^T)||^2
                                 + lam * ||Delta||_{2,1}

by proximal gradient. The gold estimate is ``U_p_hat + Delta_hat``.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import INSIDE_TOL, _shrink_rows, l21_norm, project_l21_ball
from .factor import SensingLoss, SolverConfig, SolverDiverged
from .sensing import adjoint, apply_operator

__all__ = [
    "TransferProblem",
    "TransferSolution",
    "transfer_smooth_loss",
    "transfer_smooth_gradient",
    "fit_transfer",
    "default_big_l",
    "lambda_from_theorem",
    "cross_validate_lambda",
    "CVRow",
    "ACTIVE_ROW_TOL",
]

log = logging.getLogger(__name__)

ACTIVE_ROW_TOL = 1e-10
ARMIJO_C = 1e-4
MIN_STEP = 1e-20


@dataclass(frozen=True)
class TransferProblem:
    gold_ensemble: object
    x_g: object
    u_p_hat: np.ndarray
    lam: float
    big_l: float = math.inf

    def __post_init__(self):
        d = self.gold_ensemble.d
        if self.u_p_hat.ndim != 2 or self.u_p_hat.shape[0] != d:
            raise ValueError(f"u_p_hat must have {d} rows, got {self.u_p_hat.shape}")
        if self.x_g.n != self.gold_ensemble.n:
            raise ValueError("observation count does not match the gold ensemble")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if not self.big_l > 0:
            raise ValueError("L must be positive")

    @property
    def n(self):
        return self.gold_ensemble.n

    @property
    def shape(self):
        return self.u_p_hat.shape


@dataclass
class TransferSolution:
    delta_hat: np.ndarray
    u_g_hat: np.ndarray
    objective_trace: list
    active_rows: np.ndarray
    n_iter: int = 0
    converged: bool = False
    projection_active: bool = False
    l21_trace: list = field(default_factory=list)


def _check_delta(p, delta):
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != p.shape:
        raise ValueError(f"delta must be {p.shape}, got {delta.shape}")
    return delta


def transfer_smooth_loss(p, delta):
    """Gold squared loss at ``U_p_hat + delta``."""
    u = p.u_p_hat + _check_delta(p, delta)
    res = p.x_g.x - apply_operator(p.gold_ensemble, u @ u.T)
    return float(res @ res) / p.n


def transfer_smooth_gradient(p, delta):
    """Gradient of :func:`transfer_smooth_loss` with respect to ``delta``."""
    u = p.u_p_hat + _check_delta(p, delta)
    res = apply_operator(p.gold_ensemble, u @ u.T) - p.x_g.x
    g = adjoint(p.gold_ensemble, res)
    return (2.0 / p.n) * (g + g.T) @ u


def fit_transfer(p, cfg=None, delta0=None):
    """Proximal gradient with backtracking on the composite objective.

    Each step takes a gradient step on the smooth loss, applies the row-group
    soft threshold at ``eta * lam`` and projects onto the l2,1 ball of radius
    ``2L``. A step is accepted when it satisfies the usual quadratic upper
    bound and does not increase the composite objective.
    """
    cfg = cfg or SolverConfig()
    loss = SensingLoss(p.gold_ensemble, p.x_g.x)
    u_p = p.u_p_hat
    radius = 2.0 * p.big_l
    lam = p.lam

    def smooth(delta):
        u = u_p + delta
        f, r = loss.value_and_adjoint(u @ u.T)
        return f, 2.0 * (r + r.T) @ u

    def value(delta):
        u = u_p + delta
        return loss.value(u @ u.T)

    delta = np.zeros(p.shape) if delta0 is None else _check_delta(p, delta0).copy()
    bounded = math.isfinite(radius)
    if bounded:
        delta = project_l21_ball(delta, radius)
    f, g = smooth(delta)
    h = float(np.sqrt(np.einsum("ij,ij->i", delta, delta)).sum())
    obj = f + lam * h
    if not math.isfinite(obj):
        raise SolverDiverged(0)
    trace = [obj]
    l21s = [h]
    eta = cfg.step
    projected = False
    converged = False
    it = 0
    while it < cfg.max_iters:
        while True:
            z = delta - eta * g
            zn = np.sqrt(np.einsum("ij,ij->i", z, z))
            cand = _shrink_rows(z, zn, eta * lam)
            h_new = float(np.maximum(zn - eta * lam, 0.0).sum())
            was_projected = False
            if bounded and h_new > radius + INSIDE_TOL:
                cand = project_l21_ball(cand, radius)
                h_new = float(np.sqrt(np.einsum("ij,ij->i", cand, cand)).sum())
                was_projected = True
            diff = cand - delta
            f_new = value(cand)
            obj_new = f_new + lam * h_new
            bound = f + float(np.vdot(g, diff)) + float(np.vdot(diff, diff)) / (2.0 * eta)
            if (math.isfinite(obj_new) and f_new <= bound + 1e-12 * abs(f)
                    and obj_new <= obj):
                break
            eta *= cfg.line_search
            if eta < MIN_STEP:
                if not math.isfinite(obj_new):
                    raise SolverDiverged(it + 1)
                cand = None
                break
        if cand is None:
            converged = True
            break
        it += 1
        projected = projected or was_projected
        delta = cand
        obj_old = obj
        f, g = smooth(delta)
        if not math.isfinite(f) or not np.all(np.isfinite(g)):
            raise SolverDiverged(it, "gradient")
        h = h_new
        obj = f + lam * h
        trace.append(obj)
        l21s.append(h)
        eta /= cfg.line_search
        if obj_old - obj < cfg.tol * max(obj_old, 1e-300):
            converged = True
            break
    if projected:
        log.info("l2,1-ball constraint (radius %.3g) was active", radius)
    norms = np.linalg.norm(delta, axis=1)
    active = np.flatnonzero(norms > ACTIVE_ROW_TOL)
    return TransferSolution(delta, u_p + delta, trace, active, it, converged,
                            projected, l21s)


def default_big_l(gold_ensemble, x_g, u_p_hat, cfg=None, warm_iters=50):
    """``max(||Delta_warm||_{2,1}, 10)`` from a short unpenalized, unconstrained run."""
    cfg = replace(cfg or SolverConfig(), max_iters=warm_iters)
    warm = fit_transfer(TransferProblem(gold_ensemble, x_g, u_p_hat, 0.0), cfg)
    return max(l21_norm(warm.delta_hat), 10.0)


def lambda_from_theorem(n_g, d, r, beta_g, sigma_g, sigma1_ug, big_l, delta):
    """Regularization level from the high-probability error bound.

    Returns the larger of
    ``sqrt(2048 L^2 beta sigma^2 / n * log(10 d^2 / delta))`` and
    ``sqrt(256 beta sigma^2 sigma_1^2 / n * (r + 2 sqrt(r log(5d/delta)) + 2 log(5d/delta)))``.
    """
    for name, v in (("n_g", n_g), ("d", d), ("r", r), ("beta_g", beta_g),
                    ("sigma_g", sigma_g), ("sigma1_ug", sigma1_ug), ("big_l", big_l)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    if not 0 < delta < 1:
        raise ValueError(f"confidence delta must lie in (0, 1), got {delta}")
    a = math.sqrt(2048.0 * big_l**2 * beta_g * sigma_g**2 / n_g
                  * math.log(10.0 * d * d / delta))
    lg = math.log(5.0 * d / delta)
    b = math.sqrt(256.0 * beta_g * sigma_g**2 * sigma1_ug**2 / n_g
                  * (r + 2.0 * math.sqrt(r * lg) + 2.0 * lg))
    return max(a, b)


@dataclass(frozen=True)
class CVRow:
    lam: float
    fold: int
    heldout_loss: float
    mean_loss: float


def fold_indices(n, folds, seed):
    """Shuffle ``range(n)`` with ``seed`` and cut it into contiguous folds."""
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cross_validate_lambda(gold_ensemble, x_g, u_p_hat, grid, folds=5,
                          cfg=None, big_l=math.inf):
    """K-fold selection of ``lam`` by mean held-out gold loss.

    Ties go to the larger ``lam``. Returns ``(best_lam, rows)`` where
    ``rows`` lists one :class:`CVRow` per (lam, fold) pair.
    """
    cfg = cfg or SolverConfig()
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("empty lambda grid")
    n = gold_ensemble.n
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if folds > n:
        raise ValueError(f"{folds} folds for {n} observations")
    parts = fold_indices(n, folds, cfg.seed)
    splits = []
    for k, test in enumerate(parts):
        train = np.concatenate([q for j, q in enumerate(parts) if j != k])
        splits.append((gold_ensemble.subset(train), x_g.subset(train),
                       TransferProblem(gold_ensemble.subset(test), x_g.subset(test),
                                       u_p_hat, 0.0)))
    rows = []
    means = []
    for lam in grid:
        losses = []
        for ens_tr, x_tr, held in splits:
            sol = fit_transfer(TransferProblem(ens_tr, x_tr, u_p_hat, lam, big_l), cfg)
            losses.append(transfer_smooth_loss(held, sol.delta_hat))
        m = float(np.mean(losses))
        means.append(m)
        rows.extend(CVRow(lam, k, v, m) for k, v in enumerate(losses))
    best_mean = min(means)
    best = max(lam for lam, m in zip(grid, means) if m == best_mean)
    return best, rows
