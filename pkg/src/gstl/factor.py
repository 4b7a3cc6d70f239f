"""Burer-Monteiro estimators for the unpenalized low-rank problems.

Fits ``min_U (1/n) ||X - A(U U^T)||^2`` on one dataset, which gives both
the proxy-only and the gold-only baseline estimators.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from .sensing import adjoint, apply_operator

__all__ = [
    "FactorProblem",
    "SolverConfig",
    "FactorFit",
    "SolverDiverged",
    "SensingLoss",
    "bm_objective",
    "bm_gradient",
    "spectral_init",
    "fit_burer_monteiro",
]

log = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MIN_STEP = 1e-20
GRAM_MAX_D = 32


class SolverDiverged(RuntimeError):
    """Raised when an iterate produces a non-finite objective."""

    def __init__(self, iteration, what="objective"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class FactorProblem:
    ensemble: object
    x: object
    r: int

    def __post_init__(self):
        if not 1 <= self.r <= self.ensemble.d:
            raise ValueError(f"rank r={self.r} must lie in [1, d={self.ensemble.d}]")
        if self.x.n != self.ensemble.n:
            raise ValueError(
                f"{self.x.n} observations for an ensemble of size {self.ensemble.n}")

    @property
    def d(self):
        return self.ensemble.d

    @property
    def n(self):
        return self.ensemble.n


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 2000
    tol: float = 1e-9
    step: float = 0.05
    line_search: float = 0.5
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if not 0 < self.line_search < 1:
            raise ValueError("line_search factor must lie in (0, 1)")
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.max_iters < 0 or self.restarts < 1:
            raise ValueError("max_iters must be >= 0 and restarts >= 1")


@dataclass
class FactorFit:
    u: np.ndarray
    objective: float
    objective_trace: list = field(default_factory=list)
    grad_norm: float = np.nan
    n_iter: int = 0
    converged: bool = False
    restart_objectives: list = field(default_factory=list)


class SensingLoss:
    """Evaluates ``f(Theta) = (1/n)||A(Theta) - x||^2`` and ``(1/n) A*(A(Theta) - x)``.

    For small dense ensembles with more observations than entries of Theta the
    normal equations are precomputed, which turns each evaluation into a
    ``d^2 x d^2`` product instead of an ``n x d^2`` one.
    """

    def __init__(self, ensemble, x):
        self.ensemble = ensemble
        self.x = np.asarray(x, dtype=np.float64)
        self.n = ensemble.n
        d = ensemble.d
        self._gram = None
        self._flat = None
        if ensemble.kind == "gaussian" and ensemble.materialized:
            flat = ensemble._flat
            if self.n > d * d and d <= GRAM_MAX_D:
                self._gram = flat.T @ flat / self.n
                self._b = flat.T @ self.x / self.n
                self._c = float(self.x @ self.x) / self.n
            else:
                self._flat = flat

    def value(self, theta):
        if self._gram is not None:
            v = theta.reshape(-1)
            return max(float(v @ (self._gram @ v) - 2.0 * self._b @ v + self._c), 0.0)
        if self._flat is not None:
            res = self._flat @ theta.reshape(-1) - self.x
        else:
            res = apply_operator(self.ensemble, theta) - self.x
        return float(res @ res) / self.n

    def value_and_adjoint(self, theta):
        if self._gram is not None:
            v = theta.reshape(-1)
            hv = self._gram @ v
            f = max(float(v @ hv - 2.0 * self._b @ v + self._c), 0.0)
            return f, (hv - self._b).reshape(theta.shape)
        if self._flat is not None:
            res = self._flat @ theta.reshape(-1) - self.x
            return float(res @ res) / self.n, (res @ self._flat).reshape(theta.shape) / self.n
        res = apply_operator(self.ensemble, theta) - self.x
        return float(res @ res) / self.n, adjoint(self.ensemble, res) / self.n

    def value_and_grad_u(self, u):
        """Objective at ``U U^T`` and its gradient with respect to ``U``."""
        f, r = self.value_and_adjoint(u @ u.T)
        return f, 2.0 * (r + r.T) @ u


def _check_u(p, u):
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (p.d, p.r):
        raise ValueError(f"U must be {p.d}x{p.r}, got {u.shape}")
    return u


def bm_objective(p, u):
    """``(1/n) ||X - A(U U^T)||^2``."""
    u = _check_u(p, u)
    res = p.x.x - apply_operator(p.ensemble, u @ u.T)
    return float(res @ res) / p.n


def bm_gradient(p, u):
    """Exact gradient of :func:`bm_objective`.

    The sensing matrices need not be symmetric, so the adjoint of the
    residual is symmetrized: ``(2/n) [A*(res) + A*(res)^T] U``.
    """
    u = _check_u(p, u)
    res = apply_operator(p.ensemble, u @ u.T) - p.x.x
    g = adjoint(p.ensemble, res)
    return (2.0 / p.n) * (g + g.T) @ u


def spectral_init(p):
    """Top-``r`` eigenpairs of ``sym((1/n) sum_i X_i A_i)``, negatives clamped."""
    m = adjoint(p.ensemble, p.x.x) / p.n
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    idx = np.argsort(w)[::-1][:p.r]
    return v[:, idx] * np.sqrt(np.maximum(w[idx], 0.0))


def _descend(loss, u, cfg, trace):
    """Gradient descent with Armijo backtracking; returns (u, f, gnorm, iters, converged)."""
    f, g = loss.value_and_grad_u(u)
    if not np.isfinite(f):
        raise SolverDiverged(0)
    trace.append(f)
    eta = cfg.step
    gnorm = float(np.linalg.norm(g))
    converged = False
    it = 0
    while it < cfg.max_iters:
        if gnorm == 0.0 or f == 0.0:
            converged = True
            break
        g2 = gnorm * gnorm
        while True:
            cand = u - eta * g
            f_new = loss.value(cand @ cand.T)
            if np.isfinite(f_new) and f_new <= f - ARMIJO_C * eta * g2:
                break
            eta *= cfg.line_search
            if eta < MIN_STEP:
                if not np.isfinite(f_new):
                    raise SolverDiverged(it + 1)
                return u, f, gnorm, it, True
        it += 1
        u = cand
        f_old = f
        f, g = loss.value_and_grad_u(u)
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            raise SolverDiverged(it, "gradient")
        trace.append(f)
        gnorm = float(np.linalg.norm(g))
        eta /= cfg.line_search
        if f_old - f < cfg.tol * max(f_old, 1e-300):
            converged = True
            break
    return u, f, gnorm, it, converged


def fit_burer_monteiro(p, cfg=None):
    """Fit ``U`` by gradient descent from the spectral initialization.

    ``cfg.restarts - 1`` additional runs start from random Gaussian factors
    scaled like the spectral one; the lowest final objective wins.

    Returns
    -------
    FactorFit
        ``u`` is the fitted ``d x r`` factor; ``objective_trace`` holds the
        objective at every accepted iterate of the winning run.
    """
    cfg = cfg or SolverConfig()
    loss = SensingLoss(p.ensemble, p.x.x)
    u0 = spectral_init(p)
    scale = np.linalg.norm(u0) / np.sqrt(p.d * p.r) or 1.0
    rng = np.random.default_rng(cfg.seed)
    best = None
    finals = []
    for k in range(cfg.restarts):
        init = u0 if k == 0 else scale * rng.standard_normal((p.d, p.r))
        trace = []
        u, f, gnorm, it, conv = _descend(loss, init.copy(), cfg, trace)
        finals.append(f)
        if best is None or f < best.objective:
            best = FactorFit(u, f, trace, gnorm, it, conv)
    best.restart_objectives = finals
    if not best.converged:
        log.debug("Burer-Monteiro stopped at max_iters=%d", cfg.max_iters)
    return best
