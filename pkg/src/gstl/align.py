"""Rotation-invariant error metrics for factor estimates."""
from dataclasses import dataclass

import numpy as np

from .core import as_matrix, l21_norm

__all__ = [
    "AlignmentReport",
    "procrustes_rotation",
    "error_l21",
    "error_frobenius_theta",
    "align",
]


def _pair(u_hat, u_star):
    u_hat = as_matrix(u_hat, "u_hat")
    u_star = as_matrix(u_star, "u_star")
    if u_hat.shape != u_star.shape:
        raise ValueError(f"shape mismatch: {u_hat.shape} vs {u_star.shape}")
    return u_hat, u_star


def procrustes_rotation(u_hat, u_star):
    """Orthogonal ``R`` minimizing ``||u_hat - u_star @ R||_F``.

    With ``u_star.T @ u_hat = P S Q^T`` the minimizer is ``R = P Q^T``.
    """
    u_hat, u_star = _pair(u_hat, u_star)
    p, _, qt = np.linalg.svd(u_star.T @ u_hat)
    return p @ qt


def error_l21(u_hat, u_star):
    """l2,1 norm of ``u_hat - u_star R`` at the Frobenius-optimal rotation ``R``."""
    u_hat, u_star = _pair(u_hat, u_star)
    return l21_norm(u_hat - u_star @ procrustes_rotation(u_hat, u_star))


def error_frobenius_theta(u_hat, u_star):
    """``||u_hat u_hat^T - u_star u_star^T||_F``; needs no alignment."""
    u_hat = as_matrix(u_hat, "u_hat")
    u_star = as_matrix(u_star, "u_star")
    if u_hat.shape[0] != u_star.shape[0]:
        raise ValueError(f"row mismatch: {u_hat.shape} vs {u_star.shape}")
    return float(np.linalg.norm(u_hat @ u_hat.T - u_star @ u_star.T))


@dataclass(frozen=True)
class AlignmentReport:
    rotation: np.ndarray
    l21_error: float
    frob_theta_error: float


def align(u_hat, u_star):
    u_hat, u_star = _pair(u_hat, u_star)
    rot = procrustes_rotation(u_hat, u_star)
    return AlignmentReport(rot, l21_norm(u_hat - u_star @ rot),
                           error_frobenius_theta(u_hat, u_star))
