"""Dense matrix primitives and the l2,1 row-group operators.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Rows are the
groups throughout: ``M[j]`` is the embedding of word ``j``.
"""
import numpy as np

__all__ = [
    "as_matrix",
    "row_norms",
    "l21_norm",
    "row_group_soft_threshold",
    "project_l1_ball",
    "project_l21_ball",
    "INSIDE_TOL",
]

# absolute slack for "already inside the ball"
INSIDE_TOL = 1e-12


def as_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-D float64 array.

    Raises
    ------
    ValueError
        If ``m`` is not two-dimensional or holds NaN/Inf.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def row_norms(m):
    """Per-row Euclidean norms of ``m`` (the ``RowGroupNorms`` of a matrix)."""
    return np.linalg.norm(as_matrix(m), axis=1)


def l21_norm(m):
    """Sum of the Euclidean norms of the rows of ``m``."""
    return float(np.sum(row_norms(m)))


def row_group_soft_threshold(m, t):
    """Proximal operator of ``t * ||.||_{2,1}``.

    Each row ``m_j`` is scaled by ``max(0, 1 - t / ||m_j||)``; rows whose
    norm is at most ``t`` (including zero rows) become exactly zero.
    """
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    m = as_matrix(m)
    return _shrink_rows(m, np.sqrt(np.einsum("ij,ij->i", m, m)), t)


def _shrink_rows(m, norms, t):
    # zero rows are never divided by
    scale = np.zeros_like(norms)
    keep = norms > t
    scale[keep] = 1.0 - t / norms[keep]
    return m * scale[:, None]


def project_l1_ball(v, radius):
    """Euclidean projection of a non-negative vector onto the l1 ball.

    Sort-based exact algorithm (Held, Wolfe and Crowder; Duchi et al.),
    O(k log k) in the length of ``v``.
    """
    v = np.asarray(v, dtype=np.float64)
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    if radius == 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius + INSIDE_TOL:
        return v.copy()
    mu = np.sort(a)[::-1]
    cssv = np.cumsum(mu) - radius
    ind = np.arange(1, len(mu) + 1)
    hits = np.flatnonzero(mu - cssv / ind > 0)
    # the first index always qualifies in exact arithmetic
    rho = hits[-1] + 1 if hits.size else 1
    theta = cssv[rho - 1] / rho
    return np.sign(v) * np.maximum(a - theta, 0.0)


def project_l21_ball(m, radius):
    """Euclidean projection of ``m`` onto ``{Z : ||Z||_{2,1} <= radius}``.

    The row norms are projected onto the l1 ball and every row is rescaled
    to its projected norm, which is exact because the problem decouples
    into a radial part per row.
    """
    if radius < 0:
        raise ValueError(f"radius must be non-negative, got {radius}")
    m = as_matrix(m)
    norms = np.linalg.norm(m, axis=1)
    if norms.sum() <= radius + INSIDE_TOL:
        return m.copy()
    if radius == 0:
        return np.zeros_like(m)
    target = project_l1_ball(norms, radius)
    scale = np.zeros_like(norms)
    nz = norms > 0
    scale[nz] = target[nz] / norms[nz]
    return m * scale[:, None]
