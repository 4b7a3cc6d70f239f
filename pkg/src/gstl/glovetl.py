"""GloVe with a penalty toward pre-trained embeddings, and domain-word ranking.

Three fits share one training loop:

* plain GloVe (no penalty),
* group transfer: ``lam * sum_i ||(U^i + V^i) - P^i||`` handled by an exact
  joint proximal step on each ``(U^i, V^i)`` pair,
* Mittens: ``lam * sum_i ||(U^i + V^i) - P^i||^2`` handled as a smooth term.

Each epoch is one full pass over the stored co-occurrence pairs with
AdaGrad-scaled steps. An epoch that would raise the objective is undone and
retried with a smaller learning rate, so the objective trace never increases.
"""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .factor import SolverDiverged

__all__ = [
    "GloveModel",
    "GloveConfig",
    "PretrainedEmbeddings",
    "RankingResult",
    "glove_weight",
    "glove_loss",
    "glove_tl_objective",
    "mittens_objective",
    "mittens_penalty",
    "mittens_penalty_gradient",
    "joint_group_prox",
    "pretrained_matrix",
    "fit_glove",
    "fit_glove_transfer",
    "fit_mittens",
    "rank_domain_words",
    "precision_recall_f1",
    "evaluate_f1",
    "top_count",
]

DEFAULT_LAMBDA = 0.05
DEFAULT_DIM = 100


@dataclass
class GloveModel:
    u: np.ndarray
    v: np.ndarray
    b: np.ndarray
    c: np.ndarray
    tokens: list | None = None
    objective_trace: list = field(default_factory=list)

    def __post_init__(self):
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have the same shape")
        d = self.u.shape[0]
        if self.b.shape != (d,) or self.c.shape != (d,):
            raise ValueError("bias vectors must have one entry per word")
        for a in (self.u, self.v, self.b, self.c):
            if not np.all(np.isfinite(a)):
                raise ValueError("model contains non-finite values")

    @property
    def embedding(self):
        """Final word vectors ``U + V``."""
        return self.u + self.v


@dataclass
class PretrainedEmbeddings:
    tokens: list
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or len(self.tokens) != self.vectors.shape[0]:
            raise ValueError("need one vector of equal length per token")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def dim(self):
        return self.vectors.shape[1]

    def __getitem__(self, token):
        return self.vectors[self.index[token]]


@dataclass(frozen=True)
class GloveConfig:
    epochs: int = 50
    learning_rate: float = 0.05
    x_max: float = 100.0
    alpha: float = 0.75
    seed: int = 0
    tol: float = 1e-9
    dim: int | None = None
    backoff: float = 0.5
    max_retries: int = 40

    def __post_init__(self):
        if self.epochs < 0 or self.learning_rate <= 0 or self.tol <= 0:
            raise ValueError("epochs >= 0, learning_rate > 0 and tol > 0 required")
        if not 0 < self.backoff < 1:
            raise ValueError("backoff must lie in (0, 1)")


def glove_weight(x, x_max=100.0, alpha=0.75):
    """``(x / x_max)^alpha`` below ``x_max``, else 1. Works on arrays."""
    xa = np.asarray(x, dtype=np.float64)
    if np.any(xa < 0):
        raise ValueError("co-occurrence weights must be non-negative")
    out = np.where(xa < x_max, (xa / x_max) ** alpha, 1.0)
    return float(out) if out.ndim == 0 else out


def pretrained_matrix(pretrained, tokens):
    """Rows of ``pretrained`` in ``tokens`` order.

    ``pretrained`` may be a :class:`PretrainedEmbeddings` or an already
    aligned array.
    """
    if isinstance(pretrained, PretrainedEmbeddings):
        if tokens is None:
            raise ValueError("token list needed to align pretrained embeddings")
        missing = [t for t in tokens if t not in pretrained.index]
        if missing:
            raise ValueError("tokens missing from pretrained embeddings: "
                             + ", ".join(missing))
        return pretrained.vectors[[pretrained.index[t] for t in tokens]]
    a = np.asarray(pretrained, dtype=np.float64)
    if tokens is not None and a.shape[0] != len(tokens):
        raise ValueError(f"pretrained has {a.shape[0]} rows for {len(tokens)} tokens")
    return a


def _pairs(counts):
    rows, cols, vals = counts.arrays()
    keep = vals > 0
    return rows[keep], cols[keep], vals[keep]


def _residual(model, rows, cols, vals):
    pred = (np.einsum("ij,ij->i", model.u[rows], model.v[cols])
            + model.b[rows] + model.c[cols])
    return pred - np.log(vals)


def glove_loss(model, counts, x_max=100.0, alpha=0.75):
    """Weighted least-squares fit of log counts over stored positive pairs."""
    rows, cols, vals = _pairs(counts)
    diff = _residual(model, rows, cols, vals)
    return float(np.sum(glove_weight(vals, x_max, alpha) * diff * diff))


def _row_dist(model, a):
    s = model.u + model.v - a
    return np.sqrt(np.einsum("ij,ij->i", s, s))


def glove_tl_objective(model, counts, pretrained, lam, x_max=100.0, alpha=0.75):
    """GloVe loss plus ``lam * sum_i ||(U^i + V^i) - P^i||``."""
    a = pretrained_matrix(pretrained, counts.tokens)
    return glove_loss(model, counts, x_max, alpha) + lam * float(_row_dist(model, a).sum())


def mittens_penalty(model, a, lam):
    s = model.u + model.v - a
    return lam * float(np.sum(s * s))


def mittens_penalty_gradient(model, a, lam):
    """Gradients of :func:`mittens_penalty` with respect to ``U`` and ``V``."""
    g = 2.0 * lam * (model.u + model.v - a)
    return g, g.copy()


def mittens_objective(model, counts, pretrained, lam, x_max=100.0, alpha=0.75):
    a = pretrained_matrix(pretrained, counts.tokens)
    return glove_loss(model, counts, x_max, alpha) + mittens_penalty(model, a, lam)


def joint_group_prox(u0, v0, a, lam, eta):
    """Minimize ``lam ||u + v - a|| + (||u - u0||^2 + ||v - v0||^2) / (2 eta)``.

    Only ``u + v`` enters the penalty, so the sum is soft-thresholded toward
    ``a`` at level ``2 lam eta`` and the correction is split equally.
    Accepts single vectors or row-stacked matrices with per-row ``eta``.
    """
    u0 = np.asarray(u0, dtype=np.float64)
    v0 = np.asarray(v0, dtype=np.float64)
    s0 = u0 + v0
    gap = s0 - a
    norm = np.linalg.norm(gap, axis=-1, keepdims=True)
    t = 2.0 * lam * np.asarray(eta, dtype=np.float64)
    if t.ndim == 1:
        t = t[:, None]
    scale = np.where(norm > t, 1.0 - t / np.where(norm > 0, norm, 1.0), 0.0)
    corr = (a + scale * gap - s0) / 2.0
    return u0 + corr, v0 + corr


class _Trainer:
    def __init__(self, counts, a, lam, penalty, cfg, dim):
        self.rows, self.cols, self.vals = _pairs(counts)
        self.d = counts.d
        self.fx = glove_weight(self.vals, cfg.x_max, cfg.alpha)
        self.logx = np.log(self.vals)
        self.a = a
        self.lam = lam
        self.penalty = penalty if lam > 0 else None
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        half = 0.5 / dim
        self.params = [rng.uniform(-half, half, (self.d, dim)),
                       rng.uniform(-half, half, (self.d, dim)),
                       np.zeros(self.d), np.zeros(self.d)]
        # AdaGrad accumulators start at 1 as in the reference GloVe code
        self.accum = [np.ones_like(p) for p in self.params]
        self.tokens = counts.tokens

    def objective(self, params):
        u, v, b, c = params
        diff = (np.einsum("ij,ij->i", u[self.rows], v[self.cols])
                + b[self.rows] + c[self.cols] - self.logx)
        val = float(np.sum(self.fx * diff * diff))
        if self.penalty is not None:
            s = u + v - self.a
            sq = np.einsum("ij,ij->i", s, s)
            val += self.lam * float(np.sum(np.sqrt(sq) if self.penalty == "group" else sq))
        return val

    def gradients(self, params):
        u, v, b, c = params
        diff = (np.einsum("ij,ij->i", u[self.rows], v[self.cols])
                + b[self.rows] + c[self.cols] - self.logx)
        w = sp.csr_matrix((2.0 * self.fx * diff, (self.rows, self.cols)),
                          shape=(self.d, self.d))
        gu = w @ v
        gv = w.T @ u
        gb = np.asarray(w.sum(axis=1)).ravel()
        gc = np.asarray(w.sum(axis=0)).ravel()
        if self.penalty == "frobenius":
            g = 2.0 * self.lam * (u + v - self.a)
            gu = gu + g
            gv = gv + g
        return [gu, gv, gb, gc]

    def epoch(self, params, lr):
        grads = self.gradients(params)
        accum = [h + g * g for h, g in zip(self.accum, grads)]
        steps = [lr / np.sqrt(h) for h in accum]
        new = [p - s * g for p, s, g in zip(params, steps, grads)]
        if self.penalty == "group":
            eta = np.concatenate([steps[0], steps[1]], axis=1).mean(axis=1)
            new[0], new[1] = joint_group_prox(new[0], new[1], self.a, self.lam, eta)
        return new, accum

    def run(self):
        cfg = self.cfg
        params = self.params
        obj = self.objective(params)
        if not math.isfinite(obj):
            raise SolverDiverged(0)
        trace = [obj]
        lr = cfg.learning_rate
        for ep in range(1, cfg.epochs + 1):
            for _ in range(cfg.max_retries):
                new, accum = self.epoch(params, lr)
                new_obj = self.objective(new)
                if math.isfinite(new_obj) and new_obj <= obj:
                    break
                lr *= cfg.backoff
            else:
                if not math.isfinite(new_obj):
                    raise SolverDiverged(ep, "objective (epoch)")
                break
            params, self.accum = new, accum
            old, obj = obj, new_obj
            trace.append(obj)
            if old - obj < cfg.tol * max(old, 1e-300):
                break
        u, v, b, c = params
        return GloveModel(u, v, b, c, self.tokens, trace)


def _dim(pretrained_a, cfg):
    if pretrained_a is not None:
        return pretrained_a.shape[1]
    return cfg.dim or DEFAULT_DIM


def fit_glove(counts, cfg=None, dim=None):
    """Plain GloVe (no pre-trained embeddings)."""
    cfg = cfg or GloveConfig()
    return _Trainer(counts, None, 0.0, None, cfg, dim or cfg.dim or DEFAULT_DIM).run()


def fit_glove_transfer(counts, pretrained, lam=DEFAULT_LAMBDA, cfg=None):
    """GloVe with the group penalty toward ``pretrained``; ``lam == 0`` is plain GloVe."""
    cfg = cfg or GloveConfig()
    a = pretrained_matrix(pretrained, counts.tokens)
    return _Trainer(counts, a, float(lam), "group", cfg, _dim(a, cfg)).run()


def fit_mittens(counts, pretrained, lam=DEFAULT_LAMBDA, cfg=None):
    """GloVe with the squared penalty toward ``pretrained``."""
    cfg = cfg or GloveConfig()
    a = pretrained_matrix(pretrained, counts.tokens)
    return _Trainer(counts, a, float(lam), "frobenius", cfg, _dim(a, cfg)).run()


@dataclass(frozen=True)
class RankingResult:
    """``(token, score)`` pairs, highest score first, ties broken by token."""
    items: tuple

    @property
    def tokens(self):
        return [t for t, _ in self.items]

    def top(self, k):
        return self.tokens[:k]

    def __len__(self):
        return len(self.items)


def rank_domain_words(model, pretrained, tokens=None):
    """Rank words by ``||embedding_i - pretrained_i||``.

    ``model`` is a :class:`GloveModel` (scored on ``U + V``), a
    :class:`PretrainedEmbeddings` holding final vectors, or an array aligned
    with ``tokens``.
    """
    if isinstance(model, GloveModel):
        emb, toks = model.embedding, model.tokens
    elif isinstance(model, PretrainedEmbeddings):
        emb, toks = model.vectors, model.tokens
    else:
        emb, toks = np.asarray(model, dtype=np.float64), None
    toks = tokens if tokens is not None else toks
    if toks is None:
        raise ValueError("token list required")
    if len(toks) != emb.shape[0]:
        raise ValueError("token list does not match the embedding rows")
    a = pretrained_matrix(pretrained, toks)
    if a.shape != emb.shape:
        raise ValueError(f"embedding shape {emb.shape} vs pretrained {a.shape}")
    diff = emb - a
    scores = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    items = sorted(zip(toks, scores.tolist()), key=lambda ts: (-ts[1], ts[0]))
    return RankingResult(tuple(items))


def top_count(d, top_fraction):
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must lie in (0, 1]")
    # guard against 0.1 * 30 = 3.0000000000000004
    return max(1, math.ceil(round(top_fraction * d, 9)))


def precision_recall_f1(ranking, domain_labels, top_fraction=0.10):
    """Precision, recall and F1 of the top slice against the labels.

    ``domain_labels`` is a mapping ``token -> bool`` covering the ranking or
    a collection of the domain tokens. F1 is 0 when ``P + R == 0``.
    """
    if not domain_labels:
        raise ValueError("empty labels")
    if isinstance(domain_labels, dict):
        missing = [t for t in ranking.tokens if t not in domain_labels]
        if missing:
            raise ValueError("labels missing for: " + ", ".join(missing[:10]))
        positives = {t for t, y in domain_labels.items() if y}
    else:
        positives = set(domain_labels)
    k = top_count(len(ranking), top_fraction)
    predicted = set(ranking.top(k))
    tp = len(predicted & positives)
    relevant = len(positives & set(ranking.tokens))
    precision = tp / len(predicted) if predicted else 0.0
    recall = tp / relevant if relevant else 0.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


def evaluate_f1(ranking, domain_labels, top_fraction=0.10, article_weights=None):
    """F1 of the top ``top_fraction`` slice.

    With ``article_weights`` (e.g. article token lengths), ``ranking`` and
    ``domain_labels`` are sequences with one entry per article and the
    per-article scores are averaged with those weights.
    """
    if article_weights is None:
        return precision_recall_f1(ranking, domain_labels, top_fraction)[2]
    w = np.asarray(article_weights, dtype=np.float64)
    if not (len(ranking) == len(domain_labels) == len(w)):
        raise ValueError("one ranking, label set and weight per article required")
    scores = [precision_recall_f1(r, lab, top_fraction)[2]
              for r, lab in zip(ranking, domain_labels)]
    return float(np.dot(w, scores) / w.sum())
