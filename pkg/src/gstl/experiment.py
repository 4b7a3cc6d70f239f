"""Synthetic proxy/gold/transfer comparison and the swapped-context text fixture."""
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .align import error_frobenius_theta, error_l21
from .factor import FactorProblem, SolverConfig, SolverDiverged, fit_burer_monteiro
from .sensing import SyntheticSpec, generate_synthetic
from .transfer import (TransferProblem, cross_validate_lambda, default_big_l,
                       fit_transfer, transfer_smooth_loss)

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "TrialOutcome",
    "run_trial",
    "run_experiment",
    "summarize",
    "write_trials_csv",
    "write_summary_csv",
    "thread_budget",
    "swapped_context_corpora",
    "domain_word_trial",
]

ESTIMATORS = ("gold", "proxy", "tl")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one synthetic run needs; defaults are the d=20, r=5, s=2 benchmark."""
    d: int = 20
    r: int = 5
    s: int = 2
    n_g: int = 50
    n_p: int = 5000
    sigma_g: float = 1.0
    sigma_p: float = 1.0
    shift_value: float = 1.0
    seed: int = 0
    trials: int = 100
    folds: int = 5
    holdout_fraction: float = 0.2
    lambda_min: float = 1e-3
    lambda_max: float = 10.0
    lambda_count: int = 9
    max_iters: int = 2000
    tol: float = 1e-9
    step: float = 0.05
    restarts: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must lie in [0, 1)")
        if not 0 < self.lambda_min <= self.lambda_max:
            raise ValueError("need 0 < lambda_min <= lambda_max")
        if self.lambda_count < 1:
            raise ValueError("lambda_count must be at least 1")

    def grid(self):
        return np.logspace(math.log10(self.lambda_min), math.log10(self.lambda_max),
                           self.lambda_count)

    def spec(self, trial):
        return SyntheticSpec(self.d, self.r, self.s, self.n_g, self.n_p, self.sigma_g,
                             self.sigma_p, self.shift_value, self.seed + trial)

    def solver(self):
        return SolverConfig(self.max_iters, self.tol, self.step, seed=self.seed,
                            restarts=self.restarts)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    estimator: str
    frob_theta_error: float
    l21_error: float
    lambda_selected: float
    active_rows: int
    status: str = "ok"


@dataclass
class TrialOutcome:
    records: list
    cv_rows: list = field(default_factory=list)
    support: tuple = ()
    active_set: tuple = ()
    holdout_loss: float = math.nan
    projection_active: bool = False


def _failed(trial, names, why):
    return [TrialRecord(trial, e, math.nan, math.nan, math.nan, -1, why) for e in names]


def _record(trial, name, u, u_star, lam=math.nan, active=-1):
    return TrialRecord(trial, name, error_frobenius_theta(u, u_star), error_l21(u, u_star),
                       lam, active)


def run_trial(cfg, trial):
    """Fit gold-only, proxy-only and transfer estimators on one seeded instance.

    The transfer penalty is tuned by ``cfg.folds``-fold CV on the gold data
    left after holding out ``cfg.holdout_fraction``; the final transfer fit
    uses every gold observation and the holdout loss is kept for reporting.
    """
    inst = generate_synthetic(cfg.spec(trial))
    scfg = replace(cfg.solver(), seed=cfg.seed + trial)
    u_star = inst.u_g_star
    r = cfg.r
    records = []
    try:
        gold = fit_burer_monteiro(FactorProblem(inst.gold_ensemble, inst.gold_obs, r), scfg)
        records.append(_record(trial, "gold", gold.u, u_star))
    except SolverDiverged as exc:
        records += _failed(trial, ["gold"], f"diverged:{exc.iteration}")
    try:
        proxy = fit_burer_monteiro(FactorProblem(inst.proxy_ensemble, inst.proxy_obs, r), scfg)
    except SolverDiverged as exc:
        return TrialOutcome(records + _failed(trial, ["proxy", "tl"], f"diverged:{exc.iteration}"),
                            support=tuple(int(j) for j in inst.support))
    records.append(_record(trial, "proxy", proxy.u, u_star))

    n = inst.gold_ensemble.n
    n_hold = int(round(cfg.holdout_fraction * n))
    perm = np.random.default_rng([cfg.seed, trial]).permutation(n)
    hold, train = np.sort(perm[:n_hold]), np.sort(perm[n_hold:])
    ens_tr, x_tr = inst.gold_ensemble.subset(train), inst.gold_obs.subset(train)
    try:
        big_l = default_big_l(inst.gold_ensemble, inst.gold_obs, proxy.u, scfg)
        lam, cv_rows = cross_validate_lambda(ens_tr, x_tr, proxy.u, cfg.grid(),
                                             cfg.folds, scfg, big_l)
        sol = fit_transfer(TransferProblem(inst.gold_ensemble, inst.gold_obs, proxy.u,
                                           lam, big_l), scfg)
    except SolverDiverged as exc:
        return TrialOutcome(records + _failed(trial, ["tl"], f"diverged:{exc.iteration}"),
                            support=tuple(int(j) for j in inst.support))
    holdout = math.nan
    if n_hold:
        probe = TransferProblem(inst.gold_ensemble.subset(hold), inst.gold_obs.subset(hold),
                                proxy.u, 0.0)
        tuned = fit_transfer(TransferProblem(ens_tr, x_tr, proxy.u, lam, big_l), scfg)
        holdout = transfer_smooth_loss(probe, tuned.delta_hat)
    records.append(_record(trial, "tl", sol.u_g_hat, u_star, lam, len(sol.active_rows)))
    return TrialOutcome(records, cv_rows, tuple(int(j) for j in inst.support),
                        tuple(int(j) for j in sol.active_rows), holdout,
                        sol.projection_active)


def thread_budget():
    """Worker count from ``GSTL_THREADS``; unset means all cores."""
    raw = os.environ.get("GSTL_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ValueError("GSTL_THREADS must be a positive integer")
    return n


def _trial_job(args):
    cfg, trial = args
    return run_trial(cfg, trial)


def run_experiment(cfg, workers=None):
    """All trials of ``cfg``, in trial order regardless of ``workers``."""
    workers = thread_budget() if workers is None else workers
    jobs = [(cfg, t) for t in range(cfg.trials)]
    if workers <= 1 or cfg.trials == 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, cfg.trials)) as pool:
        return list(pool.map(_trial_job, jobs))


def _mean_ci(values):
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return math.nan, math.nan, math.nan, 0
    m = float(v.mean())
    half = 1.96 * float(v.std(ddof=1)) / math.sqrt(v.size) if v.size > 1 else math.nan
    return m, m - half, m + half, int(v.size)


def summarize(outcomes):
    """Per-estimator ``(name, metric, mean, ci_low, ci_high, n_ok)`` rows."""
    out = []
    recs = [rec for o in outcomes for rec in o.records]
    for name in ESTIMATORS:
        mine = [rec for rec in recs if rec.estimator == name and rec.status == "ok"]
        for metric in ("frob_theta_error", "l21_error"):
            out.append((name, metric) + _mean_ci([getattr(rec, metric) for rec in mine]))
    return out


def write_trials_csv(path, outcomes):
    from .io import fmt
    lines = ["trial,estimator,frob_theta_error,l21_error,lambda_selected,active_rows,status"]
    for o in outcomes:
        for rec in o.records:
            lines.append(f"{rec.trial},{rec.estimator},{fmt(rec.frob_theta_error)},"
                         f"{fmt(rec.l21_error)},{fmt(rec.lambda_selected)},"
                         f"{rec.active_rows},{rec.status}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_csv(path, outcomes):
    from .io import fmt
    lines = ["estimator,metric,mean,ci95_low,ci95_high,n"]
    for name, metric, m, lo, hi, k in summarize(outcomes):
        lines.append(f"{name},{metric},{fmt(m)},{fmt(lo)},{fmt(hi)},{k}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# --- swapped-context text fixture -------------------------------------------

def _sentences(rng, count, topics, probs, length):
    out = []
    for _ in range(count):
        topic = topics[rng.integers(len(topics))]
        out.append([topic[i] for i in rng.choice(len(topic), size=length, p=probs)])
    return out


def swapped_context_corpora(seed, vocab_size=100, topics=10, s=4, proxy_sentences=4000,
                            gold_sentences=1000, sentence_length=10, zipf=1.0):
    """Two topic-mixture corpora that differ only in the contexts of ``s`` words.

    Words are split at random into equal topics; a sentence draws one topic
    and then Zipf-weighted words from it. In the gold corpus ``s // 2`` pairs
    of words trade places between two topics, so each swapped word keeps its
    frequency but appears next to a different set of neighbors.

    Returns ``(proxy, gold, swapped)`` with the corpora as token lists.
    """
    if s % 2 or s < 0 or s > topics:
        raise ValueError("s must be even and at most the number of topics")
    if vocab_size % topics:
        raise ValueError("vocab_size must be a multiple of topics")
    rng = np.random.default_rng(seed)
    width = len(str(vocab_size - 1))
    words = [f"w{i:0{width}d}" for i in range(vocab_size)]
    m = vocab_size // topics
    order = rng.permutation(vocab_size)
    groups = [[words[j] for j in order[k * m:(k + 1) * m]] for k in range(topics)]
    probs = 1.0 / np.arange(1, m + 1) ** zipf
    probs /= probs.sum()
    proxy = _sentences(rng, proxy_sentences, groups, probs, sentence_length)
    gold_groups = [list(g) for g in groups]
    swapped = []
    for p in range(s // 2):
        pos = int(rng.integers(m))
        a, b = gold_groups[2 * p][pos], gold_groups[2 * p + 1][pos]
        gold_groups[2 * p][pos], gold_groups[2 * p + 1][pos] = b, a
        swapped += [a, b]
    gold = _sentences(rng, gold_sentences, gold_groups, probs, sentence_length)
    return proxy, gold, sorted(swapped)


def domain_word_trial(seed, lam=3.0, dim=10, epochs=300, learning_rate=0.05,
                      top_fraction=0.1, **fixture):
    """Hits of the swapped words in the top slice for group transfer and Mittens.

    Pre-trained vectors come from plain GloVe on the proxy corpus; both
    fine-tuning methods then fit the gold counts with the same schedule.
    Returns ``(tl_hits, mittens_hits, s)``.
    """
    from .glovetl import (GloveConfig, PretrainedEmbeddings, top_count, fit_glove,
                          fit_glove_transfer, fit_mittens, rank_domain_words)
    from .textpipe import build_vocabulary, count_cooccurrences

    proxy, gold, swapped = swapped_context_corpora(seed, **fixture)
    vocab = build_vocabulary(proxy + gold)
    base = fit_glove(count_cooccurrences(proxy, vocab),
                     GloveConfig(epochs=epochs, learning_rate=learning_rate, dim=dim,
                                 seed=seed))
    pre = PretrainedEmbeddings(list(vocab.tokens), base.embedding)
    counts = count_cooccurrences(gold, vocab)
    cfg = GloveConfig(epochs=epochs, learning_rate=learning_rate, seed=seed + 1000)
    k = top_count(len(vocab), top_fraction)
    hits = []
    for fit in (fit_glove_transfer, fit_mittens):
        ranking = rank_domain_words(fit(counts, pre, lam, cfg), pre)
        hits.append(len(set(ranking.top(k)) & set(swapped)))
    return hits[0], hits[1], len(swapped)
