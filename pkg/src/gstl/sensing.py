"""Linear measurement operators and synthetic proxy/gold data.

A measurement ensemble represents the operator ``A(Theta)_i = <A_i, Theta>``.
Two kinds exist:

* ``"gaussian"``: dense sensing matrices. Seeded ensembles draw i.i.d.
  N(0, 1) entries block by block from keyed streams, so any block can be
  regenerated on its own; ensembles with ``d <= MATERIALIZE_MAX_D`` keep
  every matrix in memory, larger ones regenerate blocks on demand. Explicit
  ensembles (``from_matrices``) hold caller-supplied matrices.
* ``"word_pair"``: each observation reads one entry, ``A_i = E_{jk}``.
  Indices are 0-based.
"""
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeasurementEnsemble",
    "Observations",
    "SyntheticSpec",
    "SyntheticInstance",
    "gaussian_ensemble",
    "word_pair_ensemble",
    "word_pair_ensemble_full",
    "word_pair_ensemble_sampled",
    "sample_word_pair_outcomes",
    "apply_operator",
    "adjoint",
    "generate_synthetic",
]

MATERIALIZE_MAX_D = 64
BLOCK_SIZE = 256


def _gaussian_block(seed, block, size, d):
    rng = np.random.default_rng([seed, block])
    return rng.standard_normal((size, d, d))


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    kind: str
    d: int
    n: int
    seed: int | None = None
    pairs: np.ndarray | None = field(default=None, repr=False)
    _flat: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in ("gaussian", "word_pair"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "word_pair":
            p = self.pairs
            if p is None or p.shape != (self.n, 2):
                raise ValueError("word_pair ensemble needs an (n, 2) pair array")
            if p.size and (p.min() < 0 or p.max() >= self.d):
                raise ValueError(f"pair indices must lie in [0, {self.d})")
        elif self._flat is None and self.seed is None:
            raise ValueError("gaussian ensemble needs a seed or explicit matrices")

    @classmethod
    def from_matrices(cls, mats):
        """Explicit dense ensemble from an ``(n, d, d)`` stack."""
        mats = np.asarray(mats, dtype=np.float64)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise ValueError(f"expected an (n, d, d) stack, got {mats.shape}")
        n, d, _ = mats.shape
        flat = np.ascontiguousarray(mats.reshape(n, d * d))
        flat.setflags(write=False)
        return cls("gaussian", d, n, None, None, flat)

    @property
    def materialized(self):
        return self.kind == "word_pair" or self._flat is not None

    def blocks(self):
        """Yield ``(start, flat_block)`` with rows ``vec(A_i)`` for dense ensembles."""
        if self.kind != "gaussian":
            raise TypeError("blocks() is defined for dense ensembles only")
        if self._flat is not None:
            yield 0, self._flat
            return
        d = self.d
        for b, start in enumerate(range(0, self.n, BLOCK_SIZE)):
            size = min(BLOCK_SIZE, self.n - start)
            yield start, _gaussian_block(self.seed, b, size, d).reshape(size, d * d)

    def matrices(self):
        """All sensing matrices as an ``(n, d, d)`` array (materializes)."""
        if self.kind == "word_pair":
            out = np.zeros((self.n, self.d, self.d))
            out[np.arange(self.n), self.pairs[:, 0], self.pairs[:, 1]] = 1.0
            return out
        flat = np.concatenate([blk for _, blk in self.blocks()], axis=0)
        return flat.reshape(self.n, self.d, self.d)

    def subset(self, idx):
        """Ensemble restricted to the observations ``idx`` (in that order)."""
        idx = np.asarray(idx, dtype=np.intp)
        if self.kind == "word_pair":
            return word_pair_ensemble(self.d, self.pairs[idx])
        if self._flat is not None:
            return MeasurementEnsemble.from_matrices(
                self._flat[idx].reshape(len(idx), self.d, self.d))
        return MeasurementEnsemble.from_matrices(self.matrices()[idx])

    def scaled(self, c):
        """Ensemble with every sensing matrix multiplied by ``c``."""
        return MeasurementEnsemble.from_matrices(c * self.matrices())

    def is_symmetric(self):
        if self.kind == "word_pair":
            return bool(np.all(self.pairs[:, 0] == self.pairs[:, 1]))
        m = self.matrices()
        return bool(np.array_equal(m, np.swapaxes(m, 1, 2)))


@dataclass(frozen=True, eq=False)
class Observations:
    x: np.ndarray
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise scale must be non-negative")

    @property
    def n(self):
        return len(self.x)

    def subset(self, idx):
        return Observations(self.x[np.asarray(idx, dtype=np.intp)], self.sigma)


def gaussian_ensemble(d, n, seed, materialize=None):
    """Seeded ensemble of ``n`` i.i.d. standard normal ``d x d`` matrices.

    ``materialize`` overrides the size rule; both paths give identical values.
    """
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    ens = MeasurementEnsemble("gaussian", d, n, int(seed))
    if materialize is None:
        materialize = d <= MATERIALIZE_MAX_D
    if materialize:
        flat = np.ascontiguousarray(ens.matrices().reshape(n, d * d))
        flat.setflags(write=False)
        ens = MeasurementEnsemble("gaussian", d, n, int(seed), None, flat)
    return ens


def word_pair_ensemble(d, pairs):
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    pairs.setflags(write=False)
    return MeasurementEnsemble("word_pair", d, len(pairs), None, pairs)


def word_pair_ensemble_full(d, n_per_pair):
    """Every ordered pair ``(j, k)`` observed exactly ``n_per_pair`` times."""
    if d < 1 or n_per_pair < 1:
        raise ValueError("d and n_per_pair must be at least 1")
    j, k = np.divmod(np.arange(d * d), d)
    pairs = np.repeat(np.stack([j, k], axis=1), n_per_pair, axis=0)
    return word_pair_ensemble(d, pairs)


def word_pair_ensemble_sampled(d, n, seed):
    """``n`` word pairs drawn uniformly with replacement."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be at least 1")
    rng = np.random.default_rng(seed)
    return word_pair_ensemble(d, rng.integers(0, d, size=(n, 2)))


def sample_word_pair_outcomes(ens, theta, seed):
    """0/1 outcomes ``X_i ~ Bernoulli(Theta[j_i, k_i])`` for a word-pair ensemble.

    ``theta`` holds co-occurrence probabilities and is clipped to [0, 1].
    """
    if ens.kind != "word_pair":
        raise TypeError("Bernoulli outcomes need a word-pair ensemble")
    p = np.clip(apply_operator(ens, theta), 0.0, 1.0)
    rng = np.random.default_rng(seed)
    return Observations((rng.random(ens.n) < p).astype(np.float64), 0.5)


def apply_operator(ens, theta):
    """Vector of inner products ``<A_i, theta>``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (ens.d, ens.d):
        raise ValueError(f"theta must be {ens.d}x{ens.d}, got {theta.shape}")
    if ens.kind == "word_pair":
        return theta[ens.pairs[:, 0], ens.pairs[:, 1]]
    vec = theta.reshape(-1)
    out = np.empty(ens.n)
    for start, blk in ens.blocks():
        out[start:start + len(blk)] = blk @ vec
    return out


def adjoint(ens, eps):
    """``sum_i eps_i A_i`` as a ``d x d`` matrix."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (ens.n,):
        raise ValueError(f"expected a length-{ens.n} vector, got shape {eps.shape}")
    d = ens.d
    if ens.kind == "word_pair":
        out = np.zeros((d, d))
        np.add.at(out, (ens.pairs[:, 0], ens.pairs[:, 1]), eps)
        return out
    acc = np.zeros(d * d)
    for start, blk in ens.blocks():
        acc += eps[start:start + len(blk)] @ blk
    return acc.reshape(d, d)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a proxy/gold instance; defaults reproduce the small-gold setup."""
    d: int = 20
    r: int = 5
    s: int = 2
    n_g: int = 50
    n_p: int = 5000
    sigma_g: float = 1.0
    sigma_p: float = 1.0
    shift_value: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.r < 1 or self.s < 0:
            raise ValueError("d, r must be positive and s non-negative")
        if self.s > self.d:
            raise ValueError(f"s={self.s} exceeds d={self.d}")
        if self.r > self.d:
            raise ValueError(f"r={self.r} exceeds d={self.d}")
        if self.n_g < 1 or self.n_p < 1:
            raise ValueError("sample sizes must be positive")
        if self.sigma_g < 0 or self.sigma_p < 0:
            raise ValueError("noise scales must be non-negative")


@dataclass(frozen=True, eq=False)
class SyntheticInstance:
    spec: SyntheticSpec
    proxy_ensemble: MeasurementEnsemble
    proxy_obs: Observations
    gold_ensemble: MeasurementEnsemble
    gold_obs: Observations
    u_p_star: np.ndarray
    delta_star: np.ndarray
    u_g_star: np.ndarray
    support: np.ndarray

    @property
    def theta_p_star(self):
        return self.u_p_star @ self.u_p_star.T

    @property
    def theta_g_star(self):
        return self.u_g_star @ self.u_g_star.T


def _observe(ens, u, sigma, rng):
    x = apply_operator(ens, u @ u.T)
    if sigma > 0:
        x = x + sigma * rng.standard_normal(ens.n)
    return Observations(x, sigma)


def generate_synthetic(spec):
    """Draw a proxy/gold instance with a planted row-sparse shift.

    ``U_p*`` has i.i.d. N(0, 1) entries; ``s`` rows chosen uniformly without
    replacement get every entry of the shift set to ``spec.shift_value``.
    Everything is a deterministic function of ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    d, r = spec.d, spec.r
    u_p = rng.standard_normal((d, r))
    support = np.sort(rng.choice(d, size=spec.s, replace=False))
    delta = np.zeros((d, r))
    delta[support] = spec.shift_value
    u_g = u_p + delta
    proxy_seed, gold_seed = (int(v) for v in rng.integers(0, 2**62, size=2))
    ens_p = gaussian_ensemble(d, spec.n_p, proxy_seed)
    ens_g = gaussian_ensemble(d, spec.n_g, gold_seed)
    obs_p = _observe(ens_p, u_p, spec.sigma_p, rng)
    obs_g = _observe(ens_g, u_g, spec.sigma_g, rng)
    return SyntheticInstance(spec, ens_p, obs_p, ens_g, obs_g,
                             u_p, delta, u_g, support)
