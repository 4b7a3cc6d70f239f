"""Text file formats.

All reals are written with 17 significant digits, '.' decimal separator and
'\\n' line endings so that output is byte-stable and round-trips exactly.
"""
import os
from pathlib import Path

import numpy as np

from .glovetl import GloveModel, PretrainedEmbeddings
from .sensing import (Observations, SyntheticInstance, SyntheticSpec,
                      gaussian_ensemble)
from .textpipe import CooccurrenceCounts, Vocabulary

__all__ = [
    "fmt",
    "write_matrix_csv",
    "read_matrix_csv",
    "write_vector",
    "read_vector",
    "save_instance",
    "load_instance",
    "write_embeddings",
    "read_embeddings",
    "write_vocabulary",
    "read_vocabulary",
    "write_cooccurrences",
    "read_cooccurrences",
    "write_cv_table",
    "write_model",
    "read_model",
    "read_labels",
]


def fmt(x):
    """17-significant-digit text for a real; ``nan``/``inf`` spelled out."""
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    return "0" if s == "-0" else s


def _write(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(line + "\n" for line in lines)


def write_matrix_csv(path, m):
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    _write(path, (",".join(fmt(v) for v in row) for row in m))


def read_matrix_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = [[float(v) for v in ln.split(",")] for ln in fh if ln.strip()]
    return np.array(rows, dtype=np.float64)


def write_vector(path, v):
    _write(path, (fmt(x) for x in np.asarray(v, dtype=np.float64)))


def read_vector(path):
    with open(path, encoding="utf-8") as fh:
        return np.array([float(ln) for ln in fh if ln.strip()], dtype=np.float64)


_SPEC_FIELDS = ("d", "r", "s", "n_g", "n_p", "sigma_g", "sigma_p", "shift_value", "seed")


def save_instance(inst, directory):
    """Write a synthetic instance as CSV files plus ``manifest.txt``.

    Sensing matrices are not stored; the manifest keeps the ensemble seeds
    they are regenerated from.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    spec = inst.spec
    lines = [f"{k} = {getattr(spec, k)}" for k in _SPEC_FIELDS]
    lines += [f"proxy_ensemble_seed = {inst.proxy_ensemble.seed}",
              f"gold_ensemble_seed = {inst.gold_ensemble.seed}",
              "support = " + ",".join(str(int(j)) for j in inst.support)]
    _write(out / "manifest.txt", lines)
    write_matrix_csv(out / "u_p_star.csv", inst.u_p_star)
    write_matrix_csv(out / "delta_star.csv", inst.delta_star)
    write_matrix_csv(out / "u_g_star.csv", inst.u_g_star)
    write_vector(out / "x_proxy.txt", inst.proxy_obs.x)
    write_vector(out / "x_gold.txt", inst.gold_obs.x)


def _read_kv(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if "=" in ln:
                k, v = ln.split("=", 1)
                out[k.strip()] = v.strip()
    return out


def load_instance(directory):
    src = Path(directory)
    kv = _read_kv(src / "manifest.txt")
    types = {f: type(getattr(SyntheticSpec(), f)) for f in _SPEC_FIELDS}
    spec = SyntheticSpec(**{k: types[k](kv[k]) for k in _SPEC_FIELDS})
    support = np.array([int(j) for j in kv["support"].split(",") if j], dtype=np.intp)
    ens_p = gaussian_ensemble(spec.d, spec.n_p, int(kv["proxy_ensemble_seed"]))
    ens_g = gaussian_ensemble(spec.d, spec.n_g, int(kv["gold_ensemble_seed"]))
    return SyntheticInstance(
        spec, ens_p, Observations(read_vector(src / "x_proxy.txt"), spec.sigma_p),
        ens_g, Observations(read_vector(src / "x_gold.txt"), spec.sigma_g),
        read_matrix_csv(src / "u_p_star.csv"), read_matrix_csv(src / "delta_star.csv"),
        read_matrix_csv(src / "u_g_star.csv"), support)


def write_embeddings(path, tokens, vectors):
    """``token v1 v2 ... vr`` per line."""
    vectors = np.asarray(vectors, dtype=np.float64)
    _write(path, (" ".join([t] + [fmt(x) for x in row])
                  for t, row in zip(tokens, vectors)))


def read_embeddings(path):
    tokens, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, 1):
            parts = ln.rstrip("\n").split(" ")
            if not parts or not parts[0]:
                continue
            try:
                rows.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad number ({exc})") from exc
            tokens.append(parts[0])
    if rows and len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: vectors of differing length")
    vecs = np.array(rows, dtype=np.float64).reshape(len(rows), len(rows[0]) if rows else 0)
    return PretrainedEmbeddings(tokens, vecs)


def write_vocabulary(path, vocab):
    _write(path, (f"{t}\t{c}" for t, c in zip(vocab.tokens, vocab.counts)))


def read_vocabulary(path):
    tokens, counts = [], []
    with open(path, encoding="utf-8") as fh:
        for ln in fh:
            if ln.strip():
                t, c = ln.rstrip("\n").split("\t")
                tokens.append(t)
                counts.append(int(c))
    return Vocabulary(tokens, counts, min(counts, default=1))


def write_cooccurrences(path, counts):
    """Upper half ``i<TAB>j<TAB>weight`` with ``i <= j``, sorted."""
    _write(path, (f"{i}\t{j}\t{fmt(w)}" for i, j, w in counts.upper_items()))


def read_cooccurrences(path, tokens=None, window=5, distance_weighting=True):
    """Read the upper-half table back into a full symmetric one."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, 1):
            if not ln.strip():
                continue
            try:
                i, j, w = ln.rstrip("\n").split("\t")
                i, j, w = int(i), int(j), float(w)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed line") from exc
            table[(i, j)] = w
            table[(j, i)] = w
    if tokens is not None and table and max(max(k) for k in table) >= len(tokens):
        raise ValueError(f"{path}: word id outside the vocabulary")
    return CooccurrenceCounts(table, window, True, distance_weighting,
                              list(tokens) if tokens is not None else None)


def write_cv_table(path, rows):
    _write(path, ["lambda,fold,heldout_loss,mean_loss"]
           + [f"{fmt(r.lam)},{r.fold},{fmt(r.heldout_loss)},{fmt(r.mean_loss)}"
              for r in rows])


def write_model(path, model, companions=False):
    """Write ``U + V``; with ``companions`` also ``.u``, ``.v``, ``.b``, ``.c`` files."""
    write_embeddings(path, model.tokens, model.embedding)
    if companions:
        base = os.fspath(path)
        write_embeddings(base + ".u", model.tokens, model.u)
        write_embeddings(base + ".v", model.tokens, model.v)
        write_vector(base + ".b", model.b)
        write_vector(base + ".c", model.c)


def read_model(path):
    """Rebuild a :class:`GloveModel` from the companion files of ``path``."""
    base = os.fspath(path)
    u = read_embeddings(base + ".u")
    v = read_embeddings(base + ".v")
    return GloveModel(u.vectors, v.vectors, read_vector(base + ".b"),
                      read_vector(base + ".c"), u.tokens)


def read_labels(path):
    """Domain labels from ``token<TAB>label`` lines (label 0/1).

    A file of bare tokens is read as the set of domain words instead.
    """
    labels, bare = {}, True
    with open(path, encoding="utf-8") as fh:
        for lineno, ln in enumerate(fh, 1):
            parts = ln.split()
            if not parts:
                continue
            if len(parts) > 1:
                bare = False
                if parts[1] not in ("0", "1"):
                    raise ValueError(f"{path}:{lineno}: label must be 0 or 1")
            labels[parts[0]] = len(parts) == 1 or parts[1] == "1"
    return set(labels) if bare else labels
