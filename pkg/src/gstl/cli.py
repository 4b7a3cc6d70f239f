"""Command-line entry points.

Commands::

    gstl synth CONFIG          proxy / gold / transfer comparison on synthetic data
    gstl conditions CONFIG     sampled regularity constants of a sensing ensemble
    gstl cooc CORPUS VOCAB_OUT COOC_OUT
    gstl train COOC --vocab VOCAB --method tl|mittens|glove --out MODEL
    gstl rank MODEL PRETRAINED [--labels FILE]

Config files hold ``key = value`` lines; ``#`` starts a comment.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numerical failure.
"""
import argparse
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io
from .conditions import estimate_conditions
from .experiment import (ExperimentConfig, run_experiment, write_summary_csv,
                         write_trials_csv)
from .factor import SolverDiverged
from .glovetl import (GloveConfig, fit_glove, fit_glove_transfer, fit_mittens,
                      glove_loss, glove_tl_objective, mittens_objective,
                      precision_recall_f1, rank_domain_words, top_count)
from .sensing import gaussian_ensemble, word_pair_ensemble_full, word_pair_ensemble_sampled
from .textpipe import build_vocabulary, count_cooccurrences, load_stopwords, preprocess

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def _convert(raw, typ):
    if typ is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if typ is int:
        return int(raw)
    if typ is float:
        v = float(raw)
        if math.isnan(v):
            raise ValueError("NaN not allowed")
        return v
    return raw


def parse_config(path, schema, required=()):
    """Parse ``key = value`` lines against ``schema`` (name -> type).

    Unknown or repeated keys, malformed lines, bad values and missing
    required keys raise :class:`ConfigError` naming the file and line.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"{path}: not UTF-8 (byte offset {exc.start})") from exc
    out, seen = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        if key in seen:
            raise ConfigError(f"{path}:{lineno}: '{key}' already set on line {seen[key]}")
        try:
            out[key] = _convert(raw, schema[key])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
        seen[key] = lineno
    missing = [k for k in required if k not in out]
    if missing:
        raise ConfigError(f"{path}: missing required key(s): {', '.join(missing)}")
    return out


SYNTH_REQUIRED = ("trials", "output_dir")


def load_experiment_config(path):
    schema = {f.name: f.type for f in fields(ExperimentConfig)}
    values = parse_config(path, schema, SYNTH_REQUIRED)
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ConditionsConfig:
    kind: str
    d: int
    output: str
    n: int = 0
    r: int = 1
    s: int = 2
    n_per_pair: int = 1
    samples: int = 200
    seed: int = 0


def load_conditions_config(path):
    schema = {f.name: f.type for f in fields(ConditionsConfig)}
    values = parse_config(path, schema, ("kind", "d", "output"))
    cfg = ConditionsConfig(**values)
    if cfg.kind not in ("gaussian", "word_pair", "word_pair_sampled"):
        raise ConfigError(f"{path}: kind must be gaussian, word_pair or word_pair_sampled")
    if cfg.kind != "word_pair" and cfg.n < 1:
        raise ConfigError(f"{path}: n must be positive for kind={cfg.kind}")
    return cfg


def cmd_synth(args):
    cfg = load_experiment_config(args.config)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcomes = run_experiment(cfg, workers=args.workers)
    write_trials_csv(out / "trials.csv", outcomes)
    write_summary_csv(out / "summary.csv", outcomes)
    (out / "cv").mkdir(exist_ok=True)
    diag = ["trial,support,active_set,holdout_loss,projection_active"]
    for t, o in enumerate(outcomes):
        io.write_cv_table(out / "cv" / f"trial_{t:03d}.csv", o.cv_rows)
        diag.append(f"{t},{' '.join(map(str, o.support))},{' '.join(map(str, o.active_set))},"
                    f"{io.fmt(o.holdout_loss)},{int(o.projection_active)}")
    (out / "diagnostics.csv").write_text("\n".join(diag) + "\n", encoding="utf-8")
    print((out / "summary.csv").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_conditions(args):
    cfg = load_conditions_config(args.config)
    rng = np.random.default_rng(cfg.seed)
    if cfg.kind == "gaussian":
        ens = gaussian_ensemble(cfg.d, cfg.n, int(rng.integers(0, 2**62)))
    elif cfg.kind == "word_pair":
        ens = word_pair_ensemble_full(cfg.d, cfg.n_per_pair)
    else:
        ens = word_pair_ensemble_sampled(cfg.d, cfg.n, int(rng.integers(0, 2**62)))
    u_star = rng.standard_normal((cfg.d, cfg.r))
    support = np.arange(min(cfg.s, cfg.d))
    est = estimate_conditions(ens, cfg.r, cfg.samples, cfg.seed, u_star, support)
    lines = ["quantity,value,samples,seed"]
    lines += [f"{name},{io.fmt(v)},{k},{seed}" for name, v, k, seed in est.rows()]
    Path(cfg.output).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_cooc(args):
    try:
        raw = Path(args.corpus).read_bytes()
    except OSError as exc:
        raise FileNotFoundError(f"{args.corpus}: {exc.strerror}") from exc
    stop = load_stopwords(args.stopwords) if args.stopwords else ()
    sentences = preprocess(raw, stop)
    vocab = build_vocabulary(sentences, args.min_count)
    counts = count_cooccurrences(sentences, vocab, args.window, not args.no_distance_weighting)
    io.write_vocabulary(args.vocab_out, vocab)
    io.write_cooccurrences(args.cooc_out, counts)
    return EXIT_OK


def cmd_train(args):
    vocab = io.read_vocabulary(args.vocab)
    counts = io.read_cooccurrences(args.cooc, vocab.tokens, args.window,
                                   not args.no_distance_weighting)
    cfg = GloveConfig(epochs=args.epochs, learning_rate=args.learning_rate, seed=args.seed,
                      tol=args.tol, dim=args.dim)
    if args.method == "glove":
        model = fit_glove(counts, cfg)
        objective = glove_loss(model, counts)
    else:
        if not args.pretrained:
            raise ValueError(f"--pretrained is required for method {args.method}")
        pre = io.read_embeddings(args.pretrained)
        fit, obj = ((fit_glove_transfer, glove_tl_objective) if args.method == "tl"
                    else (fit_mittens, mittens_objective))
        model = fit(counts, pre, args.lam, cfg)
        objective = obj(model, counts, pre, args.lam)
    io.write_model(args.out, model, companions=True)
    print(f"objective = {io.fmt(objective)}")
    return EXIT_OK


def cmd_rank(args):
    model = io.read_embeddings(args.model)
    pre = io.read_embeddings(args.pretrained)
    ranking = rank_domain_words(model, pre)
    k = top_count(len(ranking), args.top_fraction)
    lines = ["rank,token,score,predicted_domain"]
    lines += [f"{i},{t},{io.fmt(s)},{int(i <= k)}"
              for i, (t, s) in enumerate(ranking.items, 1)]
    if args.labels:
        p, r, f1 = precision_recall_f1(ranking, io.read_labels(args.labels), args.top_fraction)
        lines += ["", f"precision,{io.fmt(p)}", f"recall,{io.fmt(r)}", f"f1,{io.fmt(f1)}"]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _fraction(raw):
    v = float(raw)
    if not 0 < v <= 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1]")
    return v


def build_parser():
    ap = argparse.ArgumentParser(
        prog="gstl", description=__doc__.split("\n\n")[0],
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="File formats: vocabulary 'token<TAB>count' (id = line number); "
               "co-occurrences 'i<TAB>j<TAB>weight' with i <= j; embeddings "
               "'token v1 ... vr'. Reals use 17 significant digits.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthetic proxy/gold/transfer experiment")
    p.add_argument("config")
    p.add_argument("--workers", type=int, default=None,
                   help="parallel trials (default: GSTL_THREADS or all cores)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("conditions", help="sampled RWC / QCC / smoothness constants")
    p.add_argument("config")
    p.set_defaults(func=cmd_conditions)

    p = sub.add_parser("cooc", help="corpus -> vocabulary and co-occurrence TSV")
    p.add_argument("corpus")
    p.add_argument("vocab_out")
    p.add_argument("cooc_out")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--min-count", type=int, default=1)
    p.add_argument("--no-distance-weighting", action="store_true")
    p.add_argument("--stopwords", metavar="FILE")
    p.set_defaults(func=cmd_cooc)

    p = sub.add_parser("train", help="fit GloVe, group transfer or Mittens")
    p.add_argument("cooc")
    p.add_argument("--vocab", required=True)
    p.add_argument("--pretrained")
    p.add_argument("--method", choices=("tl", "mittens", "glove"), default="tl")
    p.add_argument("--lambda", dest="lam", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--no-distance-weighting", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("rank", help="rank words by distance to pre-trained vectors")
    p.add_argument("model")
    p.add_argument("pretrained")
    p.add_argument("--labels")
    p.add_argument("--top-fraction", type=_fraction, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rank)
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gstl: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverDiverged as exc:
        print(f"gstl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        print(f"gstl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
