"""Corpus preprocessing, vocabulary building and windowed co-occurrence counts."""
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Vocabulary",
    "CooccurrenceCounts",
    "preprocess",
    "split_sentences",
    "tokenize",
    "load_stopwords",
    "build_vocabulary",
    "count_cooccurrences",
]

MIN_SENTENCE_CHARS = 20
MIN_SENTENCE_TOKENS = 5

_SENTENCE_END = re.compile(r"(?<=[.!?])\s+|\n\s*\n")


def split_sentences(text):
    return [s.strip() for s in _SENTENCE_END.split(text) if s.strip()]


def _strip_punct(word):
    return "".join(ch for ch in word if not unicodedata.category(ch).startswith("P"))


def tokenize(sentence):
    """Lowercase, drop punctuation characters, split on whitespace."""
    return [t for t in (_strip_punct(w) for w in sentence.lower().split()) if t]


def load_stopwords(path):
    """Newline-delimited stopword file; blank lines and ``#`` comments ignored."""
    with open(path, encoding="utf-8") as fh:
        return {ln.strip().lower() for ln in fh
                if ln.strip() and not ln.lstrip().startswith("#")}


def preprocess(raw_text, stopwords=(), min_chars=MIN_SENTENCE_CHARS,
               min_tokens=MIN_SENTENCE_TOKENS):
    """Split ``raw_text`` into filtered token lists.

    A sentence is dropped when its stripped text has fewer than ``min_chars``
    characters or it yields fewer than ``min_tokens`` tokens; both checks
    run before stopword removal.

    Raises
    ------
    ValueError
        If ``raw_text`` is bytes that are not valid UTF-8; the message gives
        the offending byte offset.
    """
    if isinstance(raw_text, (bytes, bytearray)):
        try:
            raw_text = bytes(raw_text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ValueError(f"invalid UTF-8 at byte offset {exc.start}") from exc
    stop = {w.lower() for w in stopwords}
    out = []
    for sent in split_sentences(raw_text):
        toks = tokenize(sent)
        if len(sent) < min_chars or len(toks) < min_tokens:
            continue
        toks = [t for t in toks if t not in stop]
        if toks:
            out.append(toks)
    return out


@dataclass
class Vocabulary:
    tokens: list
    counts: list
    min_count: int = 1
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index


def build_vocabulary(sentences, min_count=1):
    """Tokens seen at least ``min_count`` times, ordered by count then token."""
    if min_count < 1:
        raise ValueError("min_count must be at least 1")
    freq = Counter(t for s in sentences for t in s)
    kept = sorted((t for t, c in freq.items() if c >= min_count),
                  key=lambda t: (-freq[t], t))
    return Vocabulary(kept, [freq[t] for t in kept], min_count)


@dataclass
class CooccurrenceCounts:
    """Sparse ``(i, j) -> weight`` table over vocabulary ids."""
    weights: dict
    window: int
    symmetric: bool = True
    distance_weighting: bool = True
    tokens: list | None = None

    @property
    def d(self):
        if self.tokens is not None:
            return len(self.tokens)
        return 1 + max((max(k) for k in self.weights), default=-1)

    def total(self):
        return sum(self.weights.values())

    def upper_items(self):
        """``(i, j, w)`` with ``i <= j``, sorted by ``(i, j)``."""
        return [(i, j, w) for (i, j), w in sorted(self.weights.items()) if i <= j]

    def arrays(self):
        """Row ids, column ids and weights of every stored pair in sorted order."""
        keys = sorted(self.weights)
        rows = np.fromiter((k[0] for k in keys), dtype=np.intp, count=len(keys))
        cols = np.fromiter((k[1] for k in keys), dtype=np.intp, count=len(keys))
        vals = np.fromiter((self.weights[k] for k in keys), dtype=np.float64,
                           count=len(keys))
        return rows, cols, vals

    def merge(self, other):
        """Sum of two tables built with the same settings."""
        if (self.window, self.distance_weighting) != (other.window, other.distance_weighting):
            raise ValueError("cannot merge tables built with different settings")
        out = dict(self.weights)
        for k, w in other.weights.items():
            out[k] = out.get(k, 0.0) + w
        return CooccurrenceCounts(out, self.window, self.symmetric,
                                  self.distance_weighting, self.tokens)


def count_cooccurrences(sentences, vocab, window=5, distance_weighting=True):
    """Symmetric windowed counts; out-of-vocabulary tokens are removed first.

    Each token pair at distance ``k <= window`` inside one sentence adds
    ``1/k`` (or 1) to both ``(a, b)`` and ``(b, a)``.
    """
    if window < 1:
        raise ValueError("window must be at least 1")
    idx = vocab.index
    table = {}
    for sent in sentences:
        ids = [idx[t] for t in sent if t in idx]
        for p, a in enumerate(ids):
            for k in range(1, min(window, len(ids) - 1 - p) + 1):
                b = ids[p + k]
                w = 1.0 / k if distance_weighting else 1.0
                table[(a, b)] = table.get((a, b), 0.0) + w
                table[(b, a)] = table.get((b, a), 0.0) + w
    return CooccurrenceCounts(table, window, True, distance_weighting,
                              list(vocab.tokens))

