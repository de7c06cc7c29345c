"""Per-language phrase embeddings trained with skip-gram negative sampling."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .utils import fmt9

log = logging.getLogger(__name__)

JOINER = "▁"


@dataclass(frozen=True)
class SgnsConfig:
    dimension: int = 64
    window: int = 5
    negatives: int = 10
    epochs: int = 5
    learning_rate: float = 0.025
    subsample_threshold: float = 1e-4
    min_count: int = 5
    seed: int = 0
    batch_size: int = 512

    def __post_init__(self):
        if self.dimension < 1 or self.window < 1 or self.negatives < 1:
            raise ValueError("dimension, window and negatives must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class EmbeddingSpace:
    language: str
    vocabulary: tuple[str, ...]
    vectors: np.ndarray
    frequency: tuple[int, ...]

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim != 2 or vecs.shape[0] != len(self.vocabulary):
            raise ValueError("vectors must be a |vocab| x dim matrix")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ValueError("vocabulary entries must be unique")
        if not np.all(np.isfinite(vecs)):
            raise ValueError("embedding vectors must be finite")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)
        object.__setattr__(self, "frequency", tuple(int(f) for f in self.frequency))
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.vocabulary)})

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.vocabulary)

    def __contains__(self, word):
        return word in self._index

    def index(self, word: str) -> int:
        return self._index[word]

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[self._index[word]]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{len(self.vocabulary)} {self.dimension}\n")
            for word, vec in zip(self.vocabulary, self.vectors):
                f.write(word + " " + " ".join(fmt9(x) for x in vec) + "\n")
        with open(str(path) + ".freq", "w", encoding="utf-8") as f:
            for word, freq in zip(self.vocabulary, self.frequency):
                f.write(f"{word}\t{freq}\n")

    @classmethod
    def load(cls, path, language: str = "") -> "EmbeddingSpace":
        with open(path, encoding="utf-8") as f:
            n, dim = (int(x) for x in f.readline().split())
            words, rows = [], []
            for line in f:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}: expected {dim} values for {parts[0]!r}")
                words.append(parts[0])
                rows.append([float(x) for x in parts[1:]])
        if len(words) != n:
            raise ValueError(f"{path}: header announces {n} entries, found {len(words)}")
        freq = [0] * n
        try:
            with open(str(path) + ".freq", encoding="utf-8") as f:
                lookup = dict(line.rstrip("\n").split("\t") for line in f)
            freq = [int(lookup.get(w, 0)) for w in words]
        except FileNotFoundError:
            pass
        vecs = np.array(rows, dtype=np.float64).reshape(n, dim)
        return cls(language, tuple(words), vecs, tuple(freq))


def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine undefined for a zero vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def bigram_scores(corpus: Corpus, min_count: int) -> dict[tuple[str, str], float]:
    """Association score (count(ab) - min_count) * N / (count(a) * count(b)) per adjacent pair."""
    unigrams: Counter = Counter()
    bigrams: Counter = Counter()
    for sent in corpus:
        unigrams.update(sent)
        bigrams.update(zip(sent, sent[1:]))
    n = sum(unigrams.values())
    return {
        (a, b): (c - min_count) * n / (unigrams[a] * unigrams[b])
        for (a, b), c in bigrams.items()
    }


def merge_frequent_bigrams(corpus: Corpus, min_count: int = 5,
                           score_threshold: float = 10.0) -> Corpus:
    """Join strongly associated adjacent pairs into single phrase tokens.

    One left-to-right pass; a token consumed by a merge cannot start another.
    """
    if math.isinf(score_threshold) and score_threshold > 0:
        return corpus
    scores = bigram_scores(corpus, min_count)
    out = []
    for sent in corpus:
        merged = []
        i = 0
        while i < len(sent):
            if i + 1 < len(sent) and scores.get((sent[i], sent[i + 1]), -math.inf) > score_threshold:
                merged.append(sent[i] + JOINER + sent[i + 1])
                i += 2
            else:
                merged.append(sent[i])
                i += 1
        out.append(tuple(merged))
    return Corpus(corpus.language, tuple(out))


def _build_vocab(corpus: Corpus, min_count: int) -> tuple[list[str], list[int]]:
    counts: Counter = Counter()
    for sent in corpus:
        counts.update(sent)
    kept = [(w, c) for w, c in counts.items() if c >= min_count]
    kept.sort(key=lambda wc: (-wc[1], wc[0]))
    return [w for w, _ in kept], [c for _, c in kept]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * np.clip(x, -30, 30)))


def _scatter_add(table: np.ndarray, rows: np.ndarray, values: np.ndarray) -> None:
    # np.add.at is an order of magnitude slower for row scatters
    order = np.argsort(rows, kind="stable")
    rows = rows[order]
    starts = np.flatnonzero(np.r_[True, rows[1:] != rows[:-1]])
    table[rows[starts]] += np.add.reduceat(values[order], starts, axis=0)


def train_sgns(corpus: Corpus, config: SgnsConfig = SgnsConfig()) -> EmbeddingSpace:
    """Skip-gram with negative sampling, minibatched over (center, context) pairs.

    Uses a dynamic window, frequent-word subsampling, a unigram^0.75 noise
    distribution and a linearly decaying learning rate. Training is
    deterministic for a given seed.
    """
    if len(corpus) == 0:
        raise ValueError("cannot train embeddings on an empty corpus")
    vocab, freqs = _build_vocab(corpus, config.min_count)
    if not vocab:
        raise ValueError("empty effective vocabulary (raise corpus size or lower min_count)")
    index = {w: i for i, w in enumerate(vocab)}
    rng = np.random.default_rng(config.seed)
    dim = config.dimension

    ids, sent_ids = [], []
    for si, sent in enumerate(corpus):
        for tok in sent:
            j = index.get(tok)
            if j is not None:
                ids.append(j)
                sent_ids.append(si)
    ids = np.array(ids, dtype=np.int64)
    sent_ids = np.array(sent_ids, dtype=np.int64)

    counts = np.array(freqs, dtype=np.float64)
    total = counts.sum()
    rel = counts / total
    if config.subsample_threshold > 0:
        keep_prob = np.minimum(1.0, np.sqrt(config.subsample_threshold / rel)
                               + config.subsample_threshold / rel)
    else:
        keep_prob = np.ones_like(rel)
    noise = counts ** 0.75
    noise_cdf = np.cumsum(noise / noise.sum())
    noise_cdf[-1] = 1.0

    w_in = (rng.random((len(vocab), dim)) - 0.5) / dim
    w_out = np.zeros((len(vocab), dim))

    def epoch_pairs():
        keep = rng.random(len(ids)) < keep_prob[ids]
        tok = ids[keep]
        sid = sent_ids[keep]
        span = rng.integers(1, config.window + 1, len(tok))
        centers, contexts = [], []
        for d in range(1, config.window + 1):
            same = sid[:-d] == sid[d:]
            fwd = same & (span[:-d] >= d)
            centers.append(tok[:-d][fwd])
            contexts.append(tok[d:][fwd])
            bwd = same & (span[d:] >= d)
            centers.append(tok[d:][bwd])
            contexts.append(tok[:-d][bwd])
        c = np.concatenate(centers)
        o = np.concatenate(contexts)
        perm = rng.permutation(len(c))
        return c[perm], o[perm]

    total_batches = None
    step = 0
    k = config.negatives
    # every pair in a batch pushes the same k noise rows; on tiny vocabularies a
    # full batch of summed stale updates diverges, so batches never exceed |V|
    batch = max(1, min(config.batch_size, len(vocab)))
    for epoch in range(config.epochs):
        cen, ctx = epoch_pairs()
        if total_batches is None:
            total_batches = config.epochs * math.ceil(len(cen) / batch)
        for start in range(0, len(cen), batch):
            lr = config.learning_rate * max(1e-4, 1.0 - step / max(1, total_batches))
            step += 1
            c = cen[start:start + batch]
            o = ctx[start:start + batch]
            neg = np.searchsorted(noise_cdf, rng.random(k))
            vc = w_in[c]
            vo = w_out[o]
            vn = w_out[neg]
            pos = _sigmoid(np.einsum("bd,bd->b", vc, vo))
            negs = _sigmoid(vc @ vn.T)
            g_pos = (1.0 - pos) * lr
            g_neg = -negs * lr
            grad_in = g_pos[:, None] * vo + g_neg @ vn
            _scatter_add(w_out, o, g_pos[:, None] * vc)
            _scatter_add(w_out, neg, g_neg.T @ vc)
            _scatter_add(w_in, c, grad_in)
        log.debug("sgns epoch %d done (%d pairs)", epoch, len(cen))

    return EmbeddingSpace(corpus.language, tuple(vocab), w_in, tuple(freqs))
