"""Orthogonal mapping between two embedding spaces and cross-lingual retrieval."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingSpace
from .utils import fmt9

log = logging.getLogger(__name__)

CSLS_K = 10


@dataclass(frozen=True)
class RotationMap:
    matrix: np.ndarray
    source_language: str = "src"
    target_language: str = "tgt"

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("rotation must be a square matrix")
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    def orthogonality_error(self) -> float:
        w = self.matrix
        return float(np.linalg.norm(w.T @ w - np.eye(len(w))))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"{self.dimension}\n")
            for row in self.matrix:
                f.write(" ".join(fmt9(x) for x in row) + "\n")

    @classmethod
    def load(cls, path, source_language="src", target_language="tgt") -> "RotationMap":
        with open(path, encoding="utf-8") as f:
            dim = int(f.readline())
            rows = [[float(x) for x in line.split()] for line in f if line.strip()]
        w = np.array(rows, dtype=np.float64)
        if w.shape != (dim, dim):
            raise ValueError(f"{path}: expected a {dim}x{dim} matrix, got {w.shape}")
        return cls(w, source_language, target_language)


@dataclass(frozen=True)
class SeedDictionary:
    pairs: tuple[tuple[str, str], ...]

    def __post_init__(self):
        pairs = tuple(dict.fromkeys(tuple(p) for p in self.pairs))
        object.__setattr__(self, "pairs", pairs)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s, t in self.pairs:
                f.write(f"{s}\t{t}\n")

    @classmethod
    def load(cls, path) -> "SeedDictionary":
        pairs = []
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if line:
                    s, t = line.split("\t")
                    pairs.append((s, t))
        return cls(tuple(pairs))


def normalize_space(space: EmbeddingSpace) -> EmbeddingSpace:
    """Unit-length, mean-center, unit-length again."""
    v = np.array(space.vectors)
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
    v -= v.mean(axis=0, keepdims=True)
    v /= np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)
    return EmbeddingSpace(space.language, space.vocabulary, v, space.frequency)


def build_seed_dictionary(src: EmbeddingSpace, tgt: EmbeddingSpace,
                          max_pairs: int = 5000) -> SeedDictionary:
    """Pair strings spelled identically in both vocabularies, most frequent first."""
    shared = [w for w in src.vocabulary if w in tgt]
    shared.sort(key=lambda w: (-(src.frequency[src.index(w)] + tgt.frequency[tgt.index(w)]), w))
    pairs = tuple((w, w) for w in shared[:max_pairs])
    if len(pairs) < src.dimension + 1:
        raise ValueError(f"insufficient seed: {len(pairs)} identical pairs for dimension {src.dimension}")
    return SeedDictionary(pairs)


def procrustes(src: EmbeddingSpace, tgt: EmbeddingSpace, seed: SeedDictionary) -> RotationMap:
    """Orthogonal W minimizing ||W x_i - y_i|| over the seed pairs."""
    pairs = [(s, t) for s, t in seed if s in src and t in tgt]
    if not pairs:
        raise ValueError("degenerate seed: no seed pair present in both spaces")
    x = src.vectors[[src.index(s) for s, _ in pairs]]
    y = tgt.vectors[[tgt.index(t) for _, t in pairs]]
    m = y.T @ x
    u, sigma, vt = np.linalg.svd(m)
    rank = int(np.sum(sigma > sigma[0] * 1e-10)) if sigma[0] > 0 else 0
    if rank < min(len(pairs), src.dimension):
        raise ValueError(f"degenerate seed: cross-covariance rank {rank}")
    return RotationMap(u @ vt, src.language, tgt.language)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.maximum(np.linalg.norm(v, axis=1, keepdims=True), 1e-12)


def _topk_mean(sims: np.ndarray, k: int) -> np.ndarray:
    k = min(k, sims.shape[1])
    part = np.partition(sims, sims.shape[1] - k, axis=1)[:, -k:]
    return part.mean(axis=1)


class Retriever:
    """Cached mapped spaces and CSLS neighborhood terms for repeated queries."""

    def __init__(self, rotation: RotationMap, src: EmbeddingSpace, tgt: EmbeddingSpace,
                 csls_k: int = CSLS_K, chunk: int = 2048):
        self.src, self.tgt = src, tgt
        self.mapped = _unit(src.vectors @ rotation.matrix.T)
        self.tgt_unit = _unit(tgt.vectors)
        self.csls_k = csls_k
        self.r_src = np.empty(len(src))
        for i in range(0, len(src), chunk):
            self.r_src[i:i + chunk] = _topk_mean(self.mapped[i:i + chunk] @ self.tgt_unit.T, csls_k)
        self.r_tgt = np.empty(len(tgt))
        for i in range(0, len(tgt), chunk):
            self.r_tgt[i:i + chunk] = _topk_mean(self.tgt_unit[i:i + chunk] @ self.mapped.T, csls_k)
        freq = np.array(tgt.frequency, dtype=np.float64)
        # lexicographic rank as a final tie-breaker
        lex = np.empty(len(tgt), dtype=np.int64)
        lex[np.argsort(np.array(tgt.vocabulary, dtype=object), kind="stable")] = np.arange(len(tgt))
        self._tie_freq = freq
        self._tie_lex = lex

    def cosines(self, rows) -> np.ndarray:
        return self.mapped[rows] @ self.tgt_unit.T

    def csls(self, rows) -> np.ndarray:
        cos = self.cosines(rows)
        return 2 * cos - self.r_src[np.asarray(rows)][..., None] - self.r_tgt

    def rank(self, scores: np.ndarray, k: int) -> np.ndarray:
        order = np.lexsort((self._tie_lex, -self._tie_freq, -scores))
        return order[:k]

    def neighbors(self, query: str, k: int) -> list[tuple[str, float]]:
        if query not in self.src:
            raise KeyError(f"query {query!r} not in source vocabulary")
        if k < 1:
            raise ValueError("k must be >= 1")
        scores = self.csls([self.src.index(query)])[0]
        return [(self.tgt.vocabulary[j], float(scores[j])) for j in self.rank(scores, k)]

    def top1(self, rows, chunk: int = 2048) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        out = np.empty(len(rows), dtype=np.int64)
        for i in range(0, len(rows), chunk):
            block = self.csls(rows[i:i + chunk])
            for r, scores in enumerate(block):
                best = scores.max()
                cand = np.flatnonzero(scores == best)
                if len(cand) > 1:
                    cand = cand[np.lexsort((self._tie_lex[cand], -self._tie_freq[cand]))]
                out[i + r] = cand[0]
        return out


def csls_neighbors(rotation: RotationMap, src: EmbeddingSpace, tgt: EmbeddingSpace,
                   query: str, k: int, csls_k: int = CSLS_K) -> list[tuple[str, float]]:
    return Retriever(rotation, src, tgt, csls_k).neighbors(query, k)


def eval_p_at_1(rotation: RotationMap, src: EmbeddingSpace, tgt: EmbeddingSpace,
                gold: SeedDictionary, csls_k: int = CSLS_K) -> float:
    """Fraction of gold source words whose CSLS top-1 is one of their gold targets."""
    wanted: dict[str, set[str]] = {}
    for s, t in gold:
        wanted.setdefault(s, set()).add(t)
    if not wanted:
        raise ValueError("gold dictionary is empty")
    queries = [s for s in wanted if s in src]
    if not queries:
        return 0.0
    ret = Retriever(rotation, src, tgt, csls_k)
    best = ret.top1([src.index(s) for s in queries])
    hits = sum(tgt.vocabulary[j] in wanted[s] for s, j in zip(queries, best))
    return hits / len(wanted)


def mutual_nn_dictionary(rotation: RotationMap, src: EmbeddingSpace, tgt: EmbeddingSpace,
                         max_rank: int = 15000, csls_k: int = CSLS_K) -> SeedDictionary:
    """Pairs that are each other's CSLS top-1 among the most frequent entries."""
    ns, nt = min(max_rank, len(src)), min(max_rank, len(tgt))
    fwd = Retriever(rotation, src, tgt, csls_k)
    inverse = RotationMap(rotation.matrix.T, rotation.target_language, rotation.source_language)
    bwd = Retriever(inverse, tgt, src, csls_k)
    s2t = fwd.top1(np.arange(ns))
    t2s = bwd.top1(np.arange(nt))
    pairs = [(src.vocabulary[i], tgt.vocabulary[j])
             for i, j in enumerate(s2t) if j < nt and t2s[j] == i]
    return SeedDictionary(tuple(pairs))


def align(src: EmbeddingSpace, tgt: EmbeddingSpace, seed: SeedDictionary,
          refine_iterations: int = 1, max_rank: int = 15000,
          csls_k: int = CSLS_K) -> RotationMap:
    """Procrustes on the seed, then re-estimate from mutual nearest neighbors.

    Both spaces are expected to be normalized already (see ``normalize_space``).
    """
    w = procrustes(src, tgt, seed)
    for it in range(refine_iterations):
        refined = mutual_nn_dictionary(w, src, tgt, max_rank, csls_k)
        log.info("refinement %d: %d mutual pairs", it + 1, len(refined))
        if len(refined) < src.dimension:
            break
        w = procrustes(src, tgt, refined)
    return w
