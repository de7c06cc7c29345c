"""Phrase tables: induced from aligned embeddings, or estimated from bitext."""

from __future__ import annotations

import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .alignment import RotationMap, Retriever
from .embeddings import JOINER, EmbeddingSpace
from .utils import fmt9

log = logging.getLogger(__name__)

NULL = "<null>"

Phrase = tuple[str, ...]
Pair = tuple[Sequence[str], Sequence[str]]


@dataclass(frozen=True)
class PhraseTable:
    """source phrase -> [(target phrase, p(t|s), p(s|t)), ...] sorted by p(t|s) descending."""

    entries: dict = field(repr=False)
    source_language: str = "src"
    target_language: str = "tgt"
    max_phrase_len: int = 0

    def __post_init__(self):
        ordered = {}
        longest = 0
        for src in sorted(self.entries):
            opts = sorted(((tuple(t), float(a), float(b)) for t, a, b in self.entries[src]),
                          key=lambda o: (-o[1], o[0]))
            for _, a, b in opts:
                if not (0.0 < a <= 1.0 and 0.0 < b <= 1.0):
                    raise ValueError(f"probabilities must lie in (0, 1]: {src} {a} {b}")
            ordered[tuple(src)] = tuple(opts)
            longest = max([longest, len(src)] + [len(t) for t, _, _ in opts])
        object.__setattr__(self, "entries", ordered)
        if not self.max_phrase_len:
            object.__setattr__(self, "max_phrase_len", longest)

    def __len__(self):
        return sum(len(v) for v in self.entries.values())

    def __contains__(self, src):
        return tuple(src) in self.entries

    def options(self, src: Sequence[str]) -> tuple:
        return self.entries.get(tuple(src), ())

    def inverted(self) -> "PhraseTable":
        """Same pairs keyed by target phrase, with the two probabilities swapped."""
        inv: dict = defaultdict(list)
        for s, opts in self.entries.items():
            for t, p_ts, p_st in opts:
                inv[t].append((s, p_st, p_ts))
        return PhraseTable(dict(inv), self.target_language, self.source_language,
                           self.max_phrase_len)

    def pruned(self, top: int) -> "PhraseTable":
        return PhraseTable({s: opts[:top] for s, opts in self.entries.items()},
                           self.source_language, self.target_language, self.max_phrase_len)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s, opts in self.entries.items():
                for t, a, b in opts:
                    f.write(f"{' '.join(s)} ||| {' '.join(t)} ||| {fmt9(a)} {fmt9(b)}\n")

    @classmethod
    def load(cls, path, source_language="src", target_language="tgt") -> "PhraseTable":
        entries: dict = defaultdict(list)
        with open(path, encoding="utf-8") as f:
            for n, line in enumerate(f, 1):
                if not line.strip():
                    continue
                parts = [p.strip() for p in line.split("|||")]
                if len(parts) != 3:
                    raise ValueError(f"{path}:{n}: expected 'src ||| tgt ||| p p'")
                probs = parts[2].split()
                if len(probs) != 2:
                    raise ValueError(f"{path}:{n}: expected two probabilities")
                entries[tuple(parts[0].split())].append(
                    (tuple(parts[1].split()), float(probs[0]), float(probs[1])))
        return cls(dict(entries), source_language, target_language)


def _phrase(entry: str) -> Phrase:
    return tuple(entry.split(JOINER))


def _restrict(space: EmbeddingSpace, n: int) -> EmbeddingSpace:
    if n >= len(space):
        return space
    return EmbeddingSpace(space.language, space.vocabulary[:n], space.vectors[:n], space.frequency[:n])


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def induce_unsupervised(src: EmbeddingSpace, tgt: EmbeddingSpace, rotation: RotationMap,
                        temperature: float = 1.0 / 30.0, top_k: int = 200,
                        max_src_phrases: int = 300_000, floor: float = 1e-6,
                        csls_k: int = 10, chunk: int = 1024) -> PhraseTable:
    """Score cross-lingual neighbors with a temperature softmax over cosine similarity.

    For each of the ``max_src_phrases`` most frequent source phrases the
    ``top_k`` CSLS neighbors among the equally many most frequent target
    phrases are kept. p(t|s) normalizes over that whole target inventory and
    p(s|t) over the source inventory, using the transposed map.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    src = _restrict(src, max_src_phrases)
    tgt = _restrict(tgt, max_src_phrases)
    ret = Retriever(rotation, src, tgt, csls_k, chunk)
    n_s, n_t = len(src), len(tgt)
    k = min(top_k, n_t)

    # column normalizers for p(s|t), accumulated in chunks
    col_max = np.full(n_t, -np.inf)
    col_sum = np.zeros(n_t)
    for i in range(0, n_s, chunk):
        z = ret.cosines(np.arange(i, min(i + chunk, n_s))) / temperature
        m = np.maximum(col_max, z.max(axis=0))
        col_sum = col_sum * np.exp(col_max - m) + np.exp(z - m).sum(axis=0)
        col_max = m

    entries: dict = {}
    for i in range(0, n_s, chunk):
        rows = np.arange(i, min(i + chunk, n_s))
        cos = ret.cosines(rows)
        z = cos / temperature
        p_rows = _softmax_rows(z)
        csls = 2 * cos - ret.r_src[rows][:, None] - ret.r_tgt
        for r, row in enumerate(rows):
            scores = csls[r]
            cand = np.argpartition(-scores, k - 1)[:k] if k < n_t else np.arange(n_t)
            cand = cand[np.lexsort((ret._tie_lex[cand], -ret._tie_freq[cand], -scores[cand]))]
            opts = []
            for j in cand:
                p_ts = float(p_rows[r, j])
                if p_ts < floor:
                    continue
                p_st = float(np.exp(z[r, j] - col_max[j]) / col_sum[j])
                opts.append((_phrase(tgt.vocabulary[j]), p_ts, p_st))
            if opts:
                entries[_phrase(src.vocabulary[row])] = opts
    return PhraseTable(entries, src.language, tgt.language)


# ---------------------------------------------------------------------------
# IBM Model 1


@dataclass(frozen=True)
class LexicalTable:
    """t(target word | source word), with NULL as an extra source word."""

    probs: dict = field(repr=False)
    log_likelihoods: tuple = ()

    def prob(self, target: str, source: str) -> float:
        return self.probs.get(source, {}).get(target, 0.0)


def ibm1_em(bitext: Iterable[Pair], iterations: int = 5) -> LexicalTable:
    """IBM Model 1 EM over (source, target) sentence pairs.

    Expected counts are accumulated with array reductions over all
    (source position, target position) links, so reduction order is fixed
    and results are reproducible.
    """
    pairs = [(list(s), list(t)) for s, t in bitext]
    if not pairs:
        raise ValueError("cannot train IBM Model 1 on an empty bitext")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    src_ids = {NULL: 0}
    tgt_ids: dict = {}
    src_chunks, tgt_chunks, group_sizes = [], [], []
    for s, t in pairs:
        if not t:
            continue
        si = np.array([0] + [src_ids.setdefault(w, len(src_ids)) for w in s], dtype=np.int64)
        ti = np.array([tgt_ids.setdefault(w, len(tgt_ids)) for w in t], dtype=np.int64)
        src_chunks.append(np.tile(si, len(ti)))
        tgt_chunks.append(np.repeat(ti, len(si)))
        group_sizes.append(np.full(len(ti), len(si), dtype=np.int64))
    link_src = np.concatenate(src_chunks)
    link_tgt = np.concatenate(tgt_chunks)
    sizes = np.concatenate(group_sizes)
    group = np.repeat(np.arange(len(sizes)), sizes)
    n_tgt = len(tgt_ids)
    keys = link_src * n_tgt + link_tgt
    uniq, param = np.unique(keys, return_inverse=True)
    param_src = uniq // n_tgt
    theta = np.full(len(uniq), 1.0 / n_tgt)
    history = []
    for _ in range(iterations):
        prob = theta[param]
        denom = np.bincount(group, prob, minlength=len(sizes))
        history.append(float(np.sum(np.log(denom / sizes))))
        counts = np.bincount(param, prob / denom[group], minlength=len(uniq))
        totals = np.bincount(param_src, counts, minlength=len(src_ids))
        theta = counts / totals[param_src]
    denom = np.bincount(group, theta[param], minlength=len(sizes))
    history.append(float(np.sum(np.log(denom / sizes))))

    src_words = list(src_ids)
    tgt_words = list(tgt_ids)
    probs: dict = defaultdict(dict)
    for key, p in zip(uniq.tolist(), theta.tolist()):
        probs[src_words[key // n_tgt]][tgt_words[key % n_tgt]] = p
    return LexicalTable(dict(probs), tuple(history))


def viterbi_links(table: LexicalTable, source: Sequence[str], target: Sequence[str]) -> set:
    """Best source position per target word; the word stays unaligned only if NULL is strictly best."""
    null = table.probs.get(NULL, {})
    rows = [table.probs.get(w, {}) for w in source]
    links = set()
    for j, e in enumerate(target):
        best, best_i = 0.0, -1
        for i, row in enumerate(rows):
            p = row.get(e, 0.0)
            if p > best:
                best, best_i = p, i
        if best_i >= 0 and best >= null.get(e, 0.0):
            links.add((best_i, j))
    return links


_NEIGHBORS = ((-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1))


def grow_diag(forward: set, backward: set) -> set:
    """Intersection grown into neighboring union links that cover an unaligned word."""
    union = forward | backward
    alignment = set(forward & backward)
    aligned_s = {i for i, _ in alignment}
    aligned_t = {j for _, j in alignment}
    added = True
    while added:
        added = False
        for i, j in sorted(alignment):
            for di, dj in _NEIGHBORS:
                cand = (i + di, j + dj)
                if cand in union and cand not in alignment and (
                        cand[0] not in aligned_s or cand[1] not in aligned_t):
                    alignment.add(cand)
                    aligned_s.add(cand[0])
                    aligned_t.add(cand[1])
                    added = True
    return alignment


def align_and_symmetrize(bitext: Iterable[Pair], forward: LexicalTable,
                         backward: LexicalTable) -> list[set]:
    """Symmetrized alignment per pair; ``forward`` is t(tgt|src), ``backward`` t(src|tgt)."""
    out = []
    skipped = 0
    for s, t in bitext:
        if not s or not t:
            skipped += 1
            out.append(set())
            continue
        fwd = viterbi_links(forward, s, t)
        bwd = {(i, j) for j, i in viterbi_links(backward, t, s)}
        out.append(grow_diag(fwd, bwd))
    if skipped:
        log.warning("skipped %d sentence pairs with an empty side", skipped)
    return out


def phrase_pairs(source: Sequence[str], target: Sequence[str], links: set,
                 max_len: int) -> list[tuple[Phrase, Phrase]]:
    """All phrase pairs consistent with the alignment, up to ``max_len`` on both sides."""
    n_t = len(target)
    t_aligned = [False] * n_t
    by_src: dict = defaultdict(list)
    by_tgt: dict = defaultdict(list)
    for i, j in links:
        t_aligned[j] = True
        by_src[i].append(j)
        by_tgt[j].append(i)
    out = []
    for s0 in range(len(source)):
        for s1 in range(s0, min(len(source), s0 + max_len)):
            ts = [j for i in range(s0, s1 + 1) for j in by_src[i]]
            if not ts:
                continue
            t0, t1 = min(ts), max(ts)
            if t1 - t0 + 1 > max_len:
                continue
            if any(not s0 <= i <= s1 for j in range(t0, t1 + 1) for i in by_tgt[j]):
                continue
            src_phrase = tuple(source[s0:s1 + 1])
            lo = t0
            while True:
                hi = t1
                while True:
                    out.append((src_phrase, tuple(target[lo:hi + 1])))
                    hi += 1
                    if hi >= n_t or t_aligned[hi] or hi - lo + 1 > max_len:
                        break
                lo -= 1
                if lo < 0 or t_aligned[lo] or t1 - lo + 1 > max_len:
                    break
    return out


def extract_phrases(bitext: Sequence[Pair], alignments: Sequence[set], max_len: int = 4,
                    source_language: str = "src", target_language: str = "tgt") -> PhraseTable:
    """Relative-frequency phrase table from aligned sentence pairs."""
    joint: Counter = Counter()
    for (s, t), links in zip(bitext, alignments):
        joint.update(phrase_pairs(s, t, links, max_len))
    src_tot: Counter = Counter()
    tgt_tot: Counter = Counter()
    for (s, t), c in joint.items():
        src_tot[s] += c
        tgt_tot[t] += c
    entries: dict = defaultdict(list)
    for (s, t), c in joint.items():
        entries[s].append((t, c / src_tot[s], c / tgt_tot[t]))
    return PhraseTable(dict(entries), source_language, target_language, max_len)
