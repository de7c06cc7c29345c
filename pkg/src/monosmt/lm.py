"""Back-off n-gram language models with modified Kneser-Ney smoothing."""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .corpus import Corpus

log = logging.getLogger(__name__)

BOS, EOS, UNK = "<s>", "</s>", "<unk>"
NO_PROB = -99.0
LN10 = math.log(10.0)


@dataclass(frozen=True)
class NgramLm:
    """log10 probabilities and back-off weights keyed by token tuples."""

    order: int
    probs: dict = field(repr=False)
    backoffs: dict = field(repr=False)
    discount_mode: str = "kneser-ney"

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        vocab = frozenset(g[0] for g in self.probs if len(g) == 1)
        object.__setattr__(self, "vocab", vocab)

    def logprob(self, context: Sequence[str], word: str) -> float:
        """log10 p(word | context), backing off through shorter contexts."""
        if word not in self.vocab:
            word = UNK
        ctx = tuple(context)[-(self.order - 1):] if self.order > 1 else ()
        probs, backoffs = self.probs, self.backoffs
        acc = 0.0
        for i in range(len(ctx) + 1):
            h = ctx[i:]
            p = probs.get(h + (word,))
            if p is not None:
                return acc + p
            acc += backoffs.get(h, 0.0)
        return acc + probs[(UNK,)]

    def predicted_vocab(self) -> list[str]:
        return sorted(w for w in self.vocab if w != BOS)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_arpa())

    def to_arpa(self) -> str:
        by_order: dict[int, list] = defaultdict(list)
        for g in self.probs:
            by_order[len(g)].append(g)
        lines = ["", "\\data\\"]
        for k in range(1, self.order + 1):
            lines.append(f"ngram {k}={len(by_order[k])}")
        for k in range(1, self.order + 1):
            lines.append("")
            lines.append(f"\\{k}-grams:")
            for g in sorted(by_order[k]):
                row = f"{self.probs[g]!r}\t{' '.join(g)}"
                if g in self.backoffs:
                    row += f"\t{self.backoffs[g]!r}"
                lines.append(row)
        lines.append("")
        lines.append("\\end\\")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, path) -> "NgramLm":
        with open(path, encoding="utf-8") as f:
            return cls.from_arpa(f)

    @classmethod
    def from_arpa(cls, lines: Iterable[str]) -> "NgramLm":
        probs: dict = {}
        backoffs: dict = {}
        counts: dict[int, int] = {}
        section = None
        for raw in lines:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line == "\\data\\":
                section = "data"
            elif line == "\\end\\":
                break
            elif line.startswith("\\") and line.endswith("-grams:"):
                section = int(line[1:line.index("-")])
            elif section == "data":
                k, n = line[len("ngram "):].split("=")
                counts[int(k)] = int(n)
            elif isinstance(section, int):
                parts = line.split("\t")
                g = tuple(parts[1].split(" "))
                if len(g) != section:
                    raise ValueError(f"malformed {section}-gram line: {line!r}")
                probs[g] = float(parts[0])
                if len(parts) > 2:
                    backoffs[g] = float(parts[2])
        if not counts:
            raise ValueError("no \\data\\ section found")
        found = Counter(len(g) for g in probs)
        for k, n in counts.items():
            if found[k] != n:
                raise ValueError(f"header announces {n} {k}-grams, found {found[k]}")
        return cls(max(counts), probs, backoffs, "arpa")


def _padded(corpus: Corpus) -> list[tuple[str, ...]]:
    return [(BOS,) + tuple(s) + (EOS,) for s in corpus]


def _raw_counts(sents: list[tuple[str, ...]], order: int) -> list[Counter]:
    counts = [Counter() for _ in range(order + 1)]
    for s in sents:
        for k in range(1, order + 1):
            for i in range(len(s) - k + 1):
                g = s[i:i + k]
                if g != (BOS,):
                    counts[k][g] += 1
    return counts


FALLBACK_DISCOUNTS = (0.5, 1.0, 1.5)


def _kn_discounts(adjusted: Counter) -> tuple[float, float, float] | None:
    """Modified KN discounts for counts 1, 2 and 3+; None if some count-of-count is zero.

    When all four counts-of-counts exist but the estimates leave their valid
    range (common for unigram continuation counts over a small vocabulary),
    fixed fallback discounts are used for that order.
    """
    coc = Counter(c for c in adjusted.values() if c <= 4)
    n1, n2, n3, n4 = (coc[i] for i in (1, 2, 3, 4))
    if min(n1, n2, n3, n4) == 0:
        return None
    y = n1 / (n1 + 2 * n2)
    d = (1 - 2 * y * n2 / n1, 2 - 3 * y * n3 / n2, 3 - 4 * y * n4 / n3)
    if not all(0 < di < i + 1 for i, di in enumerate(d)):
        log.info("discounts %s out of range; using %s", d, FALLBACK_DISCOUNTS)
        return FALLBACK_DISCOUNTS
    return d


def train_lm(corpus: Corpus, order: int = 4, discount_mode: str = "kneser-ney") -> NgramLm:
    """Estimate an interpolated back-off model over the corpus.

    Kneser-Ney uses three discounts per order estimated from counts-of-counts.
    If the highest order has no n-grams of count 1, 2, 3 or 4 the whole model
    falls back to add-one smoothing (interpolated with the lower order beyond
    unigrams); a lower order with such gaps uses fixed discounts instead.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if discount_mode not in ("kneser-ney", "laplace"):
        raise ValueError(f"unknown discount mode {discount_mode!r}")
    if len(corpus) == 0:
        raise ValueError("cannot train a language model on an empty corpus")
    sents = _padded(corpus)
    raw = _raw_counts(sents, order)
    vocab = sorted({w for s in sents for w in s if w != BOS} | {EOS, UNK})

    if discount_mode == "kneser-ney":
        adjusted = _adjusted_counts(raw, order)
        discounts = [None] + [_kn_discounts(adjusted[k]) for k in range(1, order + 1)]
        if discounts[order] is None:
            log.warning("degenerate count-of-counts at order %d; falling back to add-one smoothing",
                        order)
        else:
            for k in range(1, order):
                if discounts[k] is None:
                    log.info("degenerate count-of-counts at order %d; using fixed discounts", k)
                    discounts[k] = FALLBACK_DISCOUNTS
            probs, backoffs = _interpolate(adjusted, discounts, vocab, order)
            return NgramLm(order, probs, backoffs, "kneser-ney")
    probs, backoffs = _additive(raw, vocab, order)
    return NgramLm(order, probs, backoffs, "laplace")


def _adjusted_counts(raw: list[Counter], order: int) -> list[Counter]:
    adjusted = [Counter() for _ in range(order + 1)]
    adjusted[order] = Counter(raw[order])
    for k in range(order - 1, 0, -1):
        left = Counter()
        for g in raw[k + 1]:
            left[g[1:]] += 1
        adj = Counter()
        for g, c in raw[k].items():
            adj[g] = c if g[0] == BOS else left[g]
        adjusted[k] = adj
    return adjusted


def _interpolate(adjusted, discounts, vocab, order):
    probs: dict = {}
    backoffs: dict = {}
    d1 = discounts[1]

    def disc(d, c):
        return d[0] if c == 1 else d[1] if c == 2 else d[2]

    uni = adjusted[1]
    total = sum(uni.values())
    gamma = sum(disc(d1, c) for c in uni.values()) / total
    p_lower: dict = {}
    for w in vocab:
        c = uni.get((w,), 0)
        p = (max(c - disc(d1, c), 0.0) if c else 0.0) / total + gamma / len(vocab)
        p_lower[(w,)] = p
    probs.update({g: math.log10(p) for g, p in p_lower.items()})
    probs[(BOS,)] = NO_PROB

    for k in range(2, order + 1):
        d = discounts[k]
        by_ctx: dict = defaultdict(list)
        for g, c in adjusted[k].items():
            by_ctx[g[:-1]].append((g[-1], c))
        current: dict = {}
        for h in sorted(by_ctx):
            items = by_ctx[h]
            tot = sum(c for _, c in items)
            gam = sum(disc(d, c) for _, c in items) / tot
            for w, c in items:
                lower = _lookup(p_lower, h[1:], w, backoffs, probs)
                current[h + (w,)] = (c - disc(d, c)) / tot + gam * lower
            backoffs[h] = math.log10(gam)
        probs.update({g: math.log10(p) for g, p in current.items()})
        p_lower = current
    return probs, backoffs


def _additive(raw, vocab, order):
    probs: dict = {}
    backoffs: dict = {}
    v = len(vocab)
    uni = raw[1]
    total = sum(uni.values())
    for w in vocab:
        probs[(w,)] = math.log10((uni.get((w,), 0) + 1) / (total + v))
    probs[(BOS,)] = NO_PROB
    for k in range(2, order + 1):
        by_ctx: dict = defaultdict(list)
        for g, c in raw[k].items():
            by_ctx[g[:-1]].append((g[-1], c))
        current = {}
        for h in sorted(by_ctx):
            items = by_ctx[h]
            tot = sum(c for _, c in items)
            for w, c in items:
                lower = 10 ** _backoff_query(probs, backoffs, h[1:], w)
                current[h + (w,)] = (c + v * lower) / (tot + v)
            backoffs[h] = math.log10(v / (tot + v))
        probs.update({g: math.log10(p) for g, p in current.items()})
    return probs, backoffs


def _backoff_query(probs, backoffs, ctx, w) -> float:
    acc = 0.0
    for i in range(len(ctx) + 1):
        g = ctx[i:] + (w,)
        if g in probs:
            return acc + probs[g]
        acc += backoffs.get(ctx[i:], 0.0)
    raise KeyError(w)


def _lookup(p_lower, ctx, w, backoffs, probs) -> float:
    # exact probability of the previous order, used while building the next one
    p = p_lower.get(ctx + (w,))
    if p is not None:
        return p
    return 10 ** _backoff_query(probs, backoffs, ctx, w)


def score_sentence(lm: NgramLm, sentence: Sequence[str]) -> float:
    """log10 probability of the sentence including the end-of-sentence event."""
    ctx: tuple = (BOS,)
    total = 0.0
    for w in list(sentence) + [EOS]:
        total += lm.logprob(ctx, w)
        w = w if w in lm.vocab else UNK
        ctx = (ctx + (w,))[-(lm.order - 1):] if lm.order > 1 else ()
    return total


def perplexity(lm: NgramLm, corpus: Corpus) -> float:
    if len(corpus) == 0:
        raise ValueError("perplexity of an empty corpus is undefined")
    total = sum(score_sentence(lm, s) for s in corpus)
    n = corpus.token_count + len(corpus)
    return 10 ** (-total / n)
