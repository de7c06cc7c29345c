"""Corpus-level BLEU with clipped n-gram precision and a brevity penalty."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

SMOOTHING_EPSILON = 0.1


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    n_gram_precisions: tuple[float, ...]
    brevity_penalty: float
    hypothesis_length: int
    reference_length: int

    def summary(self) -> str:
        precs = "/".join(f"{100 * p:.1f}" for p in self.n_gram_precisions)
        return (f"BLEU = {self.bleu:.2f} {precs} (BP = {self.brevity_penalty:.3f} "
                f"hyp_len = {self.hypothesis_length} ref_len = {self.reference_length})")

    def tsv(self) -> str:
        fields = [f"{self.bleu:.6f}", *(f"{p:.6f}" for p in self.n_gram_precisions),
                  f"{self.brevity_penalty:.6f}", str(self.hypothesis_length),
                  str(self.reference_length)]
        return "\t".join(fields)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hypotheses: Sequence[Sequence[str]], references: Sequence[Sequence[str]],
                max_n: int = 4, smoothing: bool = False) -> BleuReport:
    """Aggregate clipped counts over the corpus, then combine.

    With ``smoothing`` a zero match count at some order is replaced by a small
    epsilon, so a single missing order does not zero the whole score.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")
    if not references:
        raise ValueError("BLEU of an empty corpus is undefined")
    if max_n < 1:
        raise ValueError("max_n must be >= 1")
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        hyp_len += len(hyp)
        ref_len += len(ref)
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    precisions = []
    for m, t in zip(matches, totals):
        if t == 0:
            precisions.append(0.0)
        elif m == 0 and smoothing:
            precisions.append(SMOOTHING_EPSILON / t)
        else:
            precisions.append(m / t)
    if hyp_len >= ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / max(hyp_len, 1)) if hyp_len else math.exp(1.0 - ref_len)
    if min(precisions) == 0.0:
        bleu = 0.0
    else:
        bleu = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(bleu, tuple(precisions), bp, hyp_len, ref_len)
