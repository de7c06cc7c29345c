"""Seeded toy data shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from monosmt.corpus import Corpus
from monosmt.decoder import LogLinearWeights, TranslationModel
from monosmt.lm import train_lm
from monosmt.phrase_table import PhraseTable


def two_pair_corpus():
    return [(("la", "maison"), ("the", "house")), (("la", "fleur"), ("the", "flower"))]


def kn_toy_corpus(seed: int, n_common: int, n_rare: int, n: int = 200) -> Corpus:
    """Random sentences over common words plus a rare tail (word r occurs r % 4 + 1 times).

    The tail guarantees counts of 1 to 4 at every order, so all discounts exist.
    """
    rng = np.random.default_rng(seed)
    common = [f"c{i}" for i in range(n_common)]
    sents = [[common[i] for i in rng.integers(n_common, size=rng.integers(2, 8))] for _ in range(n)]
    for r in range(n_rare):
        for _ in range(r % 4 + 1):
            s = sents[rng.integers(n)]
            s.insert(int(rng.integers(len(s) + 1)), f"r{r}")
    return Corpus("x", tuple(tuple(s) for s in sents))


# (seed, common words, rare words): vocabularies of 30 types including </s> and <unk>
KN_TOY_CORPORA = ((1, 12, 16), (0, 16, 12), (7, 14, 14))


def decoder_case(rng: np.random.Generator, n_entries: int = 50):
    """A random phrase table with at most ``n_entries`` entries and a small target LM."""
    src_vocab = [f"s{i}" for i in range(8)]
    tgt_vocab = [f"t{i}" for i in range(10)]
    entries: dict = {}
    count = 0
    keys = [(w,) for w in src_vocab[:7]]  # s7 stays out of the table (copied through)
    keys += [tuple(rng.choice(src_vocab[:7], 2)) for _ in range(6)]
    for key in keys:
        opts = {}
        for _ in range(int(rng.integers(1, 4))):
            length = 1 if rng.random() < 0.7 else 2
            opts[tuple(rng.choice(tgt_vocab, length))] = None
        for tgt in opts:
            if count >= n_entries:
                break
            entries.setdefault(key, []).append(
                (tgt, float(rng.uniform(0.05, 1.0)), float(rng.uniform(0.05, 1.0))))
            count += 1
    table = PhraseTable(entries, "s", "t")
    lm_data = Corpus("t", tuple(tuple(rng.choice(tgt_vocab, int(rng.integers(2, 7))))
                                for _ in range(60)))
    lm = train_lm(lm_data, int(rng.integers(2, 4)))
    return table, lm, src_vocab


def decoder_suite(seed: int = 0, n_tables: int = 20, per_table: int = 10):
    """200 (model, sentence) cases: sentences of 1 to 6 tokens, mixed reordering settings."""
    rng = np.random.default_rng(seed)
    cases = []
    for t in range(n_tables):
        table, lm, src_vocab = decoder_case(rng)
        weights = LogLinearWeights() if t % 2 == 0 else LogLinearWeights(
            *(float(x) for x in rng.uniform([0, 0, 0.1, -1.5, -0.5, 0], [1, 1, 1, 0.5, 0.5, 1])))
        model = TranslationModel(table, lm, weights, reordering_enabled=t % 4 != 1,
                                 distortion_limit=int(rng.integers(0, 4)), beam_size=1000,
                                 max_options=50)
        for _ in range(per_table):
            n = int(rng.integers(1, 7))
            cases.append((model, tuple(rng.choice(src_vocab, n))))
    return cases
