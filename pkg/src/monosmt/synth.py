"""Synthetic cipher language pair with known ground truth.

Language A is sampled from a small topic-conditioned grammar. Language B is
A under a fixed bijective word substitution (digits, punctuation and a small
share of word types are left unchanged) with adjective-noun pairs swapped.
The two monolingual corpora come from disjoint sentence pools.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .alignment import SeedDictionary
from .corpus import Corpus

_ONSETS = list("bdfgklmnprstvz") + ["ch", "sh", "tr", "br", "pl", "gr"]
_VOWELS = list("aeiou") + ["ai", "ou"]
_CODAS = ["", "", "", "n", "r", "s", "l"]

CLASS_SIZES = {"NOUN": 700, "VERB": 260, "ADJ": 220, "ADV": 50,
               "DET": 6, "PREP": 12, "PRON": 8, "CONJ": 4}
NUMBERS = [str(i) for i in range(1, 41)]
PUNCT = [".", "?", ","]


@dataclass(frozen=True)
class CipherBenchmark:
    src_train: Corpus
    tgt_train: Corpus
    test_src: Corpus
    test_tgt: Corpus
    dev_src: Corpus
    dev_tgt: Corpus
    gold: SeedDictionary
    preserved: frozenset

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.src_train.save(d / "train.src")
        self.tgt_train.save(d / "train.tgt")
        self.test_src.save(d / "test.src")
        self.test_tgt.save(d / "test.tgt")
        self.dev_src.save(d / "dev.src")
        self.dev_tgt.save(d / "dev.tgt")
        self.gold.save(d / "gold.dict")


def _make_forms(rng: np.random.Generator, n: int, taken: set) -> list[str]:
    forms = []
    while len(forms) < n:
        k = int(rng.integers(2, 4))
        w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))]
                    for _ in range(k)) + _CODAS[rng.integers(len(_CODAS))]
        if w not in taken:
            taken.add(w)
            forms.append(w)
    return forms


@lru_cache(maxsize=None)
def _zipf_cdf(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1)
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    return cdf


def _zipf_index(rng: np.random.Generator, n: int) -> int:
    return int(np.searchsorted(_zipf_cdf(n), rng.random(), side="right"))


def _prefs(rng: np.random.Generator, keys: list[str], pool: list[str], k: int) -> dict:
    return {w: [pool[i] for i in rng.choice(len(pool), min(k, len(pool)), replace=False)]
            for w in keys}


class _Grammar:
    """Topic-conditioned phrase grammar with word-specific selectional preferences."""

    def __init__(self, rng: np.random.Generator, n_topics: int):
        self.rng = rng
        taken: set = set()
        self.words = {c: _make_forms(rng, n, taken) for c, n in CLASS_SIZES.items()}
        self.taken = taken
        self.n_topics = n_topics
        self.topic_words = {}
        for c in ("NOUN", "VERB", "ADJ"):
            ws = self.words[c]
            topics = rng.integers(n_topics, size=len(ws))
            self.topic_words[c] = [[w for w, t in zip(ws, topics) if t == z] for z in range(n_topics)]
        w = self.words
        self.gender = {n: int(rng.integers(2)) for n in w["NOUN"]}
        self.dets = [w["DET"][:3], w["DET"][3:]]
        self.noun_adjs = _prefs(rng, w["NOUN"], w["ADJ"], 3)
        self.noun_verbs = _prefs(rng, w["NOUN"], w["VERB"], 5)
        self.pron_verbs = _prefs(rng, w["PRON"], w["VERB"], 12)
        self.verb_objs = _prefs(rng, w["VERB"], w["NOUN"], 8)
        self.verb_preps = _prefs(rng, w["VERB"], w["PREP"], 2)
        self.verb_advs = _prefs(rng, w["VERB"], w["ADV"], 2)
        self.prep_nouns = _prefs(rng, w["PREP"], w["NOUN"], 25)

    def pick(self, cls: str, topic: int | None = None, prefer: list[str] | None = None,
             p_prefer: float = 0.6) -> str:
        rng = self.rng
        if prefer and rng.random() < p_prefer:
            return prefer[_zipf_index(rng, len(prefer))]
        if topic is not None and cls in self.topic_words and rng.random() < 0.8:
            pool = self.topic_words[cls][topic]
            if pool:
                return pool[_zipf_index(rng, len(pool))]
        pool = self.words[cls]
        return pool[_zipf_index(rng, len(pool))]

    def noun_phrase(self, topic: int, prefer: list[str] | None = None) -> tuple[str, list]:
        rng = self.rng
        noun = self.pick("NOUN", topic, prefer)
        if rng.random() < 0.12:
            return noun, [(NUMBERS[_zipf_index(rng, len(NUMBERS))], "NUM"), (noun, "NOUN")]
        det = self.dets[self.gender[noun]][_zipf_index(rng, 3)]
        out = [(det, "DET")]
        if rng.random() < 0.45:
            out.append((self.pick("ADJ", topic, self.noun_adjs[noun], 0.7), "ADJ"))
        out.append((noun, "NOUN"))
        return noun, out

    def clause(self, topic: int) -> list[tuple[str, str]]:
        rng = self.rng
        if rng.random() < 0.3:
            pron = self.pick("PRON")
            out = [(pron, "PRON")]
            verb_pref = self.pron_verbs[pron]
        else:
            subj, out = self.noun_phrase(topic)
            verb_pref = self.noun_verbs[subj]
        verb = self.pick("VERB", topic, verb_pref)
        out.append((verb, "VERB"))
        out.extend(self.noun_phrase(topic, self.verb_objs[verb])[1])
        if rng.random() < 0.5:
            prep = self.pick("PREP", None, self.verb_preps[verb], 0.7)
            out.append((prep, "PREP"))
            out.extend(self.noun_phrase(topic, self.prep_nouns[prep])[1])
        if rng.random() < 0.2:
            out.append((self.pick("ADV", None, self.verb_advs[verb], 0.7), "ADV"))
        return out

    def sentence(self) -> list[tuple[str, str]]:
        rng = self.rng
        topic = int(rng.integers(self.n_topics))
        out = self.clause(topic)
        if rng.random() < 0.15:
            out.append((",", "PUNCT"))
            out.append((self.pick("CONJ"), "CONJ"))
            out.extend(self.clause(topic))
        out.append(("?" if rng.random() < 0.1 else ".", "PUNCT"))
        return out


def _encipher(tagged: list[tuple[str, str]], mapping: dict[str, str]) -> tuple[str, ...]:
    toks = [(mapping.get(w, w), c) for w, c in tagged]
    i = 0
    while i + 1 < len(toks):
        if toks[i][1] == "ADJ" and toks[i + 1][1] == "NOUN":
            toks[i], toks[i + 1] = toks[i + 1], toks[i]
            i += 2
        else:
            i += 1
    return tuple(w for w, _ in toks)


def make_cipher_benchmark(n_sentences: int = 50_000, n_test: int = 500, n_dev: int = 200,
                          preserve_fraction: float = 0.05, n_topics: int = 30,
                          seed: int = 0) -> CipherBenchmark:
    """Generate the benchmark; ``n_sentences`` are split into two disjoint halves."""
    rng = np.random.default_rng(seed)
    grammar = _Grammar(rng, n_topics)
    vocab = [w for c in CLASS_SIZES for w in grammar.words[c]]
    n_keep = int(round(preserve_fraction * len(vocab)))
    keep = set(vocab[i] for i in rng.choice(len(vocab), n_keep, replace=False))
    new_forms = iter(_make_forms(rng, len(vocab), grammar.taken))
    mapping = {w: (w if w in keep else next(new_forms)) for w in vocab}

    need = n_sentences + 2 * n_test + 2 * n_dev
    seen: set = set()
    pool: list[list[tuple[str, str]]] = []
    while len(pool) < need:
        s = grammar.sentence()
        key = tuple(w for w, _ in s)
        if key not in seen:
            seen.add(key)
            pool.append(s)

    half = n_sentences // 2
    a_train = pool[:half]
    b_train = pool[half:n_sentences]
    test = pool[n_sentences:n_sentences + n_test]
    dev_a = pool[n_sentences + n_test:n_sentences + n_test + n_dev]
    dev_b = pool[n_sentences + n_test + n_dev:n_sentences + n_test + 2 * n_dev]

    def plain(sents):
        return tuple(tuple(w for w, _ in s) for s in sents)

    def ciphered(sents):
        return tuple(_encipher(s, mapping) for s in sents)

    gold = SeedDictionary(tuple((w, mapping[w]) for w in vocab)
                          + tuple((x, x) for x in NUMBERS + PUNCT))
    preserved = frozenset(keep) | frozenset(NUMBERS) | frozenset(PUNCT)
    return CipherBenchmark(
        src_train=Corpus("A", plain(a_train)),
        tgt_train=Corpus("B", ciphered(b_train)),
        test_src=Corpus("A", plain(test)),
        test_tgt=Corpus("B", ciphered(test)),
        dev_src=Corpus("A", plain(dev_a)),
        dev_tgt=Corpus("B", ciphered(dev_b)),
        gold=gold,
        preserved=preserved,
    )
