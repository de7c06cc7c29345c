"""Monolingual corpora: tokenization, BPE, noise and sampling."""

from __future__ import annotations

import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EOW = "</w>"

_ACRONYM = re.compile(r"^(?:[^\W\d_]\.){2,}$")


@dataclass(frozen=True)
class Corpus:
    language: str
    sentences: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        sents = tuple(tuple(s) for s in self.sentences)
        for s in sents:
            if not s:
                raise ValueError("corpus sentences must be non-empty")
            if any(not tok for tok in s):
                raise ValueError("corpus tokens must be non-empty strings")
        object.__setattr__(self, "sentences", sents)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)

    @classmethod
    def from_lines(cls, language: str, lines: Iterable[str], lowercase: bool = False,
                   pretokenized: bool = False) -> "Corpus":
        sents = []
        for line in lines:
            toks = line.split() if pretokenized else tokenize(line, lowercase)
            if pretokenized and lowercase:
                toks = [t.lower() for t in toks]
            if toks:
                sents.append(tuple(toks))
        return cls(language, tuple(sents))

    @classmethod
    def load(cls, path, language: str | None = None, lowercase: bool = False,
             pretokenized: bool = False) -> "Corpus":
        path = Path(path)
        with open(path, encoding="utf-8") as f:
            return cls.from_lines(language or path.stem, f, lowercase, pretokenized)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for s in self.sentences:
                f.write(" ".join(s) + "\n")


def _is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def tokenize(text: str, lowercase: bool = False) -> list[str]:
    """Split raw text into tokens.

    Leading and trailing punctuation is detached from each whitespace chunk;
    acronym-shaped tokens such as ``U.K.`` keep their periods.

    >>> tokenize("Hello, world!")
    ['Hello', ',', 'world', '!']
    """
    if lowercase:
        text = text.lower()
    out: list[str] = []
    for chunk in text.split():
        head = []
        i = 0
        while i < len(chunk) and _is_punct(chunk[i]):
            head.append(chunk[i])
            i += 1
        core = chunk[i:]
        tail = []
        while core and _is_punct(core[-1]) and not _ACRONYM.match(core):
            tail.append(core[-1])
            core = core[:-1]
        out.extend(head)
        if core:
            out.append(core)
        out.extend(reversed(tail))
    return out


# ---------------------------------------------------------------------------
# BPE


@dataclass(frozen=True)
class BpeModel:
    merges: tuple[tuple[str, str], ...]
    end_of_word_marker: str = EOW
    vocab: frozenset = field(default=frozenset(), compare=False)
    _ranks: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "merges", tuple(tuple(m) for m in self.merges))
        object.__setattr__(self, "_ranks", {m: i for i, m in enumerate(self.merges)})
        if not self.vocab:
            units = set()
            for a, b in self.merges:
                units.update((a, b, a + b))
            object.__setattr__(self, "vocab", frozenset(units))

    def validate(self) -> None:
        """Check that every merge only uses characters or earlier merge outputs."""
        produced: set[str] = set()
        for i, (a, b) in enumerate(self.merges):
            for sym in (a, b):
                if not _is_atomic(sym, self.end_of_word_marker) and sym not in produced:
                    raise ValueError(f"merge {i} references unproduced symbol {sym!r}")
            produced.add(a + b)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#bpe v1 {len(self.merges)}\n")
            for a, b in self.merges:
                f.write(f"{a} {b}\n")

    @classmethod
    def load(cls, path) -> "BpeModel":
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if len(header) != 3 or header[:2] != ["#bpe", "v1"]:
                raise ValueError(f"{path}: not a bpe v1 file")
            n = int(header[2])
            merges = []
            for line in f:
                parts = line.rstrip("\n").split(" ")
                if len(parts) != 2:
                    raise ValueError(f"{path}: malformed merge line {line!r}")
                merges.append((parts[0], parts[1]))
        if len(merges) != n:
            raise ValueError(f"{path}: header announces {n} merges, found {len(merges)}")
        model = cls(tuple(merges))
        model.validate()
        return model


def _is_atomic(sym: str, eow: str) -> bool:
    if sym.endswith(eow):
        sym = sym[: -len(eow)]
    return len(sym) == 1


def _word_symbols(word: str, eow: str = EOW) -> tuple[str, ...]:
    return tuple(word[:-1]) + (word[-1] + eow,)


def learn_bpe(corpora: Sequence[Corpus], num_merges: int) -> BpeModel:
    """Learn BPE merges jointly over all corpora.

    The most frequent adjacent pair is merged first; ties go to the
    lexicographically smallest pair.
    """
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    freqs: Counter = Counter()
    for corpus in corpora:
        for sent in corpus:
            freqs.update(sent)
    if not freqs:
        raise ValueError("no symbols to merge")

    words = [list(_word_symbols(w)) for w in sorted(freqs)]
    counts = [freqs[w] for w in sorted(freqs)]
    stats: Counter = Counter()
    index: dict[tuple[str, str], set[int]] = defaultdict(set)
    for wi, syms in enumerate(words):
        for pair in zip(syms, syms[1:]):
            stats[pair] += counts[wi]
            index[pair].add(wi)

    merges: list[tuple[str, str]] = []
    while len(merges) < num_merges:
        best = None
        best_count = 0
        for pair, c in stats.items():
            if c > best_count or (c == best_count and c > 0 and pair < best):
                best, best_count = pair, c
        if best is None or best_count <= 0:
            break
        merges.append(best)
        a, b = best
        merged = a + b
        for wi in sorted(index.pop(best, ())):
            syms = words[wi]
            c = counts[wi]
            for pair in zip(syms, syms[1:]):
                stats[pair] -= c
                if stats[pair] <= 0:
                    del stats[pair]
            new = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    new.append(merged)
                    i += 2
                else:
                    new.append(syms[i])
                    i += 1
            words[wi] = new
            for pair in zip(new, new[1:]):
                stats[pair] += c
                index[pair].add(wi)

    vocab = set()
    for syms in words:
        vocab.update(syms)
    return BpeModel(tuple(merges), vocab=frozenset(vocab))


def _segment(model: BpeModel, word: str, cache: dict) -> tuple[str, ...]:
    if word in cache:
        return cache[word]
    syms = list(_word_symbols(word, model.end_of_word_marker))
    ranks = model._ranks
    while len(syms) > 1:
        best_rank = None
        for pair in zip(syms, syms[1:]):
            r = ranks.get(pair)
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
        if best_rank is None:
            break
        a, b = model.merges[best_rank]
        new = []
        i = 0
        while i < len(syms):
            if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                new.append(a + b)
                i += 2
            else:
                new.append(syms[i])
                i += 1
        syms = new
    cache[word] = tuple(syms)
    return cache[word]


def apply_bpe(model: BpeModel, sentence: Sequence[str], cache: dict | None = None) -> list[str]:
    """Split each word into subword units; the last unit of a word carries the end marker."""
    cache = {} if cache is None else cache
    out: list[str] = []
    for word in sentence:
        out.extend(_segment(model, word, cache))
    return out


def revert_bpe(units: Sequence[str], marker: str = EOW) -> list[str]:
    words: list[str] = []
    buf = []
    for u in units:
        if u.endswith(marker):
            buf.append(u[: -len(marker)])
            words.append("".join(buf))
            buf = []
        else:
            buf.append(u)
    if buf:
        words.append("".join(buf))
    return words


# ---------------------------------------------------------------------------
# Noise


@dataclass(frozen=True)
class NoiseModel:
    drop_probability: float = 0.1
    swap_window: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must lie in [0, 1]")
        if self.swap_window < 0:
            raise ValueError("swap_window must be non-negative")


def apply_noise(model: NoiseModel, sentence: Sequence[str],
                rng: np.random.Generator | None = None) -> list[str]:
    """Drop words, then shuffle locally so no word moves more than ``swap_window``.

    Without an explicit ``rng`` the model seed is used, so the same sentence
    always receives the same corruption.
    """
    if not sentence:
        raise ValueError("sentence must be non-empty")
    if rng is None:
        rng = np.random.default_rng(model.rng_seed)
    keep = rng.random(len(sentence)) >= model.drop_probability
    kept = [tok for tok, k in zip(sentence, keep) if k]
    if not kept:
        kept = [sentence[0]]
    if model.swap_window > 0 and len(kept) > 1:
        keys = np.arange(len(kept)) + rng.uniform(0, model.swap_window + 1, len(kept))
        order = np.argsort(keys, kind="stable")
        kept = [kept[i] for i in order]
    return kept


def noise_corpus(model: NoiseModel, corpus: Corpus) -> Corpus:
    rng = np.random.default_rng(model.rng_seed)
    return Corpus(corpus.language, tuple(tuple(apply_noise(model, s, rng)) for s in corpus))


def sample_sentences(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Uniform sample without replacement, in sampled order."""
    if n < 0:
        raise ValueError("n must be >= 0")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(corpus))[: min(n, len(corpus))]
    return Corpus(corpus.language, tuple(corpus.sentences[i] for i in order))
