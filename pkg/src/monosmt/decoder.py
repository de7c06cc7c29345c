"""Phrase-based stack decoding under a six-feature log-linear model."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from .corpus import Corpus
from .lm import EOS, LN10, UNK, NgramLm, score_sentence
from .phrase_table import PhraseTable

log = logging.getLogger(__name__)

OOV_LOGPROB = -10.0
# Feature values: ln p(t|s), ln p(s|t), ln P_lm(y), -|y|, number of phrases and
# minus the summed jump widths. Negative word and distortion features follow the
# usual convention, so the default word weight -1 rewards length.
FEATURES = ("tm_fwd", "tm_bwd", "lm", "word_penalty", "phrase_penalty", "distortion")


@dataclass(frozen=True)
class LogLinearWeights:
    tm_fwd: float = 0.2
    tm_bwd: float = 0.2
    lm: float = 0.5
    word_penalty: float = -1.0
    phrase_penalty: float = 0.2
    distortion: float = 0.3

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ValueError(f"weight {f.name} must be finite")
            object.__setattr__(self, f.name, v)

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURES)

    def dot(self, features: dict) -> float:
        return sum(getattr(self, name) * features[name] for name in FEATURES)


@dataclass(frozen=True)
class TranslationModel:
    phrase_table: PhraseTable
    target_lm: NgramLm
    weights: LogLinearWeights = LogLinearWeights()
    reordering_enabled: bool = True
    distortion_limit: int = 6
    beam_size: int = 100
    max_options: int = 20

    def __post_init__(self):
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.distortion_limit < 0:
            raise ValueError("distortion_limit must be >= 0")
        if self.max_options < 1:
            raise ValueError("max_options must be >= 1")

    def with_settings(self, **changes) -> "TranslationModel":
        return replace(self, **changes)

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        self.phrase_table.save(d / "phrase-table.txt")
        self.target_lm.save(d / "lm.arpa")
        lines = [f"source_language = {self.phrase_table.source_language}",
                 f"target_language = {self.phrase_table.target_language}",
                 f"reordering_enabled = {str(self.reordering_enabled).lower()}",
                 f"distortion_limit = {self.distortion_limit}",
                 f"beam_size = {self.beam_size}",
                 f"max_options = {self.max_options}"]
        lines += [f"w_{k} = {v!r}" for k, v in asdict(self.weights).items()]
        (d / "model.cfg").write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, directory) -> "TranslationModel":
        d = Path(directory)
        settings = {}
        for n, line in enumerate((d / "model.cfg").read_text(encoding="utf-8").splitlines(), 1):
            if line.strip():
                key, sep, value = line.partition("=")
                if not sep:
                    raise ValueError(f"{d / 'model.cfg'}:{n}: expected 'key = value'")
                settings[key.strip()] = value.strip()
        weights = LogLinearWeights(**{k[2:]: float(v) for k, v in settings.items() if k.startswith("w_")})
        table = PhraseTable.load(d / "phrase-table.txt", settings.get("source_language", "src"),
                                 settings.get("target_language", "tgt"))
        return cls(table, NgramLm.load(d / "lm.arpa"), weights,
                   settings.get("reordering_enabled", "true") == "true",
                   int(settings.get("distortion_limit", 6)), int(settings.get("beam_size", 100)),
                   int(settings.get("max_options", 20)))


@dataclass(frozen=True)
class Translation:
    tokens: tuple[str, ...]
    score: float
    features: dict = field(repr=False)
    derivation: tuple = field(repr=False, default=())


def _lowest_gap(cov: int) -> int:
    return (~cov & (cov + 1)).bit_length() - 1


def translation_options(model: TranslationModel, sentence: Sequence[str]) -> dict:
    """(i, j) span -> [(static score, target phrase, ln p(t|s), ln p(s|t))], best first.

    Words without any single-word entry get a copy-through option carrying the
    fixed OOV penalty on the forward feature.
    """
    w = model.weights
    table = model.phrase_table
    n = len(sentence)
    max_len = max(1, table.max_phrase_len)
    out = {}
    for i in range(n):
        for j in range(i, min(n, i + max_len)):
            opts = []
            for tgt, p_ts, p_st in table.options(sentence[i:j + 1]):
                fwd, bwd = math.log(p_ts), math.log(p_st)
                static = w.tm_fwd * fwd + w.tm_bwd * bwd - w.word_penalty * len(tgt) + w.phrase_penalty
                opts.append((static, tgt, fwd, bwd))
            if i == j and not opts:
                opts.append((w.tm_fwd * OOV_LOGPROB - w.word_penalty + w.phrase_penalty,
                             (sentence[i],), OOV_LOGPROB, 0.0))
            if opts:
                opts.sort(key=lambda o: (-o[0], o[1]))
                out[(i, j)] = opts[:model.max_options]
    return out


class _LmCache:
    def __init__(self, lm: NgramLm):
        self.lm = lm
        self.keep = lm.order - 1
        self.cache: dict = {}

    def extend(self, state: tuple, words: tuple) -> tuple[float, tuple]:
        key = (state, words)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        lm, keep = self.lm, self.keep
        total = 0.0
        ctx = state
        for word in words:
            total += lm.logprob(ctx, word)
            if word not in lm.vocab:
                word = UNK
            ctx = (ctx + (word,))[-keep:] if keep else ()
        hit = (total, ctx)
        if len(self.cache) > 500_000:
            self.cache.clear()
        self.cache[key] = hit
        return hit


def decode(model: TranslationModel, sentence: Sequence[str], lm_cache: _LmCache | None = None
           ) -> Translation:
    """Best translation found by beam search over per-coverage-count stacks.

    Hypotheses sharing coverage, last covered position and LM state are
    recombined; equal scores are broken by the lexicographically smaller output.
    """
    src = tuple(sentence)
    n = len(src)
    if n == 0:
        raise ValueError("cannot decode an empty sentence")
    w = model.weights
    lm = model.target_lm
    cache = lm_cache or _LmCache(lm)
    w_lm = w.lm * LN10
    w_dist = w.distortion
    limit = model.distortion_limit
    monotone = not model.reordering_enabled
    options = translation_options(model, src)
    max_len = max(j - i + 1 for i, j in options)
    full = (1 << n) - 1
    start_state = ("<s>",)[-(lm.order - 1):] if lm.order > 1 else ()

    # hypothesis: (score, output, coverage, last_end, lm_state, derivation)
    stacks: list[dict] = [dict() for _ in range(n + 1)]
    stacks[0][(0, -1, start_state)] = (0.0, (), 0, -1, start_state, None)
    for size in range(n):
        hyps = sorted(stacks[size].values(), key=lambda h: (-h[0], h[1]))[:model.beam_size]
        stacks[size] = {}
        for score, out, cov, last, state, deriv in hyps:
            gap = _lowest_gap(cov)
            if monotone:
                starts = (gap,)
            else:
                starts = [i for i in range(max(gap, last + 1 - limit), min(n, last + 2 + limit))
                          if not cov >> i & 1]
            for i in starts:
                dist = -abs(i - last - 1)
                span = 0
                for j in range(i, min(n, i + max_len)):
                    if cov >> j & 1:
                        break
                    span |= 1 << j
                    opts = options.get((i, j))
                    if opts is None:
                        continue
                    new_cov = cov | span
                    if not monotone:
                        g = _lowest_gap(new_cov)
                        if g < i and j + 1 - g > limit:
                            continue
                    done = new_cov == full
                    stack = stacks[size + j - i + 1]
                    base = score + w_dist * dist
                    for static, tgt, fwd, bwd in opts:
                        lp, new_state = cache.extend(state, tgt)
                        if done:
                            lp += lm.logprob(new_state, EOS)
                        new_score = base + static + w_lm * lp
                        key = (new_cov, j, new_state)
                        old = stack.get(key)
                        if old is not None and new_score < old[0]:
                            continue
                        new_out = out + tgt
                        if old is not None and new_score == old[0] and old[1] <= new_out:
                            continue
                        stack[key] = (new_score, new_out, new_cov, j, new_state,
                                      (deriv, i, j, tgt, fwd, bwd))
    if not stacks[n]:
        raise RuntimeError("no complete hypothesis survived the search")
    best = min(stacks[n].values(), key=lambda h: (-h[0], h[1]))
    return _finish(model, best)


def _finish(model: TranslationModel, hyp) -> Translation:
    steps = []
    deriv = hyp[5]
    while deriv is not None:
        deriv, i, j, tgt, fwd, bwd = deriv
        steps.append((i, j, tgt, fwd, bwd))
    steps.reverse()
    last = -1
    feats = dict.fromkeys(FEATURES, 0.0)
    for i, j, tgt, fwd, bwd in steps:
        feats["tm_fwd"] += fwd
        feats["tm_bwd"] += bwd
        feats["word_penalty"] -= len(tgt)
        feats["phrase_penalty"] += 1
        feats["distortion"] -= abs(i - last - 1)
        last = j
    out = hyp[1]
    feats["lm"] = score_sentence(model.target_lm, out) * LN10
    return Translation(out, model.weights.dot(feats), feats,
                       tuple(((i, j), tgt) for i, j, tgt, _, _ in steps))


def _decode_chunk(args) -> list[tuple[str, ...]]:
    model, sentences = args
    return [_decode_safe(model, s, _LmCache(model.target_lm))[0] for s in sentences]


def _decode_safe(model: TranslationModel, sentence, cache) -> tuple[tuple[str, ...], bool]:
    try:
        return decode(model, sentence, cache).tokens, True
    except Exception as exc:  # keep the corpus aligned; report below
        log.debug("decode failed on %r: %s", sentence, exc)
        return tuple(sentence), False


def translate_corpus(model: TranslationModel, corpus: Corpus, threads: int = 1,
                     language: str | None = None) -> Corpus:
    """Decode every sentence, preserving order; failures are copied through."""
    lang = language or model.phrase_table.target_language
    if len(corpus) == 0:
        return Corpus(lang, ())
    if threads > 1:
        size = math.ceil(len(corpus) / (threads * 4))
        chunks = [(model, corpus.sentences[i:i + size]) for i in range(0, len(corpus), size)]
        with ProcessPoolExecutor(threads) as pool:
            out = [s for part in pool.map(_decode_chunk, chunks) for s in part]
        return Corpus(lang, tuple(out))
    cache = _LmCache(model.target_lm)
    out, failed = [], 0
    for s in corpus:
        tokens, ok = _decode_safe(model, s, cache)
        failed += not ok
        out.append(tokens)
    if failed:
        log.warning("%d sentences copied through after decoding failures", failed)
    return Corpus(lang, tuple(out))
