"""Seed models, alternating back-translation rounds and model selection."""

from __future__ import annotations

import contextlib
import fcntl
import logging
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .alignment import (RotationMap, SeedDictionary, align, build_seed_dictionary,
                        eval_p_at_1, normalize_space)
from .config import PipelineConfig
from .corpus import BpeModel, Corpus, apply_bpe, learn_bpe, revert_bpe, sample_sentences
from .decoder import LogLinearWeights, TranslationModel, translate_corpus
from .embeddings import EmbeddingSpace, merge_frequent_bigrams, train_sgns
from .evaluate import corpus_bleu
from .lm import NgramLm, train_lm
from .phrase_table import (PhraseTable, align_and_symmetrize, extract_phrases, ibm1_em,
                           induce_unsupervised)
from .utils import stage_seed, tree_hashes

log = logging.getLogger(__name__)

REPORT_HEADER = "iteration\tdirection\tround_trip_bleu\ttest_bleu\ttable_size"


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class SyntheticBitext:
    """(machine-generated, genuine) sentence pairs with their provenance.

    ``generator`` is the (from, to) direction of the model that produced the
    generated side; a model trained on this bitext translates ``to -> from``.
    """

    pairs: tuple
    generator: tuple[str, str]
    iteration: int

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((tuple(g), tuple(r)) for g, r in self.pairs))

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    @property
    def trains(self) -> tuple[str, str]:
        return self.generator[1], self.generator[0]

    def save(self, prefix) -> None:
        prefix = str(prefix)
        Corpus(self.generator[1], tuple(g for g, _ in self.pairs)).save(prefix + ".generated")
        Corpus(self.generator[0], tuple(r for _, r in self.pairs)).save(prefix + ".genuine")


@dataclass(frozen=True)
class IterationReport:
    iteration: int
    direction: str
    round_trip_bleu: float
    test_bleu: float
    table_size: int
    sample_size: int
    wall_time: float

    def row(self) -> str:
        test = "nan" if math.isnan(self.test_bleu) else f"{self.test_bleu:.4f}"
        return (f"{self.iteration}\t{self.direction}\t{self.round_trip_bleu:.4f}\t{test}\t"
                f"{self.table_size}")


@dataclass(frozen=True)
class RunResult:
    reports: tuple[IterationReport, ...]
    workdir: Path
    selected_iteration: int
    p_at_1: float


def _direction(a: str, b: str) -> str:
    return f"{a}-{b}"


@contextlib.contextmanager
def _stage(name: str):
    log.info("stage %s", name)
    start = time.perf_counter()
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"stage {name} failed: {exc}") from exc
    log.info("stage %s done in %.1fs", name, time.perf_counter() - start)


@contextlib.contextmanager
def _locked(workdir: Path):
    workdir.mkdir(parents=True, exist_ok=True)
    with open(workdir / ".lock", "w") as handle:
        try:
            fcntl.flock(handle, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except OSError:
            raise PipelineError(f"{workdir} is in use by another run") from None
        try:
            yield
        finally:
            fcntl.flock(handle, fcntl.LOCK_UN)


# ---------------------------------------------------------------------------
# stage functions


def persist_model(model: TranslationModel, directory) -> TranslationModel:
    """Write the model and return the reloaded copy, so runs never depend on unsaved precision."""
    model.save(directory)
    return TranslationModel.load(directory)


def build_seed_models(table: PhraseTable, src_lm: NgramLm, tgt_lm: NgramLm,
                      config: PipelineConfig) -> tuple[TranslationModel, TranslationModel]:
    """Monotone seed models from the induced table and its inverse."""
    d = config.decoder
    settings = dict(weights=config.weights(), reordering_enabled=False,
                    distortion_limit=d.distortion_limit, beam_size=d.beam_size,
                    max_options=d.max_options)
    return (TranslationModel(table, tgt_lm, **settings),
            TranslationModel(table.inverted(), src_lm, **settings))


def back_translate(model: TranslationModel, corpus: Corpus, n: int, seed: int,
                   iteration: int = 0, threads: int = 1) -> SyntheticBitext:
    """Translate ``n`` sampled sentences; pairs are (translation, original)."""
    generator = (model.phrase_table.source_language, model.phrase_table.target_language)
    sample = sample_sentences(corpus, n, seed)
    if len(sample) == 0:
        return SyntheticBitext((), generator, iteration)
    out = translate_corpus(model, sample, threads)
    return SyntheticBitext(tuple(zip(out.sentences, sample.sentences)), generator, iteration)


def train_iteration(bitext: SyntheticBitext, target_lm: NgramLm,
                    config: PipelineConfig) -> TranslationModel:
    """Supervised phrase-based model from synthetic pairs, with reordering enabled."""
    if len(bitext) == 0:
        raise ValueError("cannot train on an empty bitext")
    t = config.train
    pairs = bitext.pairs
    forward = ibm1_em(pairs, t.ibm1_iterations)
    backward = ibm1_em([(r, g) for g, r in pairs], t.ibm1_iterations)
    links = align_and_symmetrize(pairs, forward, backward)
    src_lang, tgt_lang = bitext.trains
    table = extract_phrases(pairs, links, t.max_phrase_len, src_lang, tgt_lang).pruned(t.prune_top)
    d = config.decoder
    return TranslationModel(table, target_lm, config.weights(), True, d.distortion_limit,
                            d.beam_size, d.max_options)


def round_trip_bleu(model_st: TranslationModel, model_ts: TranslationModel, held_out: Corpus,
                    held_out_tgt: Corpus | None = None, smoothing: bool = True,
                    threads: int = 1) -> float:
    """BLEU of source -> target -> source reconstructions against the originals.

    With ``held_out_tgt`` the target-side round trip is computed too and the
    two scores are averaged.
    """
    if len(held_out) == 0:
        raise ValueError("round-trip BLEU needs a non-empty held-out set")
    there = translate_corpus(model_st, held_out, threads)
    back = translate_corpus(model_ts, there, threads)
    scores = [corpus_bleu(back.sentences, held_out.sentences, smoothing=smoothing).bleu]
    if held_out_tgt is not None and len(held_out_tgt):
        there = translate_corpus(model_ts, held_out_tgt, threads)
        back = translate_corpus(model_st, there, threads)
        scores.append(corpus_bleu(back.sentences, held_out_tgt.sentences, smoothing=smoothing).bleu)
    return sum(scores) / len(scores)


def tune_weights(model: TranslationModel, dev_src: Corpus, dev_tgt: Corpus,
                 grid: Sequence[LogLinearWeights], threads: int = 1
                 ) -> tuple[LogLinearWeights, float]:
    """Grid point with the highest dev BLEU; earlier points win ties."""
    if len(dev_src) == 0:
        raise ValueError("dev set is empty")
    if not grid:
        raise ValueError("empty weight grid")
    best, best_bleu = None, -1.0
    for weights in grid:
        out = translate_corpus(replace(model, weights=weights), dev_src, threads)
        bleu = corpus_bleu(out.sentences, dev_tgt.sentences).bleu
        if bleu > best_bleu:
            best, best_bleu = weights, bleu
    return best, best_bleu


# ---------------------------------------------------------------------------
# full run


@dataclass
class SharedArtifacts:
    """Expensive stage outputs reused across ablation levels built from the same corpora."""

    src_space: EmbeddingSpace | None = None
    tgt_space: EmbeddingSpace | None = None


class _Run:
    def __init__(self, config: PipelineConfig, workdir: Path, shared: SharedArtifacts | None):
        self.config = config
        self.root = workdir
        self.shared = shared or SharedArtifacts()
        self.seed = config.run.seed
        self.threads = config.run.threads
        self.bpe: BpeModel | None = None
        d = config.data
        self.src_lang, self.tgt_lang = d.src_language, d.tgt_language

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def load_corpus(self, path: str, language: str) -> Corpus:
        d = self.config.data
        return Corpus.load(path, language, d.lowercase, d.pretokenized)

    def segment(self, corpus: Corpus) -> Corpus:
        if self.bpe is None:
            return corpus
        cache: dict = {}
        return Corpus(corpus.language, tuple(tuple(apply_bpe(self.bpe, s, cache)) for s in corpus))

    def restore(self, corpus: Corpus) -> Corpus:
        if self.bpe is None:
            return corpus
        return Corpus(corpus.language, tuple(tuple(revert_bpe(s)) or s for s in corpus))

    def corpora(self):
        d = self.config.data
        self.config.require_corpora()
        src = self.load_corpus(d.src_corpus, self.src_lang)
        tgt = self.load_corpus(d.tgt_corpus, self.tgt_lang)
        src.save(self.path("corpora", f"train.{self.src_lang}"))
        tgt.save(self.path("corpora", f"train.{self.tgt_lang}"))
        self.test = self.dev = None
        if d.test_src and d.test_tgt:
            self.test = (self.load_corpus(d.test_src, self.src_lang),
                         self.load_corpus(d.test_tgt, self.tgt_lang))
        k = self.config.train.round_trip_sentences
        if d.dev_src and d.dev_tgt:
            dev_src = self.load_corpus(d.dev_src, self.src_lang)
            dev_tgt = self.load_corpus(d.dev_tgt, self.tgt_lang)
            self.dev = (Corpus(self.src_lang, dev_src.sentences[:k]),
                        Corpus(self.tgt_lang, dev_tgt.sentences[:k]))
        else:
            self.dev = (sample_sentences(src, k, stage_seed(self.seed, "dev-src")),
                        sample_sentences(tgt, k, stage_seed(self.seed, "dev-tgt")))
        if d.bpe_merges > 0:
            self.bpe = learn_bpe([src, tgt], d.bpe_merges)
            self.bpe.save(self.path("bpe", "codes.bpe"))
        self.src, self.tgt = self.segment(src), self.segment(tgt)

    def embeddings(self):
        cached = self.shared.src_space is not None and self.bpe is None
        if not cached:
            e = self.config.embeddings
            spaces = []
            for corpus, label in ((self.src, "sgns-src"), (self.tgt, "sgns-tgt")):
                merged = merge_frequent_bigrams(corpus, e.bigram_min_count, e.bigram_threshold)
                spaces.append(train_sgns(merged, self.config.sgns(stage_seed(self.seed, label))))
            self.shared.src_space, self.shared.tgt_space = spaces
        self.shared.src_space.save(self.path("embeddings", f"{self.src_lang}.vec"))
        self.shared.tgt_space.save(self.path("embeddings", f"{self.tgt_lang}.vec"))
        # work from the saved text so reruns see exactly what was persisted
        self.src_space = normalize_space(EmbeddingSpace.load(
            self.path("embeddings", f"{self.src_lang}.vec"), self.src_lang))
        self.tgt_space = normalize_space(EmbeddingSpace.load(
            self.path("embeddings", f"{self.tgt_lang}.vec"), self.tgt_lang))

    def alignment(self):
        a = self.config.align
        seed = build_seed_dictionary(self.src_space, self.tgt_space, a.max_seed_pairs)
        if a.seed_fraction < 1.0:
            keep = max(1, int(round(a.seed_fraction * len(seed))))
            rng = np.random.default_rng(stage_seed(self.seed, "seed-subsample"))
            chosen = np.sort(rng.choice(len(seed), keep, replace=False))
            seed = SeedDictionary(tuple(seed.pairs[i] for i in chosen))
        seed.save(self.path("alignment", "seed.dict"))
        w = align(self.src_space, self.tgt_space, seed, a.refine_iterations, a.max_rank, a.csls_k)
        w.save(self.path("alignment", "rotation.txt"))
        self.rotation = RotationMap.load(self.path("alignment", "rotation.txt"),
                                         self.src_lang, self.tgt_lang)
        self.p_at_1 = math.nan
        gold = self.config.data.gold_dictionary
        if gold:
            self.p_at_1 = eval_p_at_1(self.rotation, self.src_space, self.tgt_space,
                                      SeedDictionary.load(gold), a.csls_k)
            self.path("alignment", "p_at_1.txt").write_text(f"{self.p_at_1:.6f}\n")

    def language_models(self):
        lm = self.config.lm
        for corpus, lang in ((self.src, self.src_lang), (self.tgt, self.tgt_lang)):
            data = corpus
            if lm.data_fraction < 1.0:
                n = max(1, int(round(lm.data_fraction * len(corpus))))
                data = sample_sentences(corpus, n, stage_seed(self.seed, f"lm-{lang}"))
            train_lm(data, lm.order, lm.discount_mode).save(self.path("lm", f"{lang}.arpa"))
        self.src_lm = NgramLm.load(self.path("lm", f"{self.src_lang}.arpa"))
        self.tgt_lm = NgramLm.load(self.path("lm", f"{self.tgt_lang}.arpa"))

    def seed_models(self):
        i = self.config.induce
        table = induce_unsupervised(self.src_space, self.tgt_space, self.rotation, i.temperature,
                                    i.top_k, i.max_src_phrases, i.floor, self.config.align.csls_k)
        st, ts = build_seed_models(table, self.src_lm, self.tgt_lm, self.config)
        return self.persist(st, 0), self.persist(ts, 0)

    def persist(self, model: TranslationModel, iteration: int) -> TranslationModel:
        table = model.phrase_table
        name = _direction(table.source_language, table.target_language)
        table.save(self.path("tables", f"iter_{iteration}", f"{name}.txt"))
        return persist_model(model, self.path("models", f"iter_{iteration}", name))

    def back_translate(self, model: TranslationModel, corpus: Corpus, iteration: int):
        label = _direction(model.phrase_table.source_language, model.phrase_table.target_language)
        seed = stage_seed(self.seed, f"sample-{label}-{iteration}")
        bitext = back_translate(model, corpus, self.config.train.sample_size, seed, iteration,
                                self.threads)
        bitext.save(self.path("corpora", "synthetic", f"iter_{iteration}.{label}"))
        return bitext

    def train(self, bitext: SyntheticBitext, expected: tuple[str, str], lm: NgramLm, iteration: int):
        if bitext.trains != expected:
            raise PipelineError(f"bitext generated by {bitext.generator} cannot train {expected}")
        return self.persist(train_iteration(bitext, lm, self.config), iteration)

    def report(self, iteration: int, model: TranslationModel, st: TranslationModel,
               ts: TranslationModel, started: float) -> IterationReport:
        table = model.phrase_table
        forward = table.source_language == self.src_lang
        src_dev, tgt_dev = (self.segment(c) for c in self.dev)
        rt = round_trip_bleu(st, ts, src_dev, tgt_dev, True, self.threads) if forward else \
            round_trip_bleu(ts, st, tgt_dev, src_dev, True, self.threads)
        test_bleu = math.nan
        if self.test is not None:
            source, reference = self.test if forward else self.test[::-1]
            out = self.restore(translate_corpus(model, self.segment(source), self.threads))
            test_bleu = corpus_bleu(out.sentences, reference.sentences).bleu
        rep = IterationReport(iteration, _direction(table.source_language, table.target_language),
                              rt, test_bleu, len(table), self.config.train.sample_size,
                              time.perf_counter() - started)
        log.info("iteration %d %s: round-trip %.2f test %.2f", iteration, rep.direction, rt, test_bleu)
        return rep


def run_unsupervised(config: PipelineConfig, workdir, iterations: int | None = None,
                     shared: SharedArtifacts | None = None) -> RunResult:
    """Seed models, then ``iterations`` alternating back-translation rounds.

    Round i trains target->source on data generated by the previous
    source->target model, regenerates source-side data with it, then trains
    source->target. Every model is persisted under ``models/iter_<i>/``.
    """
    workdir = Path(workdir)
    n_iter = config.train.iterations if iterations is None else iterations
    if iterations is not None:
        config = config.with_values(train={"iterations": iterations})
    with _locked(workdir):
        config.save(workdir / "config.cfg")
        run = _Run(config, workdir, shared)
        reports: list[IterationReport] = []
        with _stage("corpora"):
            run.corpora()
        with _stage("embeddings"):
            run.embeddings()
        with _stage("alignment"):
            run.alignment()
        with _stage("lm"):
            run.language_models()
        started = time.perf_counter()
        with _stage("seed"):
            st, ts = run.seed_models()
            reports.append(run.report(0, st, st, ts, started))
            reports.append(run.report(0, ts, st, ts, started))
        fwd, bwd = (run.src_lang, run.tgt_lang), (run.tgt_lang, run.src_lang)
        data_t = None
        for i in range(1, n_iter + 1):
            started = time.perf_counter()
            with _stage(f"iteration {i} {_direction(*bwd)}"):
                if data_t is None:
                    data_t = run.back_translate(st, run.src, i - 1)
                ts = run.train(data_t, bwd, run.src_lm, i)
                reports.append(run.report(i, ts, st, ts, started))
            started = time.perf_counter()
            with _stage(f"iteration {i} {_direction(*fwd)}"):
                data_s = run.back_translate(ts, run.tgt, i)
                st = run.train(data_s, fwd, run.tgt_lm, i)
                reports.append(run.report(i, st, st, ts, started))
            # the last round's generation would feed nothing, so it is skipped
            data_t = run.back_translate(st, run.src, i) if i < n_iter else None
        selected = _select(reports, run.src_lang)
        _write_reports(workdir, reports, selected)
        _write_manifest(workdir)
        return RunResult(tuple(reports), workdir, selected, run.p_at_1)


def _select(reports: Sequence[IterationReport], src_lang: str) -> int:
    """Iteration whose final model pair has the best round-trip BLEU; earliest wins ties."""
    best, best_score = 0, -1.0
    for rep in reports:
        if rep.direction.startswith(src_lang + "-") and rep.round_trip_bleu > best_score:
            best, best_score = rep.iteration, rep.round_trip_bleu
    return best


def _write_reports(workdir: Path, reports: Sequence[IterationReport], selected: int) -> None:
    out = workdir / "reports"
    out.mkdir(parents=True, exist_ok=True)
    rows = [REPORT_HEADER] + [r.row() for r in reports]
    (out / "iterations.tsv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    (out / "selection.tsv").write_text(
        f"criterion\tselected_iteration\nround_trip_bleu\t{selected}\n", encoding="utf-8")


def _write_manifest(workdir: Path) -> None:
    lines = [f"{path}\t{digest}" for path, digest in tree_hashes(workdir).items()]
    (workdir / "manifest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# ablations

ABLATION_AXES = {
    "init_quality": ("align", "seed_fraction"),
    "lm_data": ("lm", "data_fraction"),
    "bt_data": ("train", "sample_size"),
}


def run_ablation(config: PipelineConfig, axis: str, levels: Sequence[float], workdir,
                 iterations: int | None = None, shared: SharedArtifacts | None = None
                 ) -> list[tuple[float, int, str, float, float, float]]:
    """Rerun the pipeline once per level, varying one axis.

    Levels are fractions of the full setting: of the seed dictionary, of the
    LM training data, or of the back-translation sample size. Returns rows
    (level, iteration, direction, test BLEU, round-trip BLEU, P@1).
    """
    if axis not in ABLATION_AXES:
        raise ValueError(f"unknown ablation axis {axis!r}; expected one of {sorted(ABLATION_AXES)}")
    if not levels:
        raise ValueError("no ablation levels given")
    section, key = ABLATION_AXES[axis]
    workdir = Path(workdir)
    shared = shared or SharedArtifacts()
    rows = []
    for level in levels:
        if not 0 < level <= 1:
            raise ValueError(f"ablation level {level} must be in (0, 1]")
        value = level
        if axis == "bt_data":
            value = max(1, int(round(level * config.train.sample_size)))
        cfg = config.with_values(**{section: {key: value}})
        result = run_unsupervised(cfg, workdir / axis / f"level_{level:g}", iterations, shared)
        for rep in result.reports:
            rows.append((level, rep.iteration, rep.direction, rep.test_bleu, rep.round_trip_bleu,
                         result.p_at_1))
    lines = ["axis\tlevel\titeration\tdirection\ttest_bleu\tround_trip_bleu\tp_at_1"]
    lines += [f"{axis}\t{lv:g}\t{it}\t{d}\t{t:.4f}\t{r:.4f}\t{p:.4f}" for lv, it, d, t, r, p in rows]
    (workdir / axis).mkdir(parents=True, exist_ok=True)
    (workdir / axis / "ablation.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return rows


# ---------------------------------------------------------------------------
# synthetic benchmark

def synthbench_config(data_dir, seed: int = 0, base: PipelineConfig | None = None) -> PipelineConfig:
    """Settings for the cipher benchmark, pointing at files written by ``CipherBenchmark.save``.

    Without ``base`` the desk settings for this benchmark are used: more
    embedding epochs with stronger subsampling, no bigram merging, a narrow
    beam and a distortion limit of 2 since the cipher only swaps neighbors.
    """
    d = Path(data_dir)
    if base is None:
        base = PipelineConfig().with_values(
            embeddings=dict(epochs=10, subsample_threshold=1e-3, bigram_threshold=math.inf),
            decoder=dict(beam_size=10, max_options=10, distortion_limit=2),
            train=dict(sample_size=10_000),
        )
    return base.with_values(
        data=dict(src_corpus=str(d / "train.src"), tgt_corpus=str(d / "train.tgt"),
                  src_language="A", tgt_language="B", pretokenized=True,
                  test_src=str(d / "test.src"), test_tgt=str(d / "test.tgt"),
                  dev_src=str(d / "dev.src"), dev_tgt=str(d / "dev.tgt"),
                  gold_dictionary=str(d / "gold.dict")),
        run=dict(seed=seed),
    )


def prepare_synthbench(workdir, seed: int = 0, n_sentences: int = 50_000,
                       base: PipelineConfig | None = None, threads: int = 1) -> PipelineConfig:
    """Write the cipher pair under ``workdir/data`` and return its configuration."""
    from .synth import make_cipher_benchmark

    workdir = Path(workdir)
    bench = make_cipher_benchmark(n_sentences, seed=stage_seed(seed, "cipher"))
    bench.save(workdir / "data")
    config = synthbench_config(workdir / "data", seed, base)
    return config.with_values(run={"threads": threads})


def run_synthbench(workdir, seed: int = 0, n_sentences: int = 50_000,
                   base: PipelineConfig | None = None, iterations: int | None = None,
                   threads: int = 1) -> RunResult:
    """Generate the cipher pair and run the full pipeline on it under ``workdir/run``."""
    config = prepare_synthbench(workdir, seed, n_sentences, base, threads)
    return run_unsupervised(config, Path(workdir) / "run", iterations)
