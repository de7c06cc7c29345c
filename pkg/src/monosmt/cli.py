"""Command-line entry point: ``monosmt <command> [options]``."""

from __future__ import annotations

import argparse
import contextlib
import logging
import math
import sys
from pathlib import Path

from .alignment import (RotationMap, SeedDictionary, align, build_seed_dictionary, eval_p_at_1,
                        normalize_space)
from .config import REFERENCE_VALUES, ConfigError, PipelineConfig, load_config
from .corpus import BpeModel, Corpus, apply_bpe, learn_bpe, tokenize
from .decoder import TranslationModel, translate_corpus
from .embeddings import EmbeddingSpace, SgnsConfig, merge_frequent_bigrams, train_sgns
from .evaluate import corpus_bleu
from .lm import train_lm
from .phrase_table import induce_unsupervised
from .pipeline import PipelineError, run_ablation, run_synthbench, run_unsupervised
from .utils import stage_seed

log = logging.getLogger("monosmt")


def _ref(key: str) -> str:
    return f"; reference-scale value: {REFERENCE_VALUES[key]}" if key in REFERENCE_VALUES else ""


@contextlib.contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin
    else:
        with open(path, encoding="utf-8") as f:
            yield f


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8") as f:
            yield f


def _read_corpus(path: str, language: str = "x", lowercase: bool = False,
                 pretokenized: bool = True) -> Corpus:
    with _open_in(path) as f:
        return Corpus.from_lines(language, f, lowercase, pretokenized)


def _write_lines(path: str, sentences) -> None:
    with _open_out(path) as f:
        for s in sentences:
            f.write(" ".join(s) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_tokenize(args) -> int:
    with _open_in(args.input) as src, _open_out(args.output) as out:
        for line in src:
            out.write(" ".join(tokenize(line, args.lowercase)) + "\n")
    return 0


def cmd_learn_bpe(args) -> int:
    corpora = [_read_corpus(p) for p in args.input]
    learn_bpe(corpora, args.merges).save(args.output)
    return 0


def cmd_apply_bpe(args) -> int:
    model = BpeModel.load(args.codes)
    cache: dict = {}
    with _open_in(args.input) as src, _open_out(args.output) as out:
        for line in src:
            out.write(" ".join(apply_bpe(model, line.split(), cache)) + "\n")
    return 0


def cmd_train_embeddings(args) -> int:
    corpus = _read_corpus(args.input, args.language)
    corpus = merge_frequent_bigrams(corpus, args.bigram_min_count, args.bigram_threshold)
    config = SgnsConfig(args.dimension, args.window, args.negatives, args.epochs,
                        args.learning_rate, args.subsample_threshold, args.min_count,
                        stage_seed(args.seed, "sgns"))
    train_sgns(corpus, config).save(args.output)
    return 0


def _spaces(args):
    src = normalize_space(EmbeddingSpace.load(args.src_vec, "src"))
    tgt = normalize_space(EmbeddingSpace.load(args.tgt_vec, "tgt"))
    return src, tgt


def cmd_align(args) -> int:
    src, tgt = _spaces(args)
    seed = build_seed_dictionary(src, tgt, args.max_seed_pairs)
    if args.seed_dictionary_out:
        seed.save(args.seed_dictionary_out)
    w = align(src, tgt, seed, args.refine_iterations)
    w.save(args.output)
    if args.gold:
        p1 = eval_p_at_1(w, src, tgt, SeedDictionary.load(args.gold))
        print(f"P@1\t{p1:.6f}")
    return 0


def cmd_induce_table(args) -> int:
    src, tgt = _spaces(args)
    w = RotationMap.load(args.rotation)
    table = induce_unsupervised(src, tgt, w, args.temperature, args.top_k, args.max_src_phrases)
    table.save(args.output)
    return 0


def cmd_train_lm(args) -> int:
    corpus = _read_corpus(args.input)
    train_lm(corpus, args.order, args.discount_mode).save(args.output)
    return 0


def cmd_translate(args) -> int:
    model = TranslationModel.load(args.model)
    changes = {}
    if args.monotone:
        changes["reordering_enabled"] = False
    if args.beam_size:
        changes["beam_size"] = args.beam_size
    if changes:
        model = model.with_settings(**changes)
    corpus = _read_corpus(args.input, model.phrase_table.source_language)
    _write_lines(args.output, translate_corpus(model, corpus, args.threads))
    return 0


def cmd_bleu(args) -> int:
    with _open_in(args.hypotheses) as f:
        hyps = [line.split() for line in f]
    with open(args.references, encoding="utf-8") as f:
        refs = [line.split() for line in f]
    report = corpus_bleu(hyps, refs, args.max_n, args.smoothing)
    print(report.summary(), file=sys.stderr)
    print("bleu\t" + "\t".join(f"p{n}" for n in range(1, args.max_n + 1))
          + "\tbrevity_penalty\thyp_len\tref_len")
    print(report.tsv())
    return 0


def _config(args) -> PipelineConfig:
    config = load_config(args.config) if args.config else PipelineConfig()
    data = {k: v for k, v in (("src_corpus", getattr(args, "src", None)),
                              ("tgt_corpus", getattr(args, "tgt", None))) if v}
    run = {"threads": args.threads}
    if args.seed is not None:
        run["seed"] = args.seed
    return config.with_values(data=data, run=run)


def cmd_iterate(args) -> int:
    result = run_unsupervised(_config(args), args.workdir, args.iterations)
    sys.stdout.write((Path(args.workdir) / "reports" / "iterations.tsv").read_text())
    log.info("selected iteration %d", result.selected_iteration)
    return 0


def cmd_ablate(args) -> int:
    levels = [float(x) for x in args.levels.split(",")]
    run_ablation(_config(args), args.axis, levels, args.workdir, args.iterations)
    sys.stdout.write((Path(args.workdir) / args.axis / "ablation.tsv").read_text())
    return 0


def cmd_synthbench(args) -> int:
    base = load_config(args.config) if args.config else None
    seed = 0 if args.seed is None else args.seed
    result = run_synthbench(args.workdir, seed, args.sentences, base, args.iterations, args.threads)
    sys.stdout.write((result.workdir / "reports" / "iterations.tsv").read_text())
    if not math.isnan(result.p_at_1):
        log.info("dictionary P@1 %.4f", result.p_at_1)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="global random seed, expanded per stage (default: 0 or the config value)")
    common.add_argument("--threads", type=int, default=1,
                        help="decoding worker processes (default: 1, fully deterministic)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(
        prog="monosmt", formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        description="Unsupervised phrase-based translation from two monolingual corpora.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    fmt = argparse.ArgumentDefaultsHelpFormatter

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text,
                           formatter_class=fmt)
        p.set_defaults(func=func)
        return p

    p = add("tokenize", cmd_tokenize, "split punctuation from words, one sentence per line")
    p.add_argument("--input", default="-", help="input text file or - for stdin")
    p.add_argument("--output", default="-", help="output file or - for stdout")
    p.add_argument("--lowercase", action="store_true", help="lowercase all tokens")

    p = add("learn-bpe", cmd_learn_bpe, "learn joint BPE merges over tokenized corpora")
    p.add_argument("--input", nargs="+", required=True, help="tokenized corpus files")
    p.add_argument("--merges", type=int, default=10000, help="number of merges" + _ref("bpe_merges"))
    p.add_argument("--output", required=True, help="BPE codes file")

    p = add("apply-bpe", cmd_apply_bpe, "segment tokenized text with learned merges")
    p.add_argument("--codes", required=True, help="BPE codes file")
    p.add_argument("--input", default="-", help="tokenized input or - for stdin")
    p.add_argument("--output", default="-", help="output file or - for stdout")

    p = add("train-embeddings", cmd_train_embeddings, "train skip-gram embeddings on one corpus")
    p.add_argument("--input", required=True, help="tokenized corpus")
    p.add_argument("--output", required=True, help="embedding text file")
    p.add_argument("--language", default="x", help="language label")
    p.add_argument("--dimension", type=int, default=64, help="vector size" + _ref("dimension"))
    p.add_argument("--window", type=int, default=5, help="context window" + _ref("window"))
    p.add_argument("--negatives", type=int, default=10, help="negative samples" + _ref("negatives"))
    p.add_argument("--epochs", type=int, default=5, help="training epochs")
    p.add_argument("--learning-rate", type=float, default=0.025, help="initial learning rate")
    p.add_argument("--subsample-threshold", type=float, default=1e-4,
                   help="frequent-word subsampling threshold")
    p.add_argument("--min-count", type=int, default=5, help="minimum phrase count")
    p.add_argument("--bigram-min-count", type=int, default=5, help="bigram score discount")
    p.add_argument("--bigram-threshold", type=float, default=10.0,
                   help="bigram merge threshold (inf disables merging)")

    p = add("align", cmd_align, "map source embeddings onto target embeddings")
    p.add_argument("--src-vec", required=True, help="source embeddings")
    p.add_argument("--tgt-vec", required=True, help="target embeddings")
    p.add_argument("--output", required=True, help="rotation matrix file")
    p.add_argument("--max-seed-pairs", type=int, default=5000, help="identical-string seed size cap")
    p.add_argument("--refine-iterations", type=int, default=1, help="mutual-neighbor refinements")
    p.add_argument("--seed-dictionary-out", default="", help="write the seed dictionary here")
    p.add_argument("--gold", default="", help="gold dictionary; prints P@1 to stdout")

    p = add("induce-table", cmd_induce_table, "build the unsupervised phrase table")
    p.add_argument("--src-vec", required=True, help="source embeddings")
    p.add_argument("--tgt-vec", required=True, help="target embeddings")
    p.add_argument("--rotation", required=True, help="rotation matrix file")
    p.add_argument("--output", required=True, help="phrase table file")
    p.add_argument("--temperature", type=float, default=1 / 30,
                   help="softmax temperature (cosine divisor)" + _ref("temperature"))
    p.add_argument("--top-k", type=int, default=200, help="targets kept per source" + _ref("top_k"))
    p.add_argument("--max-src-phrases", type=int, default=300_000,
                   help="source/target inventory size" + _ref("max_src_phrases"))

    p = add("train-lm", cmd_train_lm, "train a back-off n-gram language model (ARPA output)")
    p.add_argument("--input", required=True, help="tokenized corpus")
    p.add_argument("--output", required=True, help="ARPA file")
    p.add_argument("--order", type=int, default=4, help="n-gram order")
    p.add_argument("--discount-mode", choices=("kneser-ney", "laplace"), default="kneser-ney",
                   help="smoothing method")

    p = add("translate", cmd_translate, "translate tokenized text with a saved model")
    p.add_argument("--model", required=True, help="model directory")
    p.add_argument("--input", default="-", help="input file or - for stdin")
    p.add_argument("--output", default="-", help="output file or - for stdout")
    p.add_argument("--monotone", action="store_true", help="disable phrase reordering")
    p.add_argument("--beam-size", type=int, default=0, help="override the model's beam size")

    p = add("bleu", cmd_bleu, "corpus BLEU of hypotheses against references")
    p.add_argument("--hypotheses", default="-", help="hypothesis file or - for stdin")
    p.add_argument("--references", required=True, help="reference file")
    p.add_argument("--max-n", type=int, default=4, help="highest n-gram order")
    p.add_argument("--smoothing", action="store_true", help="floor zero counts")

    for name, func, text in (("iterate", cmd_iterate, "full unsupervised training with back-translation"),
                             ("ablate", cmd_ablate, "rerun the pipeline varying one factor")):
        p = add(name, func, text)
        p.add_argument("--config", default="", help="configuration file")
        p.add_argument("--src", default="", help="source corpus (overrides the config)")
        p.add_argument("--tgt", default="", help="target corpus (overrides the config)")
        p.add_argument("--workdir", default="run", help="artifact directory")
        p.add_argument("--iterations", type=int, default=None,
                       help="back-translation rounds (default: config value)")
        if name == "ablate":
            p.add_argument("--axis", required=True, choices=("init_quality", "lm_data", "bt_data"),
                           help="factor to vary")
            p.add_argument("--levels", default="0.25,1", help="comma-separated fractions")

    p = add("synthbench", cmd_synthbench, "generate the cipher benchmark and run it end to end")
    p.add_argument("--workdir", default="synthbench", help="artifact directory")
    p.add_argument("--sentences", type=int, default=50_000, help="monolingual sentences (both halves)")
    p.add_argument("--iterations", type=int, default=3, help="back-translation rounds")
    p.add_argument("--config", default="", help="optional base configuration")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (ConfigError, PipelineError, ValueError, KeyError, OSError) as exc:
        print(f"monosmt {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
