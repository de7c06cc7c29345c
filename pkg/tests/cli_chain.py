"""Runs every subcommand once on a small cipher corpus; shared by CLI and determinism tests."""

from __future__ import annotations

from pathlib import Path

from monosmt.cli import main
from monosmt.synth import make_cipher_benchmark
from small_run import SMALL, SMALL_SENTENCES


def write_inputs(root: Path) -> None:
    make_cipher_benchmark(SMALL_SENTENCES, n_test=50, n_dev=20, seed=11).save(root / "data")
    (root / "raw.txt").write_text("Hello, world!\nThe U.K. (2016) is here.\n", encoding="utf-8")
    config = SMALL.with_values(data=dict(
        src_corpus="data/train.src", tgt_corpus="data/train.tgt", src_language="A",
        tgt_language="B", pretokenized=True, test_src="data/test.src", test_tgt="data/test.tgt"))
    config.save(root / "small.cfg")


def run_chain(root: Path, seed: int = 3) -> dict[str, int]:
    """Every subcommand in dependency order; returns exit codes by command name."""
    write_inputs(root)
    d = str(root)
    s = ["--seed", str(seed), "--threads", "1"]
    commands = {
        "tokenize": ["tokenize", "--input", f"{d}/raw.txt", "--output", f"{d}/tok.txt"],
        "learn-bpe": ["learn-bpe", "--input", f"{d}/data/train.src", f"{d}/data/train.tgt",
                      "--merges", "50", "--output", f"{d}/codes.bpe"],
        "apply-bpe": ["apply-bpe", "--codes", f"{d}/codes.bpe", "--input", f"{d}/data/test.src",
                      "--output", f"{d}/test.bpe"],
        "train-embeddings-src": ["train-embeddings", "--input", f"{d}/data/train.src",
                                 "--output", f"{d}/A.vec", "--language", "A", "--dimension", "16",
                                 "--epochs", "2", "--min-count", "3", "--bigram-threshold", "inf"],
        "train-embeddings-tgt": ["train-embeddings", "--input", f"{d}/data/train.tgt",
                                 "--output", f"{d}/B.vec", "--language", "B", "--dimension", "16",
                                 "--epochs", "2", "--min-count", "3", "--bigram-threshold", "inf"],
        "align": ["align", "--src-vec", f"{d}/A.vec", "--tgt-vec", f"{d}/B.vec",
                  "--output", f"{d}/W.txt", "--seed-dictionary-out", f"{d}/seed.dict"],
        "induce-table": ["induce-table", "--src-vec", f"{d}/A.vec", "--tgt-vec", f"{d}/B.vec",
                         "--rotation", f"{d}/W.txt", "--output", f"{d}/pt.txt", "--top-k", "10"],
        "train-lm": ["train-lm", "--input", f"{d}/data/train.tgt", "--output", f"{d}/B.arpa",
                     "--order", "3"],
        "iterate": ["iterate", "--config", f"{d}/small.cfg", "--workdir", f"{d}/iterate"],
        "translate": ["translate", "--model", f"{d}/iterate/models/iter_1/A-B",
                      "--input", f"{d}/data/test.src", "--output", f"{d}/test.hyp"],
        "bleu": ["bleu", "--hypotheses", f"{d}/test.hyp", "--references", f"{d}/data/test.tgt"],
        "ablate": ["ablate", "--config", f"{d}/small.cfg", "--workdir", f"{d}/ablate",
                   "--axis", "init_quality", "--levels", "0.5,1", "--iterations", "0"],
        "synthbench": ["synthbench", "--workdir", f"{d}/synth", "--sentences", "2000",
                       "--iterations", "0", "--config", f"{d}/small.cfg"],
    }
    return {name: main(argv + s) for name, argv in commands.items()}


# artifacts compared byte for byte between two runs of the chain
ARTIFACTS = ("tok.txt", "codes.bpe", "test.bpe", "A.vec", "B.vec", "W.txt", "seed.dict", "pt.txt",
             "B.arpa", "iterate/manifest.tsv", "iterate/reports/iterations.tsv", "test.hyp",
             "ablate/init_quality/ablation.tsv", "synth/run/manifest.tsv",
             "synth/run/reports/iterations.tsv")
