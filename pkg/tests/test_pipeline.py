import fcntl
import math

import pytest

from monosmt.config import PipelineConfig
from monosmt.corpus import Corpus
from monosmt.decoder import LogLinearWeights, TranslationModel
from monosmt.lm import train_lm
from monosmt.phrase_table import PhraseTable
from monosmt.pipeline import (PipelineError, SyntheticBitext, back_translate, build_seed_models,
                              prepare_synthbench, round_trip_bleu, run_ablation, run_unsupervised,
                              train_iteration, tune_weights)
from monosmt.utils import file_hash
from small_run import SMALL, SMALL_SENTENCES


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("small")
    config = prepare_synthbench(root, 0, SMALL_SENTENCES, SMALL).with_values(train={"iterations": 2})
    return config, run_unsupervised(config, root / "run")


def copy_model(words=("a", "b", "c")):
    table = PhraseTable({(w,): [((w.upper(),), 1.0, 1.0)] for w in words}, "s", "t")
    lm = train_lm(Corpus("t", (tuple(w.upper() for w in words),) * 3), 2, "laplace")
    return TranslationModel(table, lm, reordering_enabled=False)


class TestSchedule:
    def test_report_rows(self, small_run):
        _, result = small_run
        rows = [(r.iteration, r.direction) for r in result.reports]
        assert rows == [(0, "A-B"), (0, "B-A"), (1, "B-A"), (1, "A-B"), (2, "B-A"), (2, "A-B")]
        lines = (result.workdir / "reports" / "iterations.tsv").read_text().splitlines()
        assert lines[0] == "iteration\tdirection\tround_trip_bleu\ttest_bleu\ttable_size"
        assert len(lines) == 7
        assert all(math.isfinite(r.round_trip_bleu) for r in result.reports)

    def test_only_seed_models_are_monotone(self, small_run):
        _, result = small_run
        for it in (0, 1, 2):
            for d in ("A-B", "B-A"):
                model = TranslationModel.load(result.workdir / "models" / f"iter_{it}" / d)
                assert model.reordering_enabled == (it != 0)

    def test_language_models_fixed_across_iterations(self, small_run):
        _, result = small_run
        models = result.workdir / "models"
        for d, lang in (("A-B", "B"), ("B-A", "A")):
            hashes = {file_hash(models / f"iter_{it}" / d / "lm.arpa") for it in (0, 1, 2)}
            assert hashes == {file_hash(result.workdir / "lm" / f"{lang}.arpa")}

    def test_synthetic_data_provenance(self, small_run):
        _, result = small_run
        synthetic = sorted(p.name for p in (result.workdir / "corpora" / "synthetic").iterdir())
        assert "iter_0.A-B.generated" in synthetic and "iter_1.B-A.genuine" in synthetic
        assert "iter_2.A-B.generated" not in synthetic

    def test_manifest_and_selection(self, small_run):
        _, result = small_run
        manifest = (result.workdir / "manifest.tsv").read_text()
        assert "config.cfg\t" in manifest and "lm/A.arpa\t" in manifest
        selection = (result.workdir / "reports" / "selection.tsv").read_text().splitlines()
        assert selection[1] == f"round_trip_bleu\t{result.selected_iteration}"

    def test_concurrent_run_is_refused(self, small_run):
        config, result = small_run
        lock = result.workdir / ".lock"
        with open(lock, "w") as f:
            fcntl.flock(f, fcntl.LOCK_EX | fcntl.LOCK_NB)
            with pytest.raises(PipelineError, match="in use"):
                run_unsupervised(config, result.workdir)


class TestComponents:
    def test_seed_models_are_monotone_and_inverse(self):
        model = copy_model()
        st, ts = build_seed_models(model.phrase_table, model.target_lm, model.target_lm,
                                   PipelineConfig())
        assert not st.reordering_enabled and not ts.reordering_enabled
        assert ts.phrase_table.options(("A",)) == ((("a",), 1.0, 1.0),)

    def test_back_translation_pairs_and_direction(self):
        model = copy_model()
        corpus = Corpus("s", (("a", "b"), ("c",), ("b", "a", "c")))
        bitext = back_translate(model, corpus, 2, seed=1)
        assert bitext.generator == ("s", "t") and bitext.trains == ("t", "s")
        assert len(bitext) == 2
        for generated, original in bitext:
            assert generated == tuple(w.upper() for w in original)

    def test_training_on_copy_bitext(self):
        pairs = tuple(((w.upper(),), (w,)) for w in "abcab")
        bitext = SyntheticBitext(pairs, ("s", "t"), 0)
        lm = train_lm(Corpus("s", (("a", "b", "c"),)), 2, "laplace")
        model = train_iteration(bitext, lm, PipelineConfig())
        assert model.reordering_enabled
        assert model.phrase_table.source_language == "t"
        assert model.phrase_table.options(("A",))[0][0] == ("a",)

    def test_round_trip_of_copy_model_is_perfect(self):
        model = copy_model()
        back = TranslationModel(model.phrase_table.inverted(),
                                train_lm(Corpus("s", (("a", "b", "c"),)), 2, "laplace"))
        held_out = Corpus("s", (("a", "b", "c", "a", "b"), ("c", "a", "b", "c")))
        assert round_trip_bleu(model, back, held_out) == 100.0

    def test_tune_weights_picks_best_grid_point(self):
        model = copy_model()
        entries = dict(model.phrase_table.entries)
        entries[("a",)] = ((("A",), 0.9, 0.9), (("X",), 0.1, 0.1))
        model = model.with_settings(phrase_table=PhraseTable(entries, "s", "t"))
        dev = Corpus("s", (("a", "b", "c", "a", "b"),))
        ref = Corpus("t", (("A", "B", "C", "A", "B"),))
        bad = LogLinearWeights(tm_fwd=-5.0, tm_bwd=-5.0, lm=0.0)
        weights, bleu = tune_weights(model, dev, ref, [bad, model.weights])
        assert weights == model.weights and bleu == 100.0

    def test_empty_bitext_rejected(self):
        with pytest.raises(ValueError):
            train_iteration(SyntheticBitext((), ("s", "t"), 0), copy_model().target_lm,
                            PipelineConfig())


class TestAblation:
    def test_unknown_axis(self, tmp_path):
        with pytest.raises(ValueError, match="axis"):
            run_ablation(PipelineConfig(), "beam", [1.0], tmp_path)

    def test_level_range(self, tmp_path):
        with pytest.raises(ValueError):
            run_ablation(PipelineConfig(), "lm_data", [1.5], tmp_path)
