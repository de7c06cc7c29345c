import pytest
import sacrebleu

from monosmt.evaluate import corpus_bleu


def ref_bleu(hyps, refs, max_n=4):
    metric = sacrebleu.metrics.BLEU(max_ngram_order=max_n, tokenize="none", effective_order=False,
                                    smooth_method="none")
    return metric.corpus_score([" ".join(h) for h in hyps], [[" ".join(r) for r in refs]]).score


class TestBleu:
    def test_identity(self):
        s = [("the", "cat", "sat", "on", "the", "mat")]
        assert corpus_bleu(s, s).bleu == 100.0

    def test_disjoint(self):
        assert corpus_bleu([("a", "b", "c", "d")], [("w", "x", "y", "z")]).bleu == 0.0

    def test_clipped_precision_example(self):
        report = corpus_bleu([("the",) * 4], [("the", "cat")], max_n=1)
        assert report.n_gram_precisions == (0.25,)
        assert report.brevity_penalty == 1.0
        assert report.bleu == pytest.approx(25.0, abs=1e-6)
        assert report.bleu == pytest.approx(ref_bleu([("the",) * 4], [("the", "cat")], 1), abs=1e-6)

    def test_matches_reference_implementation(self):
        hyps = [("the", "cat", "sat", "on", "a", "mat"), ("there", "is", "a", "cat", "here"),
                ("a", "b", "c")]
        refs = [("the", "cat", "sat", "on", "the", "mat"), ("there", "is", "a", "dog", "here", "too"),
                ("a", "b", "c", "d")]
        ours = corpus_bleu(hyps, refs).bleu
        assert ours > 0
        assert ours == pytest.approx(ref_bleu(hyps, refs), abs=1e-6)

    def test_brevity_penalty(self):
        report = corpus_bleu([("a", "b")], [("a", "b", "c", "d")], max_n=2)
        assert report.brevity_penalty == pytest.approx(2.718281828459045 ** (1 - 2))

    def test_smoothing_keeps_partial_credit(self):
        hyps, refs = [("a", "b", "x", "c")], [("a", "b", "c", "d")]
        assert corpus_bleu(hyps, refs).bleu == 0.0
        assert corpus_bleu(hyps, refs, smoothing=True).bleu > 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            corpus_bleu([("a",)], [])
        with pytest.raises(ValueError):
            corpus_bleu([], [])

    def test_tsv_fields(self):
        report = corpus_bleu([("a", "b")], [("a", "b")], max_n=2)
        assert report.tsv().split("\t") == ["100.000000", "1.000000", "1.000000", "1.000000", "2", "2"]
