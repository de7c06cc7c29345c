import pytest

from monosmt.corpus import (EOW, BpeModel, Corpus, NoiseModel, apply_bpe, apply_noise, learn_bpe,
                            noise_corpus, revert_bpe, sample_sentences, tokenize)


def low_lower():
    return Corpus("x", (("low",),) * 5 + (("lower",),) * 2)


class TestTokenize:
    def test_acronym_keeps_periods(self):
        assert tokenize("U.K. (2016)") == ["U.K.", "(", "2016", ")"]

    def test_punctuation_split(self):
        assert tokenize("Hello, world!") == ["Hello", ",", "world", "!"]

    def test_lowercase(self):
        assert tokenize("The CAT.", lowercase=True) == ["the", "cat", "."]

    def test_empty(self):
        assert tokenize("   ") == []


class TestCorpus:
    def test_blank_lines_dropped(self):
        c = Corpus.from_lines("en", ["a b", "", "c"], pretokenized=True)
        assert c.sentences == (("a", "b"), ("c",))
        assert c.token_count == 3

    def test_rejects_empty_sentence(self):
        with pytest.raises(ValueError):
            Corpus("x", ((),))

    def test_save_load(self, tmp_path):
        c = Corpus("x", (("a", "b"), ("c",)))
        c.save(tmp_path / "c.txt")
        assert Corpus.load(tmp_path / "c.txt", "x", pretokenized=True) == c

    def test_sample_is_seeded_and_bounded(self):
        c = Corpus("x", tuple((str(i),) for i in range(50)))
        a = sample_sentences(c, 10, 3)
        assert a == sample_sentences(c, 10, 3)
        assert len(set(a.sentences)) == 10
        assert len(sample_sentences(c, 500, 3)) == 50


class TestBpe:
    def test_first_merge(self):
        assert learn_bpe([low_lower()], 1).merges == (("l", "o"),)

    def test_apply_one_merge(self):
        model = learn_bpe([low_lower()], 1)
        assert apply_bpe(model, ["lower"]) == ["lo", "w", "e", "r" + EOW]

    def test_revert_restores_words(self):
        model = learn_bpe([low_lower()], 4)
        words = ["lower", "low", "slow"]
        assert revert_bpe(apply_bpe(model, words)) == words

    def test_save_load(self, tmp_path):
        model = learn_bpe([low_lower()], 3)
        model.save(tmp_path / "codes")
        assert BpeModel.load(tmp_path / "codes").merges == model.merges

    def test_load_rejects_unproduced_symbol(self, tmp_path):
        (tmp_path / "codes").write_text("#bpe v1 1\nab c\n")
        with pytest.raises(ValueError):
            BpeModel.load(tmp_path / "codes")

    def test_merges_stop_when_exhausted(self):
        assert len(learn_bpe([Corpus("x", (("ab",),))], 10).merges) == 1


class TestNoise:
    def test_drop_rate(self):
        model = NoiseModel(drop_probability=0.1, swap_window=0, rng_seed=5)
        sentence = ["w"] * 100
        out = noise_corpus(model, Corpus("x", (tuple(sentence),) * 100))
        rate = 1 - out.token_count / 10_000
        assert 0.09 <= rate <= 0.11

    def test_local_shuffle_bound(self):
        model = NoiseModel(drop_probability=0.0, swap_window=2, rng_seed=1)
        out = apply_noise(model, [str(i) for i in range(30)])
        assert sorted(out, key=int) == [str(i) for i in range(30)]
        assert all(abs(int(w) - i) <= 2 for i, w in enumerate(out))

    def test_never_empty(self):
        assert apply_noise(NoiseModel(drop_probability=1.0), ["a", "b"]) == ["a"]
