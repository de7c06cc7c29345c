import math

import pytest

from monosmt.config import ConfigError, PipelineConfig, load_config, parse_config


class TestParse:
    def test_defaults(self):
        config = parse_config("")
        assert config == PipelineConfig()
        assert config.induce.temperature == pytest.approx(1 / 30)
        assert config.train.max_phrase_len == 4

    def test_temperature_parses_literally(self):
        assert parse_config("[induce]\ntemperature = 30\n").induce.temperature == 30.0

    def test_types_and_comments(self):
        text = "[data]\nlowercase = yes  # fold case\n[decoder]\nbeam_size = 7\nw_lm = 0.75\n"
        config = parse_config(text)
        assert config.data.lowercase is True
        assert config.decoder.beam_size == 7
        assert config.decoder.w_lm == 0.75

    def test_sectionless_unique_key(self):
        assert parse_config("beam_size = 3").decoder.beam_size == 3

    @pytest.mark.parametrize("text, message", [
        ("[nope]\n", "unknown section"),
        ("[decoder]\nbeam = 3\n", "unknown key"),
        ("[decoder]\nbeam_size = many\n", "expected int"),
        ("[decoder]\nbeam_size\n", "expected 'key = value'"),
        ("[lm]\ndiscount_mode = witten-bell\n", "discount_mode"),
        ("[induce]\ntemperature = nan\n", "expected float"),
        ("[induce]\ntemperature = -1\n", "temperature"),
    ])
    def test_errors(self, text, message):
        with pytest.raises(ConfigError, match=message):
            parse_config(text, "c.cfg")

    def test_error_has_line_number(self):
        with pytest.raises(ConfigError, match=r"c\.cfg:3"):
            parse_config("[decoder]\n\nbeam_size = x\n", "c.cfg")


class TestRoundTrip:
    def test_to_text_parses_back(self, tmp_path):
        config = PipelineConfig().with_values(decoder={"w_lm": 0.1 + 0.2},
                                              embeddings={"bigram_threshold": math.inf})
        config.save(tmp_path / "c.cfg")
        assert load_config(tmp_path / "c.cfg") == config

    def test_relative_paths_resolve_against_file(self, tmp_path):
        (tmp_path / "c.cfg").write_text("[data]\nsrc_corpus = a.txt\ntgt_corpus = /abs/b.txt\n")
        config = load_config(tmp_path / "c.cfg")
        assert config.data.src_corpus == str(tmp_path / "a.txt")
        assert config.data.tgt_corpus == "/abs/b.txt"

    def test_require_corpora(self):
        with pytest.raises(ConfigError, match="src_corpus"):
            PipelineConfig().require_corpora()

    def test_weights(self):
        w = PipelineConfig().with_values(decoder={"w_distortion": 0.5}).weights()
        assert w.distortion == 0.5 and w.word_penalty == -1.0
