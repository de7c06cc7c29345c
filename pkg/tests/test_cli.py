import pytest

from monosmt.cli import build_parser, main
from cli_chain import ARTIFACTS, run_chain


@pytest.fixture(scope="module")
def chain(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    return root, run_chain(root)


class TestCommands:
    def test_every_subcommand_succeeds(self, chain):
        _, codes = chain
        assert codes == dict.fromkeys(codes, 0)

    def test_artifacts_written(self, chain):
        root, _ = chain
        for name in ARTIFACTS:
            assert (root / name).stat().st_size > 0, name

    def test_tokenize_output(self, chain):
        root, _ = chain
        assert (root / "tok.txt").read_text().splitlines() == [
            "Hello , world !", "The U.K. ( 2016 ) is here ."]

    def test_translation_is_line_aligned(self, chain):
        root, _ = chain
        assert len((root / "test.hyp").read_text().splitlines()) == 50

    def test_iterate_report_rows(self, chain):
        root, _ = chain
        lines = (root / "iterate" / "reports" / "iterations.tsv").read_text().splitlines()
        assert [l.split("\t")[:2] for l in lines[1:]] == [
            ["0", "A-B"], ["0", "B-A"], ["1", "B-A"], ["1", "A-B"]]

    def test_bleu_prints_tsv(self, chain, capsys):
        root, _ = chain
        assert main(["bleu", "--hypotheses", str(root / "data" / "test.tgt"),
                     "--references", str(root / "data" / "test.tgt")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0].startswith("bleu\tp1") and out[1].startswith("100.000000")


class TestErrors:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_config_error_exits_1(self, tmp_path, capsys):
        (tmp_path / "bad.cfg").write_text("[decoder]\nbeam_size = wide\n")
        assert main(["iterate", "--config", str(tmp_path / "bad.cfg")]) == 1
        assert "bad.cfg:2" in capsys.readouterr().err

    def test_missing_corpus_exits_1(self, tmp_path, capsys):
        assert main(["iterate", "--workdir", str(tmp_path / "w")]) == 1
        assert "src_corpus" in capsys.readouterr().err

    def test_help_shows_reference_scale_values(self):
        help_text = build_parser()._subparsers._group_actions[0].choices["train-embeddings"].format_help()
        assert "reference-scale value: 512" in help_text
