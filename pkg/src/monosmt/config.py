"""Pipeline configuration: sectioned ``key = value`` files with strict validation."""

from __future__ import annotations

import math
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .decoder import LogLinearWeights
from .embeddings import SgnsConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DataSection:
    src_corpus: str = ""
    tgt_corpus: str = ""
    src_language: str = "src"
    tgt_language: str = "tgt"
    lowercase: bool = False
    pretokenized: bool = False
    test_src: str = ""
    test_tgt: str = ""
    dev_src: str = ""
    dev_tgt: str = ""
    gold_dictionary: str = ""
    bpe_merges: int = 0


@dataclass(frozen=True)
class EmbeddingSection:
    dimension: int = 64
    window: int = 5
    negatives: int = 10
    epochs: int = 5
    learning_rate: float = 0.025
    subsample_threshold: float = 1e-4
    min_count: int = 5
    batch_size: int = 512
    bigram_min_count: int = 5
    bigram_threshold: float = 10.0


@dataclass(frozen=True)
class AlignSection:
    max_seed_pairs: int = 5000
    seed_fraction: float = 1.0
    refine_iterations: int = 1
    max_rank: int = 15000
    csls_k: int = 10


@dataclass(frozen=True)
class InduceSection:
    # the softmax divides cosines by this value; 1/30 sharpens them by a factor 30
    temperature: float = 1.0 / 30.0
    top_k: int = 200
    max_src_phrases: int = 300_000
    floor: float = 1e-6


@dataclass(frozen=True)
class LmSection:
    order: int = 4
    discount_mode: str = "kneser-ney"
    data_fraction: float = 1.0


@dataclass(frozen=True)
class DecoderSection:
    w_tm_fwd: float = 0.2
    w_tm_bwd: float = 0.2
    w_lm: float = 0.5
    w_word_penalty: float = -1.0
    w_phrase_penalty: float = 0.2
    w_distortion: float = 0.3
    distortion_limit: int = 6
    beam_size: int = 100
    max_options: int = 20


@dataclass(frozen=True)
class TrainSection:
    iterations: int = 3
    sample_size: int = 50_000
    ibm1_iterations: int = 5
    max_phrase_len: int = 4
    prune_top: int = 50
    round_trip_sentences: int = 100


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    threads: int = 1


SECTIONS = {
    "data": DataSection, "embeddings": EmbeddingSection, "align": AlignSection,
    "induce": InduceSection, "lm": LmSection, "decoder": DecoderSection,
    "train": TrainSection, "run": RunSection,
}

# values used at full scale, shown in --help next to the desk defaults
REFERENCE_VALUES = {
    "bpe_merges": "60000", "dimension": "512", "window": "5", "negatives": "10",
    "temperature": "30 (as a divisor of the cosine; see README)", "top_k": "200",
    "max_src_phrases": "300000", "sample_size": "5000000", "max_phrase_len": "4",
}


@dataclass(frozen=True)
class PipelineConfig:
    data: DataSection = field(default_factory=DataSection)
    embeddings: EmbeddingSection = field(default_factory=EmbeddingSection)
    align: AlignSection = field(default_factory=AlignSection)
    induce: InduceSection = field(default_factory=InduceSection)
    lm: LmSection = field(default_factory=LmSection)
    decoder: DecoderSection = field(default_factory=DecoderSection)
    train: TrainSection = field(default_factory=TrainSection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        checks = [
            (self.embeddings.dimension >= 1, "embeddings.dimension must be >= 1"),
            (self.induce.temperature > 0, "induce.temperature must be positive"),
            (self.induce.top_k >= 1, "induce.top_k must be >= 1"),
            (self.lm.order >= 1, "lm.order must be >= 1"),
            (self.lm.discount_mode in ("kneser-ney", "laplace"),
             "lm.discount_mode must be kneser-ney or laplace"),
            (0 < self.lm.data_fraction <= 1, "lm.data_fraction must be in (0, 1]"),
            (0 < self.align.seed_fraction <= 1, "align.seed_fraction must be in (0, 1]"),
            (self.train.iterations >= 0, "train.iterations must be >= 0"),
            (self.train.sample_size >= 0, "train.sample_size must be >= 0"),
            (self.decoder.beam_size >= 1, "decoder.beam_size must be >= 1"),
            (self.run.threads >= 1, "run.threads must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    def with_values(self, **sections) -> "PipelineConfig":
        """Copy with overrides given as ``section={key: value}`` mappings."""
        changed = {name: replace(getattr(self, name), **values) for name, values in sections.items()}
        return replace(self, **changed)

    def require_corpora(self) -> None:
        missing = [k for k in ("src_corpus", "tgt_corpus") if not getattr(self.data, k)]
        if missing:
            raise ConfigError(f"missing required corpus path(s): {', '.join('data.' + k for k in missing)}")

    def sgns(self, seed: int) -> SgnsConfig:
        e = self.embeddings
        return SgnsConfig(e.dimension, e.window, e.negatives, e.epochs, e.learning_rate,
                          e.subsample_threshold, e.min_count, seed, e.batch_size)

    def weights(self) -> LogLinearWeights:
        d = self.decoder
        return LogLinearWeights(d.w_tm_fwd, d.w_tm_bwd, d.w_lm, d.w_word_penalty,
                                d.w_phrase_penalty, d.w_distortion)

    def to_text(self) -> str:
        lines = []
        for name in SECTIONS:
            lines.append(f"[{name}]")
            section = getattr(self, name)
            for f in fields(section):
                lines.append(f"{f.name} = {_format(getattr(section, f.name))}")
            lines.append("")
        return "\n".join(lines)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _convert(raw: str, kind, key: str, where: str):
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if math.isnan(value):
                raise ValueError
            return value
        return raw
    except ValueError:
        raise ConfigError(f"{where}: {key} = {raw!r}: expected {kind.__name__}") from None


def _key_index() -> dict[str, list[str]]:
    index: dict[str, list[str]] = {}
    for name, cls in SECTIONS.items():
        for f in fields(cls):
            index.setdefault(f.name, []).append(name)
    return index


def parse_config(text: str, source: str = "<config>") -> PipelineConfig:
    """Parse sectioned ``key = value`` text; unknown keys and bad values are errors.

    Keys before any ``[section]`` header are accepted when their name is
    unique across sections. Relative corpus paths stay as written.
    """
    values: dict[str, dict] = {name: {} for name in SECTIONS}
    hints = {name: typing.get_type_hints(cls) for name, cls in SECTIONS.items()}
    index = _key_index()
    section = None
    for n, line in enumerate(text.splitlines(), 1):
        where = f"{source}:{n}"
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"{where}: unknown section [{section}]")
            continue
        key, sep, raw = stripped.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"{where}: expected 'key = value', got {line.strip()!r}")
        if section is None:
            owners = index.get(key, [])
            if len(owners) != 1:
                raise ConfigError(f"{where}: unknown key {key!r}" if not owners
                                  else f"{where}: key {key!r} is ambiguous; put it under a section")
            target = owners[0]
        else:
            target = section
            if key not in hints[target]:
                raise ConfigError(f"{where}: unknown key {key!r} in [{target}]")
        values[target][key] = _convert(raw, hints[target][key], key, where)
    try:
        return PipelineConfig(**{name: cls(**values[name]) for name, cls in SECTIONS.items()})
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> PipelineConfig:
    path = Path(path)
    config = parse_config(path.read_text(encoding="utf-8"), str(path))
    base = path.parent
    data = config.data
    resolved = {}
    for key in ("src_corpus", "tgt_corpus", "test_src", "test_tgt", "dev_src", "dev_tgt",
                "gold_dictionary"):
        value = getattr(data, key)
        if value and not Path(value).is_absolute():
            resolved[key] = str((base / value).resolve())
    return config.with_values(data=resolved) if resolved else config
