"""Run configuration: one YAML file with nested sections, loaded into
dataclasses and validated eagerly.

Section dataclasses are reused from the modules they configure
(extraction thresholds, backend, PPO, reward shaping), so a config key is
always spelled exactly like the field it sets. Unknown keys are errors;
a typo must not silently fall back to a default. Seeds are plain config
values with fixed defaults; nothing is ever seeded from the clock.

load_config(path) reads and validates a file; resolved(cfg) flattens the
result back to plain JSON-ready data so reports can embed the exact
configuration that produced them.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, get_type_hints

import yaml

from .errors import ConfigError, DataError
from .extract import ExtractionConfig
from .genpipe import BackendConfig
from .ingest import LaneMap, parse_lane_map
from .rl import PpoConfig, RewardConfig

VOTING_MODES = ("embedding", "structured")
BACKEND_MODES = ("replay", "http_chat")


@dataclass
class PathsConfig:
    tracks: str = ""
    lane_maps: str = ""  # one map file or a directory of them, keyed by stem
    segments: str = ""
    corpus: str = ""
    index: str = ""
    checkpoints: str = ""
    reports: str = ""


@dataclass
class RetrievalConfig:
    k: int = 4

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ConfigError(f"retrieval.k must be >= 0, got {self.k}")


@dataclass
class GenerationConfig:
    voting: str = "structured"
    candidates: int = 5
    attempts: int = 3

    def __post_init__(self) -> None:
        if self.voting not in VOTING_MODES:
            raise ConfigError(f"generation.voting must be one of {VOTING_MODES}, got {self.voting!r}")
        if self.candidates < 1:
            raise ConfigError(f"generation.candidates must be >= 1, got {self.candidates}")
        if self.attempts < 1:
            raise ConfigError(f"generation.attempts must be >= 1, got {self.attempts}")


@dataclass
class CorpusBuildConfig:
    map_name: str = "straight_two_lane"
    dataset: str = "SYNTH"
    ego_lane: str | None = None
    dt: float = 0.1
    max_records: int = 10000


@dataclass
class TrainingConfig:
    adv_steps: int = 4096
    ego_steps: int = 4096
    ppo: PpoConfig = field(default_factory=PpoConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self) -> None:
        if self.adv_steps < 0 or self.ego_steps < 0:
            raise ConfigError("training step budgets must be >= 0")


@dataclass
class EvaluationConfig:
    n_episodes: int = 10
    workers: int = 1
    phase: str = "II"
    ttc_bins: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)
    pet_bins: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)

    def __post_init__(self) -> None:
        if self.n_episodes < 1:
            raise ConfigError(f"evaluation.n_episodes must be >= 1, got {self.n_episodes}")
        if self.workers < 1:
            raise ConfigError(f"evaluation.workers must be >= 1, got {self.workers}")
        if self.phase not in ("I", "II"):
            raise ConfigError(f"evaluation.phase must be I or II, got {self.phase!r}")


@dataclass
class LoopConfig:
    rounds: int = 1
    queries: tuple[str, ...] = ()
    n_episodes: int = 5

    def __post_init__(self) -> None:
        if self.rounds < 1:
            raise ConfigError(f"loop.rounds must be >= 1, got {self.rounds}")


@dataclass
class SmoothConfig:
    degree: int = 5

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ConfigError(f"smooth.degree must be >= 1, got {self.degree}")


@dataclass
class RunConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    corpus: CorpusBuildConfig = field(default_factory=CorpusBuildConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    smooth: SmoothConfig = field(default_factory=SmoothConfig)

    def require_paths(self, *names: str) -> None:
        """Fail when any named path is unset or does not exist."""
        missing = []
        for name in names:
            value = getattr(self.paths, name)
            if not value:
                missing.append(f"paths.{name} is not set")
            elif not Path(value).exists():
                missing.append(f"paths.{name}: {value} does not exist")
        if missing:
            raise ConfigError("; ".join(missing))


def _coerce(value: object, hint: object, where: str) -> object:
    if dataclasses.is_dataclass(hint):
        return _from_mapping(hint, value, where)
    origin = getattr(hint, "__origin__", None)
    if origin is tuple and isinstance(value, (list, tuple)):
        return tuple(value)
    return value


def _from_mapping(cls, data: object, where: str):
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    hints = get_type_hints(cls)
    names = [f.name for f in dataclasses.fields(cls)]
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    kwargs = {}
    for name in names:
        if name in data:
            kwargs[name] = _coerce(data[name], hints[name], f"{where}.{name}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_mapping(data: Mapping | None) -> RunConfig:
    cfg = _from_mapping(RunConfig, data, "config")
    if cfg.backend.mode not in BACKEND_MODES:
        raise ConfigError(f"backend.mode must be one of {BACKEND_MODES}, got {cfg.backend.mode!r}")
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Defaults when path is None; otherwise parse and validate the file."""
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from exc
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(data)


def resolved(cfg: RunConfig) -> dict:
    """The full effective configuration as JSON-ready plain data."""

    def clean(value):
        if isinstance(value, dict):
            return {k: clean(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [clean(v) for v in value]
        return value

    return clean(dataclasses.asdict(cfg))


def load_lane_maps(path: str | Path) -> dict[str, LaneMap]:
    """Lane maps keyed by name: a directory of *.json files (keyed by stem)
    or a single file."""
    path = Path(path)
    if path.is_dir():
        files = sorted(path.glob("*.json"))
        if not files:
            raise DataError(f"no *.json lane maps in {path}")
        return {f.stem: parse_lane_map(f) for f in files}
    return {path.stem: parse_lane_map(path)}
