"""Run configuration and the errors shared across modules."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

MODES = ("no_context", "context_as_features", "caviar")

DEFAULT_ACTIVITIES = (
    "elevator_up",
    "elevator_down",
    "moving_by_car",
    "brushing_teeth",
    "running",
    "sitting",
    "stairs_up",
    "stairs_down",
    "cycling",
    "standing",
    "walking",
    "sitting_on_transport",
    "standing_on_transport",
)

BUILTIN_RULES = "builtin:default.rules"


class ConfigError(ValueError):
    """Invalid parameter or parameter combination."""


@dataclass
class ForestParams:
    n_trees: int = 10
    min_samples_split: int = 20
    min_gain: float = 0.01
    n_tests: int | None = None  # None: ceil(sqrt(n_features))
    max_depth: int = 20
    leaf_memory: int = 100  # samples a leaf keeps and hands down on a split; 0 keeps none


@dataclass
class Thresholds:
    """Discretization boundaries for raw context values."""

    speed_zero: float = 0.3  # m/s; below -> zero
    speed_low: float = 1.5  # below -> low
    speed_medium: float = 6.0  # below -> medium, else high
    height_epsilon: float = 0.3  # m per snapshot interval
    light_dim: float = 50.0  # lux
    light_bright: float = 1000.0
    noise_quiet: float = 40.0  # dB
    noise_loud: float = 70.0


@dataclass
class RunConfig:
    seed: int
    window_seconds: int = 4
    grid_hz: float = 50.0
    median_kernel: int = 3
    pi: float = 0.7
    rho: float = 0.45
    t_bootstrap_seconds: float = 60.0
    smote_q: int = 3
    smote_k: int = 5
    query_options: int = 3
    minority_capacity: int = 50
    mode: str = "caviar"
    activities: tuple[str, ...] = DEFAULT_ACTIVITIES
    rules_path: str = BUILTIN_RULES
    minority: tuple[str, ...] | None = None  # None: taken from the rule file
    streams: tuple[tuple[str, str], ...] | None = None  # None: every stream in the data
    replay_order: str = "sequential"  # or "interleaved"
    subject_order: tuple[str, ...] | None = None
    adapt_on_holdout: bool = False
    prequential_window: int = 800
    prequential_overlap: float = 0.75
    forest: ForestParams = field(default_factory=ForestParams)
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        if isinstance(self.forest, dict):
            self.forest = ForestParams(**self.forest)
        if isinstance(self.thresholds, dict):
            self.thresholds = Thresholds(**self.thresholds)
        self.activities = tuple(self.activities)
        if self.minority is not None:
            self.minority = tuple(self.minority)
        if self.streams is not None:
            self.streams = tuple(tuple(s) for s in self.streams)
        if self.subject_order is not None:
            self.subject_order = tuple(self.subject_order)

    def validate(self) -> "RunConfig":
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("an explicit integer seed is required")
        if not 0.0 < self.rho < self.pi <= 1.0:
            raise ConfigError(f"thresholds must satisfy 0 < rho < pi <= 1 (rho={self.rho}, pi={self.pi})")
        if self.window_seconds < 1:
            raise ConfigError("window_seconds must be >= 1")
        if self.grid_hz <= 0:
            raise ConfigError("grid_hz must be positive")
        if self.median_kernel < 1 or self.median_kernel % 2 == 0:
            raise ConfigError("median_kernel must be a positive odd integer")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.activities:
            raise ConfigError("activity set is empty")
        if len(set(self.activities)) != len(self.activities):
            raise ConfigError("duplicate activities")
        if self.t_bootstrap_seconds < self.window_seconds:
            raise ConfigError("t_bootstrap_seconds must cover at least one window")
        if self.smote_q < 0 or self.smote_k < 1 or self.query_options < 1:
            raise ConfigError("smote_q >= 0, smote_k >= 1 and query_options >= 1 required")
        if self.replay_order not in ("sequential", "interleaved"):
            raise ConfigError("replay_order must be 'sequential' or 'interleaved'")
        if self.prequential_window < 1 or not 0.0 <= self.prequential_overlap < 1.0:
            raise ConfigError("prequential window >= 1 and 0 <= overlap < 1 required")
        f = self.forest
        if f.n_trees < 1 or f.min_samples_split < 1 or f.max_depth < 0 or f.min_gain < 0:
            raise ConfigError("invalid forest parameters")
        return self

    def replace(self, **changes) -> "RunConfig":
        data = self.to_dict()
        data.update(changes)
        return RunConfig.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        for key in ("activities", "minority", "streams", "subject_order"):
            if data[key] is not None:
                data[key] = [list(s) if isinstance(s, tuple) else s for s in data[key]]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "seed" not in data or data["seed"] is None:
            raise ConfigError("an explicit integer seed is required")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    """Read a JSON config file (or start empty) and apply non-None overrides."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(data).validate()
