"""Experiment configuration: YAML key-value documents mapped onto a dataclass."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

import yaml

from .envs import ENVIRONMENTS

REWARD_MODES = ("lrr_gaussian", "lrr_skew", "mse_rd", "sparse", "oracle_dense")
RELABEL_MODES = ("on_insert", "on_sample")


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass(frozen=True)
class ExperimentConfig:
    environment: str = "PointMass2D"
    reward_mode: str = "lrr_gaussian"
    # optimizer / SAC defaults
    learning_rate: float = 3e-4
    gamma: float = 0.99
    polyak: float = 0.005
    init_alpha: float = 1.0
    target_entropy: float | None = None  # None means -dim(A)
    hidden_layers: int = 2
    hidden_units: int = 256
    gradient_steps_per_env_step: int = 1
    gradient_steps_per_target_update: int = 1
    buffer_size: int = 100_000
    sac_batch_size: int = 512
    reward_batch_size: int = 4
    # artifact-level knobs
    reward_updates_per_episode: int = 4
    reward_hidden_units: int | None = None  # None means hidden_units
    start_steps: int = 1000
    horizon: int = 200
    total_env_steps: int = 50_000
    eval_every: int = 1000
    eval_episodes: int = 5
    seeds: tuple = (0,)
    output_dir: str = "runs"
    shared_noise: bool = False
    relabel_mode: str = "on_insert"
    autocorr_episodes: int = 20
    dump_trajectories: bool = False

    def __post_init__(self):
        validate(self)

    @property
    def network_hidden(self):
        return (self.hidden_units,) * self.hidden_layers

    @property
    def reward_network_hidden(self):
        units = self.reward_hidden_units or self.hidden_units
        return (units,) * self.hidden_layers


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_POSITIVE_INT = ("hidden_layers", "hidden_units", "gradient_steps_per_env_step",
                 "gradient_steps_per_target_update", "buffer_size", "sac_batch_size",
                 "reward_batch_size", "horizon", "eval_every", "eval_episodes",
                 "autocorr_episodes")
_NON_NEGATIVE_INT = ("reward_updates_per_episode", "start_steps", "total_env_steps")


def validate(cfg: ExperimentConfig):
    if cfg.environment not in ENVIRONMENTS:
        raise ConfigError("environment", f"unknown environment {cfg.environment!r}")
    if cfg.reward_mode not in REWARD_MODES:
        raise ConfigError("reward_mode", f"must be one of {REWARD_MODES}")
    if cfg.relabel_mode not in RELABEL_MODES:
        raise ConfigError("relabel_mode", f"must be one of {RELABEL_MODES}")
    for key in _POSITIVE_INT:
        if getattr(cfg, key) < 1:
            raise ConfigError(key, "must be a positive integer")
    for key in _NON_NEGATIVE_INT:
        if getattr(cfg, key) < 0:
            raise ConfigError(key, "must be non-negative")
    if cfg.reward_hidden_units is not None and cfg.reward_hidden_units < 1:
        raise ConfigError("reward_hidden_units", "must be a positive integer")
    if not cfg.learning_rate > 0:
        raise ConfigError("learning_rate", "must be > 0")
    if not 0 <= cfg.gamma <= 1:
        raise ConfigError("gamma", "must lie in [0, 1]")
    if not 0 <= cfg.polyak <= 1:
        raise ConfigError("polyak", "must lie in [0, 1]")
    if not cfg.init_alpha > 0:
        raise ConfigError("init_alpha", "must be > 0")
    if not cfg.seeds:
        raise ConfigError("seeds", "at least one seed is required")


def _coerce(key, value):
    f = _FIELDS[key]
    typ = f.type
    if value is None:
        if "None" in str(typ):
            return None
        raise ConfigError(key, "may not be null")
    if key == "seeds":
        seq = value if isinstance(value, (list, tuple)) else [value]
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in seq):
            raise ConfigError(key, "expected integer seed(s)")
        return tuple(seq)
    if typ in ("str",):
        if not isinstance(value, str):
            raise ConfigError(key, f"expected a string, got {type(value).__name__}")
        return value
    if typ == "bool":
        if not isinstance(value, bool):
            raise ConfigError(key, f"expected a boolean, got {type(value).__name__}")
        return value
    if typ.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            if isinstance(value, float) and value.is_integer():
                return int(value)
            raise ConfigError(key, f"expected an integer, got {value!r}")
        return value
    if typ.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"expected a number, got {value!r}")
        return float(value)
    return value


def from_mapping(data) -> ExperimentConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(_FIELDS))
    if unknown:
        raise ConfigError(unknown[0], "unknown key")
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in data.items()})


def parse_config(text: str) -> ExperimentConfig:
    """Parse a YAML key-value document; absent keys take their defaults."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"malformed YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError("<document>", "expected a mapping of keys to values")
    return from_mapping(data)


def to_dict(cfg: ExperimentConfig):
    d = dataclasses.asdict(cfg)
    d["seeds"] = list(cfg.seeds)
    return d


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)


def config_hash(cfg: ExperimentConfig, exclude=("seeds", "output_dir")) -> str:
    """SHA-256 over the canonical JSON of the semantic fields."""
    d = {k: v for k, v in to_dict(cfg).items() if k not in exclude}
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
