"""YAML experiment configuration with key-path validation.

A config file has up to six sections, each mapped onto the corresponding
dataclass: rig, scene, init, train, loss, vote. Unknown keys and type
mismatches are reported with their full dotted path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import yaml

from .decompose import AABB, VoteConfig
from .errors import ConfigError, InvalidInputError
from .losses import LossConfig
from .rig import RigSpec
from .scene import SceneConfig
from .training import InitConfig, TrainConfig


@dataclass
class ExperimentConfig:
    rig: RigSpec = field(default_factory=lambda: RigSpec("hemisphere"))
    scene: SceneConfig = field(default_factory=SceneConfig)
    init: InitConfig = field(default_factory=lambda: InitConfig(budget=500))
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    vote: VoteConfig = field(default_factory=VoteConfig)
    num_timesteps: int = 8
    test_indices: tuple = ()
    val_indices: tuple = ()

    def __post_init__(self):
        # a single loss section drives training too
        self.train.loss = self.loss
        if self.num_timesteps < 1:
            raise InvalidInputError("num_timesteps must be at least 1")


_SECTIONS = {
    "rig": RigSpec,
    "scene": SceneConfig,
    "init": InitConfig,
    "train": TrainConfig,
    "loss": LossConfig,
    "vote": VoteConfig,
}

_TOP_SCALARS = ("num_timesteps", "test_indices", "val_indices")


def _build_section(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(data).__name__}")
    allowed = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in allowed:
            raise ConfigError(f"{path}.{key}: unknown option "
                              f"(valid: {', '.join(sorted(allowed))})")
        if isinstance(value, list):
            value = tuple(value)
        if key == "aabb" and value is not None:
            if not isinstance(value, dict) or "lo" not in value or "hi" not in value:
                raise ConfigError(f"{path}.aabb: expected mapping with lo/hi")
            value = AABB(value["lo"], value["hi"], value.get("margin", 0.0))
        if key == "loss" and isinstance(value, dict):
            value = _build_section(LossConfig, value, f"{path}.loss")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (InvalidInputError, TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from e


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"top level: expected a mapping, got {type(data).__name__}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value or {}, key)
        elif key in _TOP_SCALARS:
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        else:
            valid = sorted(list(_SECTIONS) + list(_TOP_SCALARS))
            raise ConfigError(f"{key}: unknown section (valid: {', '.join(valid)})")
    try:
        return ExperimentConfig(**kwargs)
    except InvalidInputError as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"malformed YAML in {path}: {e}") from e
    return config_from_dict(data or {})


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """JSON-serializable echo of an experiment config (for output manifests)."""
    def section(obj):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, (LossConfig,)):
                v = section(v)
            elif isinstance(v, AABB):
                v = {"lo": v.lo.tolist(), "hi": v.hi.tolist(), "margin": v.margin}
            elif isinstance(v, tuple):
                v = list(v)
            elif hasattr(v, "tolist"):
                v = v.tolist()
            out[f.name] = v
        return out
    return {
        "rig": section(cfg.rig),
        "scene": section(cfg.scene),
        "init": section(cfg.init),
        "train": section(cfg.train),
        "loss": section(cfg.loss),
        "vote": section(cfg.vote),
        "num_timesteps": cfg.num_timesteps,
        "test_indices": list(cfg.test_indices),
        "val_indices": list(cfg.val_indices),
    }
