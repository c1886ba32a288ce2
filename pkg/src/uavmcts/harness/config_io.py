"""Experiment configuration: YAML key-value files plus command-line overrides."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from ..config import ConfigError, WorldConfig

ALGORITHMS = ("mcts", "ts_mcts", "ql", "dqn", "random")
MODES = ("flat2d", "planes3d")
CHECKPOINT_GRID = (10, 50, 100, 200, 500, 1000)

WORLD_ALIASES = {
    "R": "region_size",
    "I": "num_users",
    "K": "num_hover_points",
    "layout": "hover_layout",
    "H": "altitude",
    "M": "uav_mass",
    "v": "uav_speed",
    "velocity": "uav_speed",
    "a_uav": "uav_accel",
    "g": "gravity",
    "sigma2_dbm": "noise_power_dbm",
    "rho0_db": "ref_gain_db",
    "P_h": "hover_power",
    "P_u": "upload_power",
    "B_t": "task_bits",
    "C": "cpu_cycles",
    "f_c": "cpu_freq",
    "gamma_c": "switched_cap",
    "phi": "task_std",
    "beta": "task_threshold",
    "E0": "battery_e0",
    "theta": "battery_threshold",
    "epsilon": "mobility_epsilon",
    "m": "tree_depth",
}

SPEC_ALIASES = {
    "algo": "algorithms",
    "algorithm": "algorithms",
    "episodes": "training_episodes",
    "seeds": "num_seeds",
    "seed": "base_seed",
    "c": "uct_c",
    "out": "output_dir",
}


@dataclass(frozen=True)
class LearnerParams:
    ql_lr: float = 0.1
    ql_discount: float = 0.9
    eps_start: float = 1.0
    eps_end: float = 0.05
    dqn_hidden: int = 64
    dqn_lr: float = 1e-3
    dqn_discount: float = 0.9
    dqn_replay: int = 10_000
    dqn_batch: int = 64
    dqn_sync_every: int = 200


@dataclass(frozen=True)
class ExperimentSpec:
    world: WorldConfig = field(default_factory=WorldConfig)
    algorithms: tuple[str, ...] = ("mcts",)
    training_episodes: int = 1000
    num_seeds: int = 20
    base_seed: int = 0
    uct_c: float = 1.414
    output_dir: str | None = None
    mode: str = "flat2d"
    checkpoints: tuple[int, ...] | None = None
    eval_flights: int = 1
    wall_clock: bool = False
    learners: LearnerParams = field(default_factory=LearnerParams)

    def __post_init__(self):
        if self.training_episodes < 1:
            raise ConfigError("training_episodes must be >= 1")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be >= 1")
        if self.eval_flights < 1:
            raise ConfigError("eval_flights must be >= 1")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {a!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        if (self.mode == "planes3d") != self.world.is_3d:
            raise ConfigError("mode planes3d requires hover_layout planes3d and vice versa")
        if self.checkpoints is not None and any(c < 1 for c in self.checkpoints):
            raise ConfigError("checkpoints must be >= 1")

    def checkpoint_list(self) -> list[int]:
        if self.checkpoints is not None:
            pts = sorted({c for c in self.checkpoints if c <= self.training_episodes})
        else:
            pts = [c for c in CHECKPOINT_GRID if c < self.training_episodes]
        if not pts or pts[-1] != self.training_episodes:
            pts.append(self.training_episodes)
        return pts


_WORLD_FIELDS = {f.name: f for f in dataclasses.fields(WorldConfig)}
_LEARNER_FIELDS = {f.name: f for f in dataclasses.fields(LearnerParams)}
_SPEC_FIELDS = {f.name for f in dataclasses.fields(ExperimentSpec)} - {"world", "learners"}


def _coerce(key: str, value: Any, kind: Any) -> Any:
    kind = str(kind)
    try:
        if kind == "bool":
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.lower() in ("true", "false", "yes", "no", "1", "0"):
                return value.lower() in ("true", "yes", "1")
            raise ValueError(value)
        if kind == "int":
            if isinstance(value, bool) or float(value) != int(float(value)):
                raise ValueError(value)
            return int(float(value))
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if kind == "str":
            if not isinstance(value, str):
                raise ValueError(value)
            return value
        if kind.startswith("tuple[float"):
            if not isinstance(value, (list, tuple)):
                raise ValueError(value)
            return tuple(float(v) for v in value)
        if kind.startswith("tuple[int") or kind.startswith("tuple[int, ...] | None"):
            if value is None:
                return None
            if isinstance(value, (int, str)) and not isinstance(value, bool):
                value = [value] if isinstance(value, int) else [v for v in str(value).split(",") if v]
            return tuple(int(v) for v in value)
        if kind.startswith("tuple[str"):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            return tuple(str(v) for v in value)
        if kind == "str | None":
            return None if value is None else str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"malformed value for {key!r}: {value!r}") from None
    return value


def _parse_scalar(text: str) -> Any:
    return yaml.safe_load(text) if text != "" else None


def parse_overrides(pairs: list[str]) -> dict[str, Any]:
    """``["K=27", "layout=planes3d"]`` -> ``{"K": 27, "layout": "planes3d"}``."""
    out = {}
    for p in pairs:
        if "=" not in p:
            raise ConfigError(f"override must be key=value, got {p!r}")
        k, v = p.split("=", 1)
        out[k.strip()] = _parse_scalar(v.strip())
    return out


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentSpec:
    """Build an :class:`ExperimentSpec` from an optional YAML file and overrides.

    Keys may use the world field names or their short aliases (``K``,
    ``theta``, ``phi`` ...). Unknown keys are rejected.
    """
    raw: dict[str, Any] = {}
    if path is not None:
        text = Path(path).read_text()
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{path}: expected a key-value mapping")
        raw.update(loaded)
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    world_kw: dict[str, Any] = {}
    learner_kw: dict[str, Any] = {}
    spec_kw: dict[str, Any] = {}
    mode = None
    for key, value in raw.items():
        name = WORLD_ALIASES.get(key, key)
        if name in _WORLD_FIELDS:
            world_kw[name] = _coerce(key, value, _WORLD_FIELDS[name].type)
            continue
        name = SPEC_ALIASES.get(key, key)
        if name == "mode":
            mode = _normalise_mode(value)
        elif name in _SPEC_FIELDS:
            ftype = {f.name: f.type for f in dataclasses.fields(ExperimentSpec)}[name]
            spec_kw[name] = _coerce(key, value, ftype)
        elif name in _LEARNER_FIELDS:
            learner_kw[name] = _coerce(key, value, _LEARNER_FIELDS[name].type)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")

    if mode == "planes3d":
        world_kw.setdefault("hover_layout", "planes3d")
        world_kw.setdefault("num_hover_points", 9 * len(world_kw.get("plane_heights", (25, 50, 75))))
    elif mode is None:
        mode = "planes3d" if world_kw.get("hover_layout") == "planes3d" else "flat2d"
    world = WorldConfig(**world_kw)
    return ExperimentSpec(world=world, mode=mode, learners=LearnerParams(**learner_kw), **spec_kw)


def _normalise_mode(value: Any) -> str:
    v = str(value).lower()
    if v in ("2d", "flat2d"):
        return "flat2d"
    if v in ("3d", "planes3d"):
        return "planes3d"
    raise ConfigError(f"malformed value for 'mode': {value!r}")
