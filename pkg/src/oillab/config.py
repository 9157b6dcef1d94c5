"""Run configuration: flat key-value config files, CLI overrides, artifact
metadata.

Precedence is flags > file > defaults. Every artifact a command writes embeds
the config hash, the seed, and the tool version so reruns are checkable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__


class ConfigError(ValueError):
    """Bad or missing configuration input."""


@dataclass
class RunConfig:
    vehicle: str = "car"
    trainer: str = "oil"
    teachers: list[int] | None = None  # 1-based subset; None = all five
    train_tracks: str = ""
    test_tracks: str = ""
    seed: int = 1
    out_dir: str = "out"
    # oil
    rounds: int = 400
    n_steps: int = 300
    max_episodes: int = 50
    act_steps: int = 60
    epsilon_mode: str = "multi"
    mc_rollouts: int = 1
    step_budget: int | None = None
    # imitation baselines
    iterations: int = 4
    episodes_per_iter: int = 20
    train_steps_per_iter: int = 4000
    # ddpg
    ddpg_steps: int = 30000
    # eval
    laps: int | None = None
    checkpoint_timeout: float | None = None

    def resolved(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return hashlib.sha256(
            json.dumps(self.resolved(), sort_keys=True).encode()
        ).hexdigest()[:16]

    def artifact_meta(self) -> dict:
        return {"config_hash": self.config_hash(), "seed": self.seed, "version": __version__}


_LIST_KEYS = {"teachers"}
_INT_KEYS = {
    "seed",
    "rounds",
    "n_steps",
    "max_episodes",
    "act_steps",
    "mc_rollouts",
    "step_budget",
    "iterations",
    "episodes_per_iter",
    "train_steps_per_iter",
    "ddpg_steps",
    "laps",
}
_FLOAT_KEYS = {"checkpoint_timeout"}


def parse_config_file(path: str | Path) -> dict:
    """Parse `key = value` lines; '#' starts a comment."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = _coerce(key, value)
    return values


def _coerce(key: str, value: str):
    if key in _LIST_KEYS:
        return [int(v) for v in value.split(",") if v.strip()]
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    return value


def build_config(file_path: str | None, overrides: dict) -> RunConfig:
    """Merge defaults, config file, and CLI overrides (highest precedence)."""
    cfg = RunConfig()
    merged: dict = {}
    if file_path:
        merged.update(parse_config_file(file_path))
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for key, value in merged.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg


def load_track_dir(directory: str | Path) -> list[Path]:
    """Sorted track files of a directory; empty or missing is an error."""
    d = Path(directory)
    if not d.is_dir():
        raise ConfigError(f"track directory {directory!r} does not exist")
    files = sorted(d.glob("*.json"))
    if not files:
        raise ConfigError(f"track directory {directory!r} contains no track files")
    return files
