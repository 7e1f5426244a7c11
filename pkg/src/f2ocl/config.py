"""Run configuration: one JSON document with optional sections.

    {
      "seed": 0,
      "encoder": {...EncoderConfig fields...},
      "train":   {...TrainConfig fields...},
      "stream":  {...StreamConfig fields...},
      "eval":    {"k": 1, "checkpoint": "group"},
      "output_dir": "runs/default"
    }

Unknown keys anywhere are rejected. The top-level seed (overridden by the
``F2OCL_SEED`` environment variable) is copied into every section.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .datagen import StreamConfig
from .encoder import EncoderConfig
from .errors import ConfigurationError, ParseError
from .trainer import TrainConfig

SEED_ENV = "F2OCL_SEED"


@dataclass(frozen=True)
class EvalOptions:
    k: int = 1
    checkpoint: str = "group"  # or "batch" for the per-batch group-1 accuracy curve

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigurationError("eval.k must be at least 1")
        if self.checkpoint not in ("group", "batch"):
            raise ConfigurationError("eval.checkpoint must be 'group' or 'batch'")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    eval: EvalOptions = field(default_factory=EvalOptions)
    output_dir: str = "runs/default"

    def validate(self) -> None:
        self.encoder.validate()
        self.train.validate()
        self.stream.validate()
        self.eval.validate()
        if self.encoder.input_dim != self.stream.input_dim:
            raise ConfigurationError("encoder.input_dim and stream.input_dim differ")

    def echo(self) -> dict:
        """Provenance copy for metrics files; the output directory is left out."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        return d


_SECTIONS = {"encoder": EncoderConfig, "train": TrainConfig, "stream": StreamConfig, "eval": EvalOptions}


def _coerce(cls, section: str, raw) -> object:
    if not isinstance(raw, dict):
        raise ConfigurationError(f"section {section!r} must be an object")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(raw) - set(names)
    if unknown:
        raise ConfigurationError(f"unknown field(s) in {section!r}: {sorted(unknown)}")
    out = {}
    for k, v in raw.items():
        default = getattr(cls(), k)
        if isinstance(default, bool) or not isinstance(default, (int, float)):
            out[k] = v
            continue
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigurationError(f"{section}.{k}: expected a number, got {v!r}")
        if isinstance(default, int):
            if v != int(v):
                raise ConfigurationError(f"{section}.{k}: expected an integer, got {v!r}")
            v = int(v)
        out[k] = type(default)(v)
    return cls(**out)


def config_from_dict(raw: dict, env=None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("run config must be a JSON object")
    unknown = set(raw) - {"seed", "output_dir", *_SECTIONS}
    if unknown:
        raise ConfigurationError(f"unknown top-level field(s): {sorted(unknown)}")
    env = os.environ if env is None else env
    seed = raw.get("seed", 0)
    if env.get(SEED_ENV):
        try:
            seed = int(env[SEED_ENV])
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer") from None
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    parts = {name: _coerce(cls, name, raw.get(name, {})) for name, cls in _SECTIONS.items()}
    for name in ("encoder", "train", "stream"):
        parts[name] = replace(parts[name], seed=seed)
    cfg = RunConfig(seed=seed, output_dir=str(raw.get("output_dir", "runs/default")), **parts)
    cfg.validate()
    return cfg


def load_config(path=None, overrides=(), env=None) -> RunConfig:
    """Read a run config and apply ``section.field=value`` overrides."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        target = raw
        *head, last = key.split(".")
        for part in head:
            target = target.setdefault(part, {})
        target[last] = parsed
    return config_from_dict(raw, env)
