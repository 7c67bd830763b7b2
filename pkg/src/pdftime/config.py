"""Training configuration and its JSON form."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["TrainConfig", "ConfigError", "load_config", "RUN_KEYS", "FORMAT_VERSION"]

FORMAT_VERSION = 1

# Keys a config file may carry besides the TrainConfig fields.
RUN_KEYS = ("data", "test_data", "data_dir", "out", "format_version")


class ConfigError(ValueError):
    """Unknown key or invalid value in a configuration."""


@dataclass
class TrainConfig:
    # Fixed by the reference configuration.
    encoder_layers: int = 2
    batch_size: int = 16
    dropout: float = 0.2
    d_model: int = 128
    lr: float = 0.001
    max_epochs: int = 150
    patience: int = 20
    seed: int = 2025
    # Embedding.
    inception_layers: int = 2
    kernel_sizes: list[int] = field(default_factory=lambda: [3, 7, 15])
    frequency_mask: bool = True
    # Encoder.
    heads: int = 4
    d_ff: int | None = None
    pooling: str = "mean"
    positional_encoding: bool = True
    # Head.
    head: str = "prototype"
    prototype_counts: list[int] = field(default_factory=lambda: [2, 3])
    radius: float = 1.0
    temperature: float = 0.1
    level_weights: list[float] | None = None
    diversity_weight: float = 0.01
    # Momentum schedule.
    warmup: int = 3
    active: int = 10
    gamma_a: float = 0.99
    gamma_b: float = 0.999
    tau: float = 30.0
    schedule_unit: str = "epoch"
    ema: bool = True
    # Protocol.
    validation_fraction: float = 0.2
    dtype: str = "float32"
    eval_batch_size: int = 64

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        for name in ("encoder_layers", "batch_size", "d_model", "max_epochs", "heads", "eval_batch_size"):
            need(isinstance(getattr(self, name), int) and getattr(self, name) >= 1, f"{name} must be a positive integer")
        need(isinstance(self.inception_layers, int) and self.inception_layers >= 0, "inception_layers must be >= 0")
        need(isinstance(self.patience, int) and self.patience >= 1, "patience must be a positive integer")
        need(isinstance(self.seed, int), "seed must be an integer")
        need(0.0 <= self.dropout < 1.0, "dropout must be in [0, 1)")
        need(self.lr > 0, "lr must be positive")
        need(self.d_model % 2 == 0, "d_model must be even")
        need(self.d_model % self.heads == 0, "heads must divide d_model")
        need(self.d_ff is None or (isinstance(self.d_ff, int) and self.d_ff >= 1), "d_ff must be null or a positive integer")
        need(self.pooling in ("mean", "last", "max"), "pooling must be mean, last or max")
        need(self.head in ("prototype", "linear"), "head must be prototype or linear")
        need(len(self.kernel_sizes) >= 1 and all(isinstance(k, int) and k >= 1 for k in self.kernel_sizes), "kernel_sizes must be positive integers")
        need(len(self.prototype_counts) >= 1 and all(isinstance(k, int) and 1 <= k <= self.d_model for k in self.prototype_counts),
             "prototype_counts must be integers in [1, d_model]")
        need(self.radius > 0, "radius must be positive")
        need(self.temperature > 0, "temperature must be positive")
        if self.level_weights is not None:
            need(len(self.level_weights) == len(self.prototype_counts), "level_weights needs one weight per prototype level")
            need(all(w > 0 for w in self.level_weights), "level_weights must be positive")
        need(self.diversity_weight >= 0, "diversity_weight must be >= 0")
        need(0 < self.gamma_a <= self.gamma_b <= 1, "need 0 < gamma_a <= gamma_b <= 1")
        need(self.warmup >= 0 and self.active >= 0 and self.tau > 0, "invalid schedule lengths")
        need(self.schedule_unit in ("epoch", "iteration"), "schedule_unit must be epoch or iteration")
        need(0.0 <= self.validation_fraction < 1.0, "validation_fraction must be in [0, 1)")
        need(self.dtype in ("float32", "float64"), "dtype must be float32 or float64")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def load_config(path) -> tuple[TrainConfig, dict]:
    """Read a JSON config file; returns the training config and the run keys."""
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    run = {k: raw.pop(k) for k in RUN_KEYS if k in raw}
    version = run.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported format_version {version}")
    return TrainConfig.from_dict(raw), run
