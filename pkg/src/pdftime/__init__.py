"""Prototype-guided time-series classification on a small numpy autodiff engine."""

from .attribution import AttributionRecord, inspect
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ConfigError, TrainConfig, load_config
from .data import (
    ParseError,
    SyntheticSpec,
    TimeSeriesDataset,
    load_dataset,
    load_ts,
    make_synthetic,
    parse_csv,
    parse_ts,
    stratified_split,
    synthetic_split,
    znormalize,
)
from .gradcheck import finite_diff_check
from .metrics import BenchmarkReport, aggregate
from .model import PDFTime
from .prototypes import GammaSchedule, PrototypeBank, ema_update, gamma_schedule, init_prototypes
from .tensor import NumericError, ShapeError, Tensor, backward, no_grad
from .training import EarlyStopping, History, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "AttributionRecord",
    "BenchmarkReport",
    "ConfigError",
    "EarlyStopping",
    "GammaSchedule",
    "History",
    "NumericError",
    "PDFTime",
    "ParseError",
    "PrototypeBank",
    "ShapeError",
    "SyntheticSpec",
    "Tensor",
    "TimeSeriesDataset",
    "TrainConfig",
    "aggregate",
    "backward",
    "ema_update",
    "evaluate",
    "finite_diff_check",
    "gamma_schedule",
    "init_prototypes",
    "inspect",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "load_ts",
    "make_synthetic",
    "no_grad",
    "parse_csv",
    "parse_ts",
    "save_checkpoint",
    "stratified_split",
    "synthetic_split",
    "train",
    "znormalize",
]
