"""Time-series datasets: ``.ts`` / CSV ingestion, preprocessing and synthetic data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TimeSeriesDataset",
    "SyntheticSpec",
    "ParseError",
    "parse_ts",
    "load_ts",
    "parse_csv",
    "load_dataset",
    "format_ts",
    "resample_linear",
    "znormalize",
    "stratified_split",
    "make_synthetic",
    "synthetic_split",
]


class ParseError(ValueError):
    """Malformed dataset text. ``line`` is 1-based (0 when not line specific)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class TimeSeriesDataset:
    """Labeled fixed-length multivariate series.

    ``X`` has shape (n, V, L); ``y`` holds class indices into ``class_names``.
    """

    X: np.ndarray
    y: np.ndarray
    class_names: list[str]
    origin: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.class_names = [str(c) for c in self.class_names]
        if self.X.ndim != 3:
            raise ValueError(f"samples must be (n, V, L), got {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"{len(self.y)} labels for {self.X.shape[0]} samples")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= len(self.class_names)):
            raise ValueError("label index outside [0, C)")
        if np.isnan(self.X).any():
            raise ValueError("dataset contains NaN")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def V(self) -> int:
        return self.X.shape[1]

    @property
    def L(self) -> int:
        return self.X.shape[2]

    @property
    def C(self) -> int:
        return len(self.class_names)

    def __len__(self) -> int:
        return self.n

    def subset(self, idx, origin: str | None = None) -> "TimeSeriesDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return TimeSeriesDataset(self.X[idx], self.y[idx], list(self.class_names), origin or self.origin)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.y, minlength=self.C)


# -- preprocessing ------------------------------------------------------------


def resample_linear(series: np.ndarray, length: int) -> np.ndarray:
    """Linearly interpolate each channel of a (V, L0) array onto ``length`` points.

    The new grid spans the original index range, so endpoints are kept exactly.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.ndim == 1:
        return resample_linear(series[None, :], length)[0]
    L0 = series.shape[-1]
    if L0 < 2:
        raise ValueError(f"resample_linear: need at least 2 points, got {L0}")
    if length < 2:
        raise ValueError(f"resample_linear: target length must be >= 2, got {length}")
    if L0 == length:
        return series.copy()
    grid = np.linspace(0.0, L0 - 1, length)
    src = np.arange(L0, dtype=np.float64)
    out = np.stack([np.interp(grid, src, ch) for ch in series])
    out[:, 0] = series[:, 0]
    out[:, -1] = series[:, -1]
    return out


def znormalize(sample: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Per-channel z-normalization of a (..., V, L) array (population std).

    Channels whose std falls below ``eps`` are only centered.
    """
    x = np.asarray(sample, dtype=np.float64)
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    return (x - mu) / np.where(sd < eps, 1.0, sd)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(
    dataset: TimeSeriesDataset, fraction: float, seed: int
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Hold out ``round(fraction * count)`` (at least 1) samples of every class.

    Both parts keep the original sample order.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    hold = []
    for c in range(dataset.C):
        idx = np.flatnonzero(dataset.y == c)
        if len(idx) == 0:
            continue
        if len(idx) < 2:
            raise ValueError(
                f"class {dataset.class_names[c]!r} has a single sample; "
                "disable the validation split (validation_fraction=0)"
            )
        h = min(max(1, _round_half_up(fraction * len(idx))), len(idx) - 1)
        hold.extend(rng.permutation(idx)[:h].tolist())
    hold_idx = np.sort(np.asarray(hold, dtype=np.int64))
    keep = np.setdiff1d(np.arange(dataset.n), hold_idx)
    return dataset.subset(keep), dataset.subset(hold_idx)


# -- .ts parsing --------------------------------------------------------------

_MISSING = {"?", "nan", "NaN", "NAN"}


def _parse_values(text: str, lineno: int) -> np.ndarray:
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok in _MISSING:
            vals.append(np.nan)
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise ParseError(f"non-numeric value {tok!r}", lineno) from None
    return np.asarray(vals)


def _fill_missing(ch: np.ndarray, lineno: int) -> np.ndarray:
    bad = np.isnan(ch)
    if not bad.any():
        return ch
    if bad.all():
        raise ParseError("channel has no observed values", lineno)
    idx = np.arange(len(ch))
    # np.interp holds the end values constant outside the observed range.
    return np.interp(idx, idx[~bad], ch[~bad])


def _parse_bool(value: str, lineno: int) -> bool:
    v = value.strip().lower()
    if v in ("true", "false"):
        return v == "true"
    raise ParseError(f"expected true/false, got {value!r}", lineno)


def parse_ts(text: str, length: int | None = None, origin: str = "") -> TimeSeriesDataset:
    """Parse a ``.ts`` archive file.

    Series are resampled to ``length`` when given, otherwise to the longest
    series in the file. Missing values (``?``) are filled by linear
    interpolation, with edge gaps copying the nearest observation.
    """
    header: dict[str, str] = {}
    labels_decl: list[str] | None = None
    dims: int | None = None
    records: list[tuple[int, list[np.ndarray], str]] = []
    in_data = False
    lines = text.splitlines()
    eof = max(len(lines), 1)

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("%") or line.startswith("#"):
            continue
        if not in_data:
            if not line.startswith("@"):
                raise ParseError("data record before @data", lineno)
            key, _, value = line[1:].partition(" ")
            key = key.lower()
            value = value.strip()
            if key == "data":
                in_data = True
            elif key == "classlabel":
                parts = value.split()
                if not parts or not _parse_bool(parts[0], lineno):
                    raise ParseError("only classification files (@classLabel true ...) are supported", lineno)
                labels_decl = parts[1:]
                if not labels_decl:
                    raise ParseError("@classLabel true declares no labels", lineno)
                if len(set(labels_decl)) != len(labels_decl):
                    raise ParseError("duplicate class label in @classLabel", lineno)
            elif key in ("dimensions", "dimension"):
                try:
                    dims = int(value)
                except ValueError:
                    raise ParseError(f"bad dimension count {value!r}", lineno) from None
                if dims < 1:
                    raise ParseError("dimension count must be positive", lineno)
            elif key in ("univariate", "equallength", "timestamps", "missing"):
                header[key] = str(_parse_bool(value, lineno))
            elif key == "serieslength":
                header[key] = value
            elif key == "targetlabel":
                raise ParseError("regression files (@targetLabel) are not supported", lineno)
            else:
                header[key] = value
            continue

        if labels_decl is None:
            raise ParseError("@classLabel must be declared before @data", lineno)
        if dims is None:
            dims = 1 if header.get("univariate", "True") == "True" else None
            if dims is None:
                raise ParseError("multivariate file without @dimensions", lineno)
        fields = line.split(":")
        label = fields[-1].strip()
        chans = fields[:-1]
        if len(chans) != dims:
            raise ParseError(f"record has {len(chans)} dimensions, expected {dims}", lineno)
        if label not in labels_decl:
            raise ParseError(f"undeclared class label {label!r}", lineno)
        series = [_fill_missing(_parse_values(c, lineno), lineno) for c in chans]
        records.append((lineno, series, label))

    if not in_data:
        raise ParseError("end of file reached without an @data section", eof)
    if not records:
        raise ParseError("no records after @data", eof)

    L = length if length is not None else max(len(ch) for _, s, _ in records for ch in s)
    X = np.empty((len(records), dims, L))
    for i, (lineno, series, _) in enumerate(records):
        for v, ch in enumerate(series):
            if len(ch) == L:
                X[i, v] = ch
            elif len(ch) < 2:
                raise ParseError(f"series of length {len(ch)} cannot be resampled", lineno)
            else:
                X[i, v] = resample_linear(ch, L)
    y = np.array([labels_decl.index(lab) for _, _, lab in records])
    name = header.get("problemname", "")
    return TimeSeriesDataset(X, y, labels_decl, origin or name)


def load_ts(path, length: int | None = None) -> TimeSeriesDataset:
    path = Path(path)
    return parse_ts(path.read_text(), length=length, origin=str(path))


def _label_order(labels: Sequence[str]) -> list[str]:
    uniq = sorted(set(labels))
    try:
        return sorted(uniq, key=float)
    except ValueError:
        return uniq


def parse_csv(
    text: str, V: int, L: int, class_names: Sequence[str] | None = None, origin: str = ""
) -> TimeSeriesDataset:
    """Plain CSV: one row per sample, the label followed by V*L values row-major."""
    labels, rows = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 1 + V * L:
            raise ParseError(f"expected {1 + V * L} fields, got {len(parts)}", lineno)
        labels.append(parts[0].strip())
        vals = _parse_values(",".join(parts[1:]), lineno).reshape(V, L)
        rows.append(np.stack([_fill_missing(ch, lineno) for ch in vals]))
    if not rows:
        raise ParseError("no records")
    names = list(class_names) if class_names is not None else _label_order(labels)
    for lineno, lab in enumerate(labels, start=1):
        if lab not in names:
            raise ParseError(f"undeclared class label {lab!r}", lineno)
    y = np.array([names.index(lab) for lab in labels])
    return TimeSeriesDataset(np.stack(rows), y, names, origin)


def load_dataset(
    path,
    *,
    length: int | None = None,
    V: int | None = None,
    L: int | None = None,
    class_names: Sequence[str] | None = None,
    normalize: bool = True,
) -> TimeSeriesDataset:
    """Read a ``.ts`` or ``.csv`` file and z-normalize every sample."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if V is None or L is None:
            raise ValueError("CSV input needs V and L")
        ds = parse_csv(path.read_text(), V, L, class_names, origin=str(path))
    else:
        ds = load_ts(path, length=length)
        if class_names is not None and list(class_names) != ds.class_names:
            raise ValueError(f"{path}: class labels {ds.class_names} differ from {list(class_names)}")
    if normalize:
        ds.X = znormalize(ds.X)
    return ds


def format_ts(dataset: TimeSeriesDataset, name: str = "dataset") -> str:
    """Serialize to ``.ts`` text; values use ``repr`` so parsing round-trips exactly."""
    lines = [
        f"@problemName {name}",
        "@timeStamps false",
        "@missing false",
        f"@univariate {'true' if dataset.V == 1 else 'false'}",
        f"@dimensions {dataset.V}",
        "@equalLength true",
        f"@seriesLength {dataset.L}",
        "@classLabel true " + " ".join(dataset.class_names),
        "@data",
    ]
    for x, y in zip(dataset.X, dataset.y):
        chans = [",".join(repr(float(v)) for v in ch) for ch in x]
        lines.append(":".join(chans) + ":" + dataset.class_names[y])
    return "\n".join(lines) + "\n"


# -- synthetic data -----------------------------------------------------------


@dataclass
class SyntheticSpec:
    """Seeded multi-class sinusoid dataset; class ``c`` oscillates at ``base_frequencies[c]``."""

    n_classes: int = 3
    n_train: int = 300
    n_test: int = 300
    V: int = 1
    L: int = 128
    base_frequencies: list[float] = field(default_factory=lambda: [2.0, 5.0, 9.0])
    noise_std: float = 0.3
    seed: int = 2025

    def __post_init__(self):
        if min(self.n_classes, self.n_train, self.n_test, self.V, self.L) < 1:
            raise ValueError("counts and sizes must be positive")
        if len(self.base_frequencies) != self.n_classes:
            raise ValueError("need one base frequency per class")
        if len(set(self.base_frequencies)) != len(self.base_frequencies):
            raise ValueError("base frequencies must be pairwise distinct")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")


def make_synthetic(spec: SyntheticSpec) -> TimeSeriesDataset:
    """All ``n_train + n_test`` samples; the first ``n_train`` form the training part.

    Labels cycle 0, 1, ..., C-1 within each part so both parts are balanced.
    Each channel gets its own uniform random phase.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.n_train + spec.n_test
    y = np.concatenate([np.arange(spec.n_train), np.arange(spec.n_test)]) % spec.n_classes
    freqs = np.asarray(spec.base_frequencies, dtype=np.float64)[y]
    t = np.arange(spec.L, dtype=np.float64)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(n, spec.V))
    X = np.sin(2.0 * np.pi * freqs[:, None, None] * t / spec.L + phase[:, :, None])
    if spec.noise_std > 0:
        X = X + rng.normal(0.0, spec.noise_std, size=X.shape)
    names = [f"c{i}" for i in range(spec.n_classes)]
    return TimeSeriesDataset(X, y, names, origin=f"synthetic(seed={spec.seed})")


def synthetic_split(spec: SyntheticSpec) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    ds = make_synthetic(spec)
    n = spec.n_train
    return ds.subset(np.arange(n)), ds.subset(np.arange(n, ds.n))
