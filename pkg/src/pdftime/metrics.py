"""Benchmark aggregation: top-1 counts, average accuracy, average rank."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = ["Aggregates", "BenchmarkReport", "aggregate", "average_ranks", "top1_counts"]


def _matrix(acc) -> np.ndarray:
    rows = [list(r) for r in acc]
    if not rows or len({len(r) for r in rows}) != 1 or len(rows[0]) == 0:
        raise ValueError("aggregate: accuracy matrix must be rectangular and non-empty")
    m = np.asarray(rows, dtype=np.float64)
    if np.isnan(m).any() or (m < 0).any() or (m > 1).any():
        raise ValueError("aggregate: accuracies must lie in [0, 1]")
    return m


def top1_counts(acc) -> np.ndarray:
    """Per method, the number of datasets where it attains the maximum; ties all count.

    ``acc`` is methods x datasets.
    """
    m = _matrix(acc)
    return (m == m.max(axis=0, keepdims=True)).sum(axis=1)


def average_ranks(acc) -> np.ndarray:
    """Mean over datasets of each method's rank (1 = best, ties averaged)."""
    m = _matrix(acc)
    ranks = rankdata(-m, method="average", axis=0)
    return ranks.mean(axis=1)


@dataclass
class Aggregates:
    methods: list[str]
    top1: list[int]
    average_accuracy: list[float]
    average_rank: list[float]

    def for_method(self, name: str) -> dict:
        i = self.methods.index(name)
        return {"top1": self.top1[i], "average_accuracy": self.average_accuracy[i], "average_rank": self.average_rank[i]}

    def to_dict(self) -> dict:
        return {name: self.for_method(name) for name in self.methods}


def aggregate(acc, methods: Sequence[str] | None = None) -> Aggregates:
    """Aggregate a methods x datasets accuracy matrix."""
    m = _matrix(acc)
    names = list(methods) if methods is not None else [f"method{i}" for i in range(m.shape[0])]
    if len(names) != m.shape[0]:
        raise ValueError(f"aggregate: {len(names)} method names for {m.shape[0]} rows")
    return Aggregates(
        names,
        [int(v) for v in top1_counts(m)],
        [float(v) for v in m.mean(axis=1)],
        [float(v) for v in average_ranks(m)],
    )


@dataclass
class BenchmarkReport:
    """Per-dataset accuracies per method, with aggregates and optional training curves."""

    accuracies: dict[str, dict[str, float]]  # method -> dataset -> accuracy
    curves: dict[str, list[dict]] = field(default_factory=dict)  # dataset -> history rows

    @property
    def methods(self) -> list[str]:
        return sorted(self.accuracies)

    @property
    def datasets(self) -> list[str]:
        names = {d for per in self.accuracies.values() for d in per}
        return sorted(names)

    def matrix(self) -> np.ndarray:
        ds = self.datasets
        for meth, per in self.accuracies.items():
            missing = [d for d in ds if d not in per]
            if missing:
                raise ValueError(f"method {meth} has no result for {', '.join(missing)}")
        return np.array([[self.accuracies[m][d] for d in ds] for m in self.methods])

    def aggregates(self) -> Aggregates:
        return aggregate(self.matrix(), self.methods)

    @classmethod
    def from_rows(cls, rows: Mapping[str, Mapping[str, float]]) -> "BenchmarkReport":
        """Build from a dataset -> method -> accuracy mapping (table layout)."""
        acc: dict[str, dict[str, float]] = {}
        for ds, per in rows.items():
            for meth, v in per.items():
                acc.setdefault(meth, {})[ds] = float(v)
        return cls(acc)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dataset", "method", "accuracy"])
        for d in self.datasets:
            for m in self.methods:
                if d in self.accuracies[m]:
                    w.writerow([d, m, repr(self.accuracies[m][d])])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "format_version": 1,
            "accuracies": {m: dict(sorted(self.accuracies[m].items())) for m in self.methods},
            "aggregates": self.aggregates().to_dict(),
            "curves": {k: self.curves[k] for k in sorted(self.curves)},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
