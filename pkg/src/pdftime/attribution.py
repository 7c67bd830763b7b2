"""Prototype attribution: which training samples sit closest to each prototype."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .data import TimeSeriesDataset
from .model import PDFTime

__all__ = ["AttributionRecord", "inspect", "records_to_json"]


@dataclass
class AttributionRecord:
    level: int
    class_index: int
    class_name: str
    index: int
    prototype: list[float]
    neighbors: list[int]  # training-set row indices, most similar first
    neighbor_labels: list[int]
    scores: list[float]  # cosine similarities, descending

    @property
    def prototype_id(self) -> tuple[int, int, int]:
        return self.level, self.class_index, self.index

    def nearest_series(self, dataset: TimeSeriesDataset) -> np.ndarray:
        """Raw (V, L) series of the most similar training sample."""
        return dataset.X[self.neighbors[0]]


def _unit(a: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    return a / np.where(n == 0, 1.0, n)


def inspect(model: PDFTime, dataset: TimeSeriesDataset, m: int = 5, levels=None) -> list[AttributionRecord]:
    """One record per prototype, listing its ``m`` nearest samples of ``dataset``.

    Similarity is cosine similarity between the prototype and the sample's
    evaluation-mode embedding. Ties are broken by sample index.
    """
    if model.bank is None:
        raise ValueError("inspect: model has a linear head and no prototypes")
    if dataset.n == 0:
        raise ValueError("inspect: empty dataset")
    m = min(int(m), dataset.n)
    X = np.ascontiguousarray(dataset.X, dtype=model.dtype)
    Z = _unit(model.embeddings(X, model.config.eval_batch_size))
    bank = model.bank
    chosen = range(len(bank.levels)) if levels is None else [lv % len(bank.levels) for lv in levels]
    names = dataset.class_names
    records = []
    for lv in chosen:
        P = bank.levels[lv]
        for c in range(P.shape[0]):
            for k in range(P.shape[1]):
                # Row-wise sums (not a matrix-vector product) so equal embeddings score equally.
                sims = np.clip((Z * _unit(P[c, k])).sum(axis=1), -1.0, 1.0)
                order = np.lexsort((np.arange(len(sims)), -sims))[:m]
                records.append(
                    AttributionRecord(
                        level=lv,
                        class_index=c,
                        class_name=names[c] if c < len(names) else str(c),
                        index=k,
                        prototype=[float(v) for v in P[c, k]],
                        neighbors=[int(i) for i in order],
                        neighbor_labels=[int(dataset.y[i]) for i in order],
                        scores=[float(sims[i]) for i in order],
                    )
                )
    return records


def records_to_json(records: list[AttributionRecord]) -> str:
    doc = {"format_version": 1, "prototypes": [asdict(r) for r in records]}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
