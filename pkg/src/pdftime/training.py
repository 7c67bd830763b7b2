"""Training loop with EMA prototype updates and early stopping; evaluation."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .config import TrainConfig
from .data import TimeSeriesDataset, stratified_split
from .model import PDFTime
from .nn import Adam
from .tensor import NumericError, backward, no_grad

__all__ = ["EpochRecord", "History", "EarlyStopping", "TrainResult", "train", "evaluate", "evaluate_loss"]

log = logging.getLogger(__name__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    val_loss: float
    gamma: float
    improved: bool


@dataclass
class History:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, rec: EpochRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = list(EpochRecord.__dataclass_fields__)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for r in self.records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in asdict(r).values()])
        return buf.getvalue()


class EarlyStopping:
    """Track the best validation accuracy; ties go to the lower validation loss.

    ``should_stop`` turns true once ``patience`` consecutive epochs bring no
    improvement.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_accuracy = -np.inf
        self.best_loss = np.inf
        self.best_epoch = -1
        self.wait = 0

    def update(self, epoch: int, accuracy: float, loss: float) -> bool:
        better = accuracy > self.best_accuracy or (accuracy == self.best_accuracy and loss < self.best_loss)
        if better:
            self.best_accuracy, self.best_loss, self.best_epoch = accuracy, loss, epoch
            self.wait = 0
        else:
            self.wait += 1
        return better

    @property
    def should_stop(self) -> bool:
        return self.wait >= self.patience


@dataclass
class TrainResult:
    model: PDFTime
    history: History
    best_epoch: int
    stopped_epoch: int
    train_set: TimeSeriesDataset
    val_set: TimeSeriesDataset


def _as_input(model: PDFTime, X: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(X, dtype=model.dtype)


def evaluate(model: PDFTime, dataset: TimeSeriesDataset) -> float:
    """Fraction of correctly classified samples, dropout disabled."""
    if dataset.n == 0:
        raise ValueError("evaluate: empty dataset")
    pred = model.predict(_as_input(model, dataset.X), model.config.eval_batch_size)
    return float(np.mean(pred == dataset.y))


def evaluate_loss(model: PDFTime, dataset: TimeSeriesDataset) -> tuple[float, float]:
    """(accuracy, mean training objective) in evaluation mode."""
    if dataset.n == 0:
        raise ValueError("evaluate: empty dataset")
    was_training = model.training
    model.eval()
    X = _as_input(model, dataset.X)
    bs = model.config.eval_batch_size
    correct, total = 0, 0.0
    try:
        with no_grad():
            for i in range(0, dataset.n, bs):
                xb, yb = X[i : i + bs], dataset.y[i : i + bs]
                out = model(xb)
                total += float(model.loss(out, yb).item()) * len(yb)
                top = out.scores[-1].data
                correct += int(np.sum(top.argmax(axis=1) == yb))
    finally:
        model.train(was_training)
    return correct / dataset.n, total / dataset.n


def _snapshot(model: PDFTime):
    return model.state_dict(), model.bank.copy() if model.bank is not None else None


def _restore(model: PDFTime, snap) -> None:
    state, bank = snap
    model.load_state_dict(state)
    if bank is not None:
        model.bank = bank.copy()


def train(
    config: TrainConfig,
    train_set: TimeSeriesDataset,
    val_set: TimeSeriesDataset | None = None,
    *,
    on_epoch: Callable[[EpochRecord], None] | None = None,
) -> TrainResult:
    """Fit a model; the returned model holds the best-validation checkpoint.

    Without ``val_set``, a stratified ``validation_fraction`` of ``train_set``
    is held out (or, with fraction 0, the training set itself is monitored).
    """
    if val_set is None:
        if config.validation_fraction > 0:
            train_set, val_set = stratified_split(train_set, config.validation_fraction, config.seed)
        else:
            val_set = train_set
    if (train_set.V, train_set.L, train_set.C) != (val_set.V, val_set.L, val_set.C):
        raise ValueError("train and validation sets differ in (V, L, C)")

    dtype = np.dtype(config.dtype)
    model = PDFTime(train_set.V, train_set.L, train_set.C, config, dtype=dtype)
    opt = Adam(model.parameters(), lr=config.lr)
    rng = np.random.default_rng([config.seed, 1])
    X = _as_input(model, train_set.X)
    y = train_set.y
    bs = config.batch_size
    use_ema = config.ema and model.bank is not None

    history = History()
    stopper = EarlyStopping(config.patience)
    best = _snapshot(model)
    iteration = 0
    epoch = 0
    for epoch in range(config.max_epochs):
        model.train()
        perm = rng.permutation(train_set.n)
        running, seen = 0.0, 0
        for b, start in enumerate(range(0, train_set.n, bs)):
            idx = perm[start : start + bs]
            xb, yb = X[idx], y[idx]
            try:
                opt.zero_grad()
                out = model(xb)
                loss = model.loss(out, yb)
                backward(loss)
            except NumericError as exc:
                raise NumericError("train", f"epoch {epoch}, batch {b}: {exc}") from exc
            opt.step()
            if use_ema:
                t = epoch if config.schedule_unit == "epoch" else iteration
                model.update_prototypes(xb, yb, t)
            running += float(loss.item()) * len(idx)
            seen += len(idx)
            iteration += 1
        val_acc, val_loss = evaluate_loss(model, val_set)
        t_now = epoch if config.schedule_unit == "epoch" else iteration - 1
        gamma = model.bank.schedule(t_now) if model.bank is not None else 1.0
        improved = stopper.update(epoch, val_acc, val_loss)
        if improved:
            best = _snapshot(model)
        rec = EpochRecord(epoch, running / seen, val_acc, val_loss, float(gamma), improved)
        history.append(rec)
        log.info("epoch %d loss %.4f val_acc %.4f val_loss %.4f gamma %.5f", epoch, rec.train_loss, val_acc, val_loss, gamma)
        if on_epoch is not None:
            on_epoch(rec)
        if stopper.should_stop:
            break

    _restore(model, best)
    model.eval()
    return TrainResult(model, history, stopper.best_epoch, epoch, train_set, val_set)
