"""Hierarchical prototype head.

Prototypes live outside the autodiff graph. They are initialized per class
as QR-orthogonalized Gaussian rows on a sphere of radius ``r`` and move only
through :func:`ema_update`, whose momentum follows :func:`gamma_schedule`.
Classification scores aggregate cosine similarities to a class's prototypes
with a temperature-scaled log-sum-exp; only the last level predicts.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import ops
from .tensor import Tensor, as_tensor

__all__ = [
    "GammaSchedule",
    "PrototypeBank",
    "init_prototypes",
    "class_scores",
    "level_scores",
    "predict",
    "gamma_schedule",
    "ema_update",
    "level_diversity",
    "diversity_loss",
    "total_loss",
]


@dataclass(frozen=True)
class GammaSchedule:
    """Warm-up freeze, linear decay to ``gamma_a``, exponential approach to ``gamma_b``."""

    warmup: int = 3
    active: int = 10
    gamma_a: float = 0.99
    gamma_b: float = 0.999
    tau: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.gamma_a <= self.gamma_b <= 1.0:
            raise ValueError(f"need 0 < gamma_a <= gamma_b <= 1, got {self.gamma_a}, {self.gamma_b}")
        if self.warmup < 0 or self.active < 0:
            raise ValueError("warmup and active phase lengths must be >= 0")
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")

    def __call__(self, t: float) -> float:
        return gamma_schedule(t, self)


def gamma_schedule(t: float, params: GammaSchedule | None = None) -> float:
    p = params or GammaSchedule()
    if t < p.warmup:
        return 1.0
    if t < p.warmup + p.active:
        alpha = (t - p.warmup) / p.active
        return 1.0 - (1.0 - p.gamma_a) * alpha
    dt = t - p.warmup - p.active
    return p.gamma_a + (p.gamma_b - p.gamma_a) * (1.0 - math.exp(-dt / p.tau))


@dataclass
class PrototypeBank:
    """Per-level prototype arrays, each shaped (C, K_level, D), plus schedule state."""

    levels: list[np.ndarray]
    radius: float = 1.0
    temperature: float = 0.1
    schedule: GammaSchedule = field(default_factory=GammaSchedule)
    step: int = 0

    @property
    def C(self) -> int:
        return self.levels[0].shape[0]

    @property
    def D(self) -> int:
        return self.levels[0].shape[2]

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(lv.shape[1] for lv in self.levels)

    @property
    def n_prototypes(self) -> int:
        return sum(k * self.C for k in self.counts)

    def copy(self) -> "PrototypeBank":
        return PrototypeBank([lv.copy() for lv in self.levels], self.radius, self.temperature, self.schedule, self.step)

    def top_only(self) -> "PrototypeBank":
        """A bank holding only the prediction (highest) level."""
        return PrototypeBank([self.levels[-1].copy()], self.radius, self.temperature, self.schedule, self.step)

    def equals(self, other: "PrototypeBank") -> bool:
        """Bitwise equality of all prototype values."""
        return len(self.levels) == len(other.levels) and all(
            a.shape == b.shape and a.tobytes() == b.tobytes() for a, b in zip(self.levels, other.levels)
        )

    def to_arrays(self) -> dict[str, np.ndarray]:
        meta = {
            "radius": self.radius,
            "temperature": self.temperature,
            "schedule": asdict(self.schedule),
            "step": self.step,
            "counts": list(self.counts),
            "C": self.C,
            "D": self.D,
        }
        out = {f"level{i}": lv for i, lv in enumerate(self.levels)}
        out["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "PrototypeBank":
        meta = json.loads(bytes(np.asarray(arrays["meta"], dtype=np.uint8)).decode())
        levels = [np.array(arrays[f"level{i}"]) for i in range(len(meta["counts"]))]
        return cls(levels, meta["radius"], meta["temperature"], GammaSchedule(**meta["schedule"]), meta["step"])


def init_prototypes(
    C: int,
    K_levels: Sequence[int] = (2, 3),
    D: int = 128,
    r: float = 1.0,
    seed: int = 2025,
    temperature: float = 0.1,
    schedule: GammaSchedule | None = None,
) -> PrototypeBank:
    """Orthogonal prototypes of norm ``r`` for every (level, class)."""
    for k in K_levels:
        if k > D:
            raise ValueError(f"cannot place {k} mutually orthogonal prototypes in dimension {D}")
        if k < 1:
            raise ValueError("each level needs at least one prototype per class")
    rng = np.random.default_rng(seed)
    levels = []
    for k in K_levels:
        lv = np.empty((C, k, D))
        for c in range(C):
            q, _ = np.linalg.qr(rng.standard_normal((D, k)))
            lv[c] = r * q.T
        levels.append(lv)
    return PrototypeBank(levels, float(r), float(temperature), schedule or GammaSchedule())


def class_scores(z: Tensor, bank: PrototypeBank, level: int = -1) -> Tensor:
    """Log-sum-exp of cosine similarities over each class's prototypes, (B, C)."""
    z = as_tensor(z)
    P = bank.levels[level]
    C, K, D = P.shape
    sims = ops.cosine_similarity(z, P.reshape(C * K, D))
    return ops.lse_reduce(sims.reshape(z.shape[0], C, K), bank.temperature, axis=-1)


def level_scores(z: Tensor, bank: PrototypeBank) -> list[Tensor]:
    return [class_scores(z, bank, lv) for lv in range(len(bank.levels))]


def predict(z, bank: PrototypeBank) -> tuple[np.ndarray, np.ndarray]:
    """Class indices and probabilities from the highest level alone."""
    s = class_scores(as_tensor(z).detach(), bank, -1).data.astype(np.float64)
    e = np.exp(s - s.max(axis=1, keepdims=True))
    probs = e / e.sum(axis=1, keepdims=True)
    return probs.argmax(axis=1), probs


def _unit_rows(a: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(a, axis=-1, keepdims=True)
    if np.any(n == 0):
        raise ValueError("zero-norm vector in cosine similarity")
    return a / n


def ema_update(
    bank: PrototypeBank,
    z,
    labels,
    t: int | None = None,
    *,
    gamma: float | None = None,
    reproject: bool = True,
) -> PrototypeBank:
    """Move each present class's prototypes toward soft-assigned batch means.

    For class ``c`` with batch rows ``z_i``: ``q_ik`` is a softmax over the
    class's prototypes ``k`` of ``cos(z_i, p_k)``; the target is
    ``sum_i q_ik z_i / sum_i q_ik`` and ``p_k <- g p_k + (1 - g) target``,
    then rescaled to the bank radius. ``g`` is ``gamma`` if given, otherwise
    ``gamma_schedule(t)``. Mutates and returns ``bank``.
    """
    zd = np.asarray(z.data if isinstance(z, Tensor) else z, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if zd.ndim != 2 or zd.shape[1] != bank.D or labels.shape != (zd.shape[0],):
        raise ValueError(f"ema_update: z {zd.shape} / labels {labels.shape} do not match D={bank.D}")
    if labels.size and (labels.min() < 0 or labels.max() >= bank.C):
        raise ValueError(f"ema_update: label outside [0, {bank.C})")
    if gamma is None:
        if t is None:
            raise ValueError("ema_update needs a step t or an explicit gamma")
        gamma = gamma_schedule(t, bank.schedule)
    if t is not None:
        bank.step = int(t)
    if gamma == 1.0:
        return bank

    zu = _unit_rows(zd)
    present = np.unique(labels)
    for lv in bank.levels:
        for c in present:
            rows = labels == c
            Zc, P = zd[rows], lv[c]
            sims = zu[rows] @ _unit_rows(P).T  # (n_c, K)
            q = np.exp(sims - sims.max(axis=1, keepdims=True))
            q /= q.sum(axis=1, keepdims=True)
            target = (q.T @ Zc) / q.sum(axis=0)[:, None]
            new = gamma * P + (1.0 - gamma) * target
            if reproject:
                new = bank.radius * _unit_rows(new)
            lv[c] = new
    return bank


def level_diversity(P) -> Tensor:
    """Mean over classes of ``||S_c - I||_F^2`` where ``S_c = P_c P_c^T``.

    ``P`` is (C, K, D) with rows already on the unit sphere (divide by the
    radius first). Differentiable when ``P`` is a requires-grad Tensor.
    """
    P = as_tensor(P)
    K = P.shape[1]
    S = P @ P.transpose(0, 2, 1)
    diff = S - np.eye(K, dtype=P.dtype)
    return (diff * diff).sum(axis=(1, 2)).mean()


def diversity_loss(bank: PrototypeBank) -> Tensor:
    """Diversity penalty averaged over levels."""
    vals = [level_diversity(lv / bank.radius) for lv in bank.levels]
    return sum(vals[1:], vals[0]).scale(1.0 / len(vals))


def total_loss(
    scores: Sequence[Tensor],
    labels,
    bank: PrototypeBank,
    weights: Sequence[float] | None = None,
    lam: float = 0.01,
) -> Tensor:
    """``sum_l (w_l * CE(scores_l, labels) + lam * diversity_l)``.

    The diversity terms are constants with respect to every trainable
    parameter; they shift the loss value but contribute no gradient.
    """
    n = len(bank.levels)
    weights = [1.0] * n if weights is None else list(weights)
    if len(scores) != n or len(weights) != n:
        raise ValueError(f"total_loss: {len(scores)} score sets and {len(weights)} weights for {n} levels")
    if any(w <= 0 for w in weights):
        raise ValueError("level weights must be positive")
    loss = None
    for s, w, lv in zip(scores, weights, bank.levels):
        term = ops.cross_entropy(s, labels).scale(w)
        if lam:
            div = level_diversity(lv / bank.radius).data
            term = term + np.asarray(lam * div, dtype=term.dtype)
        loss = term if loss is None else loss + term
    return loss
