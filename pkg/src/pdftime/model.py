"""End-to-end classifier: inception embedding, Transformer encoder, decision head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .embedding import EmbeddingStack
from .encoder import EncoderStack
from .nn import Linear, Module
from .prototypes import (
    GammaSchedule,
    PrototypeBank,
    ema_update,
    init_prototypes,
    level_scores,
    predict,
    total_loss,
)
from .tensor import Tensor, no_grad

__all__ = ["PDFTime", "ForwardOutput"]

HEADS = ("prototype", "linear")


@dataclass
class ForwardOutput:
    z: Tensor
    scores: list[Tensor]


class PDFTime(Module):
    """Prototype-guided time-series classifier.

    With ``head="linear"`` the prototype bank is replaced by a single linear
    layer on ``z`` (the ablation baseline); everything upstream is identical.
    """

    def __init__(self, V: int, L: int, C: int, config, dtype=np.float32):
        if config.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {config.head!r}")
        self.V, self.L, self.C = V, L, C
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(config.seed)
        self.embedding = EmbeddingStack(
            V, L, config.d_model, rng,
            n_layers=config.inception_layers,
            kernel_sizes=tuple(config.kernel_sizes),
            use_frequency_mask=config.frequency_mask,
            dtype=dtype,
        )
        self.encoder = EncoderStack(
            L, config.d_model, rng,
            n_layers=config.encoder_layers,
            heads=config.heads,
            d_ff=config.d_ff,
            dropout=config.dropout,
            pooling=config.pooling,
            use_positional=config.positional_encoding,
            dtype=dtype,
        )
        self.head = config.head
        self.linear = Linear(config.d_model, C, rng, dtype=dtype) if self.head == "linear" else None
        self.bank: PrototypeBank | None = None
        if self.head == "prototype":
            schedule = GammaSchedule(
                config.warmup, config.active, config.gamma_a, config.gamma_b, config.tau
            )
            self.bank = init_prototypes(
                C, tuple(config.prototype_counts), config.d_model,
                r=config.radius, seed=config.seed, temperature=config.temperature, schedule=schedule,
            )

    def embed(self, x) -> Tensor:
        """Pooled embedding z, shape (B, D)."""
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        return self.encoder(self.embedding(x))

    def scores(self, z: Tensor) -> list[Tensor]:
        if self.head == "linear":
            return [self.linear(z)]
        return level_scores(z, self.bank)

    def forward(self, x) -> ForwardOutput:
        z = self.embed(x)
        return ForwardOutput(z, self.scores(z))

    def loss(self, out: ForwardOutput, labels) -> Tensor:
        if self.head == "linear":
            return ops.cross_entropy(out.scores[0], labels)
        return total_loss(out.scores, labels, self.bank, self.config.level_weights, self.config.diversity_weight)

    def predict_proba(self, x, batch_size: int = 64) -> np.ndarray:
        """Class probabilities in evaluation mode, computed in fixed batch order."""
        was_training = self.training
        self.eval()
        out = []
        try:
            with no_grad():
                for i in range(0, len(x), batch_size):
                    z = self.embed(x[i : i + batch_size])
                    if self.head == "linear":
                        s = z.data @ self.linear.weight.data + self.linear.bias.data
                        s = s.astype(np.float64)
                        e = np.exp(s - s.max(axis=1, keepdims=True))
                        out.append(e / e.sum(axis=1, keepdims=True))
                    else:
                        out.append(predict(z, self.bank)[1])
        finally:
            self.train(was_training)
        return np.concatenate(out) if out else np.zeros((0, self.C))

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        return self.predict_proba(x, batch_size).argmax(axis=1)

    def embeddings(self, x, batch_size: int = 64) -> np.ndarray:
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                parts = [self.embed(x[i : i + batch_size]).data for i in range(0, len(x), batch_size)]
        finally:
            self.train(was_training)
        return np.concatenate(parts).astype(np.float64)

    def update_prototypes(self, x, labels, t: int) -> float:
        """EMA step on evaluation-mode embeddings of ``x``; returns the gamma used."""
        if self.bank is None:
            return 1.0
        gamma = self.bank.schedule(t)
        if gamma == 1.0:
            self.bank.step = int(t)
            return gamma
        ema_update(self.bank, self.embeddings(x, batch_size=len(x)), labels, t, gamma=gamma)
        return gamma
