"""Pre-norm Transformer encoder with sinusoidal positions and temporal pooling."""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .nn import LayerNorm, Linear, Module
from .tensor import ShapeError, Tensor

__all__ = [
    "positional_encoding",
    "MultiHeadSelfAttention",
    "EncoderLayer",
    "EncoderStack",
    "encoder_layer_forward",
    "encode",
    "POOLING_MODES",
]

POOLING_MODES = ("mean", "last", "max")


def positional_encoding(L: int, D: int) -> np.ndarray:
    """Sinusoidal table: sin on even columns, cos on odd, shape (L, D)."""
    if D % 2:
        raise ValueError(f"positional_encoding: D must be even, got {D}")
    pos = np.arange(L, dtype=np.float64)[:, None]
    inv = 10000.0 ** (-np.arange(0, D, 2, dtype=np.float64) / D)
    pe = np.empty((L, D))
    pe[:, 0::2] = np.sin(pos * inv)
    pe[:, 1::2] = np.cos(pos * inv)
    return pe


class MultiHeadSelfAttention(Module):
    def __init__(self, D: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        if D % heads:
            raise ValueError(f"{heads} heads do not divide D={D}")
        self.D, self.heads = D, heads
        self.q = Linear(D, D, rng, dtype=dtype)
        self.k = Linear(D, D, rng, dtype=dtype)
        self.v = Linear(D, D, rng, dtype=dtype)
        self.out = Linear(D, D, rng, dtype=dtype)
        self.last_attention: np.ndarray | None = None

    def _split(self, t: Tensor, B: int, L: int) -> Tensor:
        return t.reshape(B, L, self.heads, self.D // self.heads).transpose(0, 2, 1, 3)

    def forward(self, x: Tensor) -> Tensor:
        B, L, D = x.shape
        dh = D // self.heads
        q = self._split(self.q(x), B, L)
        k = self._split(self.k(x), B, L)
        v = self._split(self.v(x), B, L)
        att = ops.softmax((q @ k.transpose(0, 1, 3, 2)).scale(1.0 / math.sqrt(dh)), axis=-1)
        self.last_attention = att.data
        ctx = (att @ v).transpose(0, 2, 1, 3).reshape(B, L, D)
        return self.out(ctx)


class EncoderLayer(Module):
    """``Z' = MHSA(LN(Z)) + Z``; ``Z_out = FFN(LN(Z')) + Z'``."""

    def __init__(
        self,
        D: int,
        rng: np.random.Generator,
        heads: int = 4,
        d_ff: int | None = None,
        dropout: float = 0.2,
        dtype=np.float32,
    ):
        d_ff = d_ff or 2 * D
        self.D = D
        self.dropout = dropout
        self.ln1 = LayerNorm(D, dtype)
        self.attn = MultiHeadSelfAttention(D, heads, rng, dtype)
        self.ln2 = LayerNorm(D, dtype)
        self.ff1 = Linear(D, d_ff, rng, dtype=dtype)
        self.ff2 = Linear(d_ff, D, rng, dtype=dtype)
        # Separate stream so dropout masks do not disturb parameter init draws.
        self.rng = np.random.default_rng(rng.integers(2**63))

    def forward(self, z: Tensor) -> Tensor:
        return encoder_layer_forward(z, self)

    def zero_residual_branches_(self) -> None:
        for lin in (self.attn.out, self.ff2):
            lin.weight.data = np.zeros_like(lin.weight.data)
            lin.bias.data = np.zeros_like(lin.bias.data)


def encoder_layer_forward(z: Tensor, layer: EncoderLayer) -> Tensor:
    if z.ndim != 3 or z.shape[-1] != layer.D:
        raise ShapeError("encoder_layer_forward", z.shape, (None, None, layer.D))
    a = ops.dropout(layer.attn(layer.ln1(z)), layer.dropout, layer.rng, layer.training)
    z = a + z
    f = layer.ff2(ops.gelu(layer.ff1(layer.ln2(z))))
    f = ops.dropout(f, layer.dropout, layer.rng, layer.training)
    return f + z


class EncoderStack(Module):
    def __init__(
        self,
        L: int,
        D: int,
        rng: np.random.Generator,
        n_layers: int = 2,
        heads: int = 4,
        d_ff: int | None = None,
        dropout: float = 0.2,
        pooling: str = "mean",
        use_positional: bool = True,
        dtype=np.float32,
    ):
        if n_layers < 1:
            raise ValueError("encoder needs at least one layer")
        if pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {pooling!r}")
        self.L, self.D = L, D
        self.pooling = pooling
        self.use_positional = use_positional
        self.pe = positional_encoding(L, D).astype(dtype)
        self.layers = [EncoderLayer(D, rng, heads, d_ff, dropout, dtype) for _ in range(n_layers)]

    def forward(self, e: Tensor) -> Tensor:
        return encode(e, self)

    def sequence(self, e: Tensor) -> Tensor:
        """Encoded sequence (B, L, D) before pooling."""
        if e.ndim != 3 or e.shape[1:] != (self.D, self.L):
            raise ShapeError("encode", e.shape, (None, self.D, self.L))
        z = e.transpose(0, 2, 1)
        if self.use_positional:
            z = z + self.pe.astype(z.dtype)
        for layer in self.layers:
            z = layer(z)
        return z


def encode(e: Tensor, stack: EncoderStack) -> Tensor:
    """(B, D, L) features to pooled embeddings z of shape (B, D)."""
    z = stack.sequence(e)
    if stack.pooling == "mean":
        return z.mean(axis=1)
    if stack.pooling == "last":
        return z[:, -1, :]
    return z.max(axis=1)
