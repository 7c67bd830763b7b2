"""Inception embedding: learnable frequency weighting, input projection, residual inception stack."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import ops
from .nn import Conv1d, Module, param
from .tensor import ShapeError, Tensor

__all__ = [
    "FrequencyMask",
    "InceptionLayer",
    "EmbeddingStack",
    "frequency_weight",
    "inception_forward",
    "embed",
]


class FrequencyMask(Module):
    """One real weight per (channel, nonnegative frequency bin), initialized to ones."""

    def __init__(self, V: int, L: int, dtype=np.float32):
        self.V, self.L = V, L
        self.weights = param(np.ones((V, L // 2 + 1)), dtype)

    def forward(self, x: Tensor) -> Tensor:
        return frequency_weight(x, self)


def frequency_weight(x: Tensor, mask: FrequencyMask) -> Tensor:
    """Scale the DFT of each channel of ``x`` (B, V, L) by the mask and invert."""
    if x.ndim != 3 or x.shape[1:] != (mask.V, mask.L):
        raise ShapeError("frequency_weight", x.shape, mask.weights.shape)
    return ops.spectral_filter(x, mask.weights)


class InceptionLayer(Module):
    """Parallel convolution branches plus a max-pool branch, projected back to D.

    Each branch emits ``D // n_branches`` channels; a pointwise convolution
    maps the concatenation back to D, followed by ReLU. The layer output adds
    the input (residual), so channel count and length are unchanged.
    """

    def __init__(
        self,
        D: int,
        rng: np.random.Generator,
        kernel_sizes: Sequence[int] = (3, 7, 15),
        pool_size: int = 3,
        dtype=np.float32,
    ):
        self.D = D
        self.pool_size = pool_size
        n_branches = len(kernel_sizes) + 1
        width = max(1, D // n_branches)
        self.branches = [Conv1d(D, width, k, rng, dtype) for k in kernel_sizes]
        self.pool_proj = Conv1d(D, width, 1, rng, dtype)
        self.proj = Conv1d(width * n_branches, D, 1, rng, dtype)

    def forward(self, e: Tensor) -> Tensor:
        return inception_forward(e, self)

    def zero_(self) -> None:
        """Zero every branch and the projection, making the layer the identity."""
        for p in self.parameters():
            p.data = np.zeros_like(p.data)


def inception_forward(e: Tensor, layer: InceptionLayer) -> Tensor:
    if e.ndim != 3 or e.shape[1] != layer.D:
        raise ShapeError("inception_forward", e.shape, (None, layer.D, None))
    outs = [b(e) for b in layer.branches]
    outs.append(layer.pool_proj(ops.maxpool1d(e, layer.pool_size)))
    mixed = ops.relu(layer.proj(ops.concat(outs, axis=1)))
    return mixed + e


class EmbeddingStack(Module):
    """Maps a batch (B, V, L) to features (B, D, L)."""

    def __init__(
        self,
        V: int,
        L: int,
        D: int,
        rng: np.random.Generator,
        n_layers: int = 2,
        kernel_sizes: Sequence[int] = (3, 7, 15),
        use_frequency_mask: bool = True,
        dtype=np.float32,
    ):
        self.V, self.L, self.D = V, L, D
        self.use_frequency_mask = use_frequency_mask
        self.mask = FrequencyMask(V, L, dtype)
        self.input_proj = Conv1d(V, D, 1, rng, dtype)
        self.layers = [InceptionLayer(D, rng, kernel_sizes, dtype=dtype) for _ in range(n_layers)]
        if not use_frequency_mask:
            self.mask.weights.requires_grad = False

    def forward(self, x: Tensor) -> Tensor:
        return embed(x, self)


def embed(x: Tensor, stack: EmbeddingStack) -> Tensor:
    if x.ndim != 3 or x.shape[1:] != (stack.V, stack.L):
        raise ShapeError("embed", x.shape, (None, stack.V, stack.L))
    h = frequency_weight(x, stack.mask) if stack.use_frequency_mask else x
    h = stack.input_proj(h)
    for layer in stack.layers:
        h = layer(h)
    return h
