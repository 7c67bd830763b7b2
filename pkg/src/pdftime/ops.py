"""Differentiable operation catalog built on :class:`~pdftime.tensor.Tensor`.

Every function here records itself on the tape when an input requires
gradients. The exceptions are :func:`rfft` and :func:`irfft`, which are plain
transforms; the differentiable frequency-domain path is :func:`spectral_filter`,
which fuses forward DFT, element-wise weighting and inverse DFT into one op
with an exact adjoint.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from .tensor import ShapeError, Tensor, as_tensor

__all__ = [
    "linear",
    "conv1d",
    "maxpool1d",
    "relu",
    "gelu",
    "layer_norm",
    "softmax",
    "log_softmax",
    "logsumexp",
    "lse_reduce",
    "cross_entropy",
    "concat",
    "dropout",
    "rfft",
    "irfft",
    "spectral_filter",
    "cosine_similarity",
]

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped (in, out)."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError("linear", x.shape, weight.shape)
    out = x @ weight
    return out + bias if bias is not None else out


def _same_padding(k: int) -> tuple[int, int]:
    left = (k - 1) // 2
    return left, k - 1 - left


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 1-D convolution with zero padding that preserves length.

    Shapes: ``x`` (B, C_in, L), ``weight`` (C_out, C_in, K), ``bias`` (C_out,).
    Output is (B, C_out, L). This is cross-correlation, as in every deep
    learning framework.
    """
    if x.ndim != 3 or weight.ndim != 3 or x.shape[1] != weight.shape[1]:
        raise ShapeError("conv1d", x.shape, weight.shape)
    B, cin, L = x.shape
    cout, _, K = weight.shape
    xd, wd = x.data, weight.data

    if K == 1:
        w2 = wd[:, :, 0]
        data = np.matmul(w2, xd)

        def bw_point(g):
            gx = np.matmul(w2.T, g) if x.requires_grad else None
            gw = None
            if weight.requires_grad:
                gw = np.einsum("bol,bcl->oc", g, xd)[:, :, None]
            return gx, gw

        out = Tensor._from_op(data, (x, weight), bw_point, "conv1d")
    else:
        left, right = _same_padding(K)
        # Channel-last, kernel-major columns so col2im adds contiguous slabs.
        xt = np.zeros((B, L + K - 1, cin), dtype=xd.dtype)
        xt[:, left : left + L, :] = xd.transpose(0, 2, 1)
        cols = sliding_window_view(xt, K, axis=1).transpose(0, 1, 3, 2)  # (B, L, K, C_in)
        cols = np.ascontiguousarray(cols).reshape(B * L, K * cin)
        wmat = np.ascontiguousarray(wd.transpose(0, 2, 1)).reshape(cout, K * cin)
        data = (cols @ wmat.T).reshape(B, L, cout).transpose(0, 2, 1)

        def bw(g):
            g2 = np.ascontiguousarray(g.transpose(0, 2, 1)).reshape(B * L, cout)
            gx = gw = None
            if weight.requires_grad:
                gw = (g2.T @ cols).reshape(cout, K, cin).transpose(0, 2, 1)
            if x.requires_grad:
                gcols = (g2 @ wmat).reshape(B, L, K, cin)
                gpad = np.zeros((B, L + K - 1, cin), dtype=gcols.dtype)
                for k in range(K):
                    gpad[:, k : k + L, :] += gcols[:, :, k, :]
                gx = gpad[:, left : left + L, :].transpose(0, 2, 1)
            return gx, gw

        out = Tensor._from_op(np.ascontiguousarray(data), (x, weight), bw, "conv1d")

    if bias is not None:
        if bias.shape != (cout,):
            raise ShapeError("conv1d", weight.shape, bias.shape, detail="bias")
        out = out + bias.reshape(1, cout, 1)
    return out


def maxpool1d(x: Tensor, kernel: int = 3) -> Tensor:
    """Stride-1 max pooling over the last axis, padded to preserve length.

    Gradient goes to the first maximal element of each window.
    """
    left, right = _same_padding(kernel)
    xd = x.data
    L = xd.shape[-1]
    pad = [(0, 0)] * (xd.ndim - 1) + [(left, right)]
    xp = np.pad(xd, pad, constant_values=-np.inf)
    data = xp[..., 0:L].copy()
    idx = np.zeros(data.shape, dtype=np.int8 if kernel < 128 else np.int64)
    for j in range(1, kernel):
        cand = xp[..., j : j + L]
        better = cand > data
        np.copyto(data, cand, where=better)
        idx[better] = j

    def bw(g):
        gpad = np.zeros(xp.shape, dtype=g.dtype)
        for j in range(kernel):
            gpad[..., j : j + L] += np.where(idx == j, g, 0)
        return (gpad[..., left : left + L],)

    return Tensor._from_op(data, (x,), bw, "maxpool1d")


def relu(x: Tensor) -> Tensor:
    xd = x.data
    data = np.maximum(xd, 0)
    return Tensor._from_op(data, (x,), lambda g: (g * (xd > 0),), "relu")


def gelu(x: Tensor) -> Tensor:
    """Exact (erf) GELU."""
    xd = x.data
    cdf = 0.5 * (1.0 + erf(xd * _SQRT_HALF))
    data = (xd * cdf).astype(xd.dtype, copy=False)

    def bw(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * xd * xd)
        return (g * (cdf + xd * pdf),)

    return Tensor._from_op(data, (x,), bw, "gelu")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then apply a learnable scale and shift."""
    if gamma.shape != (x.shape[-1],) or beta.shape != gamma.shape:
        raise ShapeError("layer_norm", x.shape, gamma.shape)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    data = xhat * gamma.data + beta.data

    def bw(g):
        gx = gg = gb = None
        if x.requires_grad:
            gh = g * gamma.data
            gx = rstd * (
                gh
                - gh.mean(axis=-1, keepdims=True)
                - xhat * (gh * xhat).mean(axis=-1, keepdims=True)
            )
        lead = tuple(range(g.ndim - 1))
        if gamma.requires_grad:
            gg = (g * xhat).sum(axis=lead)
        if beta.requires_grad:
            gb = g.sum(axis=lead)
        return gx, gg, gb

    return Tensor._from_op(data, (x, gamma, beta), bw, "layer_norm")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    xd = x.data
    e = np.exp(xd - xd.max(axis=axis, keepdims=True))
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (x,), bw, "softmax")


def _lse(xd: np.ndarray, axis: int) -> tuple[np.ndarray, np.ndarray]:
    m = xd.max(axis=axis, keepdims=True)
    e = np.exp(xd - m)
    s = e.sum(axis=axis, keepdims=True)
    return m + np.log(s), e / s


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    lse, p = _lse(x.data, axis)
    data = x.data - lse

    def bw(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(data, (x,), bw, "log_softmax")


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Max-stabilized ``log(sum(exp(x)))`` along ``axis``."""
    lse, p = _lse(x.data, axis)
    data = lse if keepdims else np.squeeze(lse, axis=axis)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * p,)

    return Tensor._from_op(data, (x,), bw, "logsumexp")


def lse_reduce(values, T: float, axis: int = -1) -> Tensor:
    """Temperature-scaled log-sum-exp, ``log sum_k exp(values_k / T)``.

    Accepts a Tensor (differentiable) or anything array-like.

    >>> round(float(lse_reduce([0.8, 0.8], 1.0)), 6)
    1.493147
    """
    if not T > 0:
        raise ValueError(f"lse_reduce: temperature must be positive, got {T}")
    v = as_tensor(values)
    if v.ndim == 0 or v.shape[axis] == 0:
        raise ValueError("lse_reduce: empty input")
    return logsumexp(v.scale(1.0 / T), axis=axis)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer ``labels`` under softmax(logits)."""
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError("cross_entropy", logits.shape, labels.shape)
    B = logits.shape[0]
    lse, p = _lse(logits.data, -1)
    rows = np.arange(B)
    nll = lse[:, 0] - logits.data[rows, labels]
    data = np.asarray(nll.mean(dtype=np.float64), dtype=logits.dtype)

    def bw(g):
        d = p.copy()
        d[rows, labels] -= 1.0
        return (d * (g / B),)

    return Tensor._from_op(data, (logits,), bw, "cross_entropy")


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError("concat", *[t.shape for t in tensors]) from None
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def bw(g):
        out = []
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                out.append(g[tuple(sl)])
            else:
                out.append(None)
        return out

    return Tensor._from_op(data, tuple(tensors), bw, "concat")


def dropout(x: Tensor, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; the identity (same object) when not training."""
    if not training or p <= 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / x.dtype.type(1.0 - p)
    return Tensor._from_op(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


# -- frequency domain ---------------------------------------------------------


def rfft(x) -> tuple[Tensor, Tensor]:
    """Real-input DFT over the last axis: L values in, L//2+1 bins out.

    Returns (real, imaginary) parts as separate tensors. Not recorded on the
    tape.
    """
    xd = as_tensor(x).data
    X = np.fft.rfft(xd, axis=-1)
    return Tensor(X.real.astype(xd.dtype)), Tensor(X.imag.astype(xd.dtype))


def irfft(re, im, n: int) -> Tensor:
    """Inverse of :func:`rfft` for a real signal of length ``n``."""
    re, im = as_tensor(re).data, as_tensor(im).data
    if re.shape != im.shape or re.shape[-1] != n // 2 + 1:
        raise ShapeError("irfft", re.shape, im.shape, detail=f"n={n}")
    y = np.fft.irfft(re + 1j * im, n=n, axis=-1)
    return Tensor(y.astype(re.dtype))


def _bin_multiplicity(n: int) -> np.ndarray:
    # Each interior bin stands for itself and its conjugate mirror.
    m = np.full(n // 2 + 1, 2.0)
    m[0] = 1.0
    if n % 2 == 0:
        m[-1] = 1.0
    return m


def spectral_filter(x: Tensor, weights: Tensor) -> Tensor:
    """``irfft(weights * rfft(x))`` along the last axis.

    ``x`` is (..., V, L) and ``weights`` is (V, L//2+1), real, broadcast over
    the leading axes. Differentiable in both arguments.
    """
    if x.ndim < 2:
        raise ShapeError("spectral_filter", x.shape, weights.shape)
    L = x.shape[-1]
    if weights.shape != (x.shape[-2], L // 2 + 1):
        raise ShapeError("spectral_filter", x.shape, weights.shape)
    dtype = x.dtype
    X = np.fft.rfft(x.data, axis=-1)
    w = weights.data
    data = np.fft.irfft(X * w, n=L, axis=-1).astype(dtype)

    def bw(g):
        G = np.fft.rfft(g, axis=-1)
        gx = gw = None
        if x.requires_grad:
            gx = np.fft.irfft(G * w, n=L, axis=-1).astype(g.dtype)
        if weights.requires_grad:
            prod = (X * np.conj(G)).real * (_bin_multiplicity(L) / L)
            lead = tuple(range(prod.ndim - 2))
            gw = prod.sum(axis=lead) if lead else prod
        return gx, gw

    return Tensor._from_op(data, (x, weights), bw, "spectral_filter")


def cosine_similarity(z: Tensor, protos) -> Tensor:
    """Cosine similarity between rows of ``z`` (B, D) and ``protos`` (N, D).

    ``protos`` is treated as a constant: no gradient flows to it unless it is
    passed as a requires-grad Tensor.
    """
    p = as_tensor(protos, dtype=z.dtype)
    if z.ndim != 2 or p.ndim != 2 or z.shape[1] != p.shape[1]:
        raise ShapeError("cosine_similarity", z.shape, p.shape)
    zn2 = (z * z).sum(axis=-1, keepdims=True)
    if np.any(zn2.data <= 0):
        raise ValueError("cosine_similarity: zero-norm embedding row")
    pn2 = (p * p).sum(axis=-1, keepdims=True)
    if np.any(pn2.data <= 0):
        raise ValueError("cosine_similarity: zero-norm prototype")
    zu = z / zn2.sqrt()
    pu = p / pn2.sqrt()
    return zu @ pu.transpose()

