"""Central-difference oracle for gradients computed by :func:`~pdftime.tensor.backward`."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward

__all__ = ["finite_diff_check", "numeric_gradient"]


def numeric_gradient(
    f: Callable[..., Tensor],
    point: Sequence[Tensor],
    eps: float = 1e-4,
    coords: dict[int, np.ndarray] | None = None,
) -> list[np.ndarray]:
    """Central differences of scalar ``f(*point)`` w.r.t. each tensor in ``point``.

    Tensors are perturbed in place and restored, so ``f`` may also close over
    them. ``coords`` optionally restricts tensor ``i`` to the flat indices
    ``coords[i]``; skipped coordinates are NaN in the result.
    """
    grads = []
    for i, t in enumerate(point):
        flat = t.data.reshape(-1)
        g = np.full(flat.size, np.nan)
        idxs = range(flat.size) if coords is None or i not in coords else coords[i]
        for j in idxs:
            orig = flat[j]
            flat[j] = orig + eps
            hi = float(f(*point).item())
            flat[j] = orig - eps
            lo = float(f(*point).item())
            flat[j] = orig
            g[j] = (hi - lo) / (2.0 * eps)
        grads.append(g.reshape(t.shape))
    return grads


def finite_diff_check(
    f: Callable[..., Tensor],
    point: Sequence[Tensor] | Tensor,
    eps: float = 1e-4,
    *,
    max_coords: int | None = None,
    seed: int = 0,
) -> float:
    """Largest relative disagreement between backward and central differences.

    Returns ``max |analytic - numeric| / max(|numeric|, 1e-8)`` over all
    checked coordinates. With ``max_coords`` set, each tensor contributes at
    most that many coordinates, chosen with a seeded generator.

    ``f`` must be deterministic. Run it in float64 for meaningful results at
    small ``eps``.
    """
    if isinstance(point, Tensor):
        point = [point]
    point = list(point)
    saved = [t.requires_grad for t in point]
    for t in point:
        t.requires_grad = True
        t.grad = None
    try:
        loss = f(*point)
        backward(loss)
        analytic = [
            np.zeros(t.shape) if t.grad is None else np.asarray(t.grad, dtype=np.float64)
            for t in point
        ]
    finally:
        for t, s in zip(point, saved):
            t.requires_grad = s

    coords = None
    if max_coords is not None:
        rng = np.random.default_rng(seed)
        coords = {
            i: np.sort(rng.choice(t.size, size=min(max_coords, t.size), replace=False))
            for i, t in enumerate(point)
        }
    numeric = numeric_gradient(f, point, eps, coords)

    worst = 0.0
    for a, n in zip(analytic, numeric):
        mask = ~np.isnan(n)
        if not mask.any():
            continue
        err = np.abs(a[mask] - n[mask]) / np.maximum(np.abs(n[mask]), 1e-8)
        worst = max(worst, float(err.max()))
    for t in point:
        t.grad = None
    return worst
