"""Reverse-mode gradients on the numpy tensor engine, checked against central differences."""

import numpy as np

from pdftime import Tensor, backward, finite_diff_check
from pdftime import ops

rng = np.random.default_rng(0)
x = Tensor(rng.standard_normal((4, 6)), requires_grad=True)
w = Tensor(rng.standard_normal((6, 3)), requires_grad=True)

# a small classifier loss: linear map, log-softmax, pick the target column
loss = ops.cross_entropy(x @ w, np.array([0, 2, 1, 0]))
backward(loss)
print("loss", round(loss.item(), 6))
print("dL/dw\n", np.round(w.grad, 4))

# the same function through the finite-difference oracle (float64, eps 1e-4)
err = finite_diff_check(lambda a, b: ops.cross_entropy(a @ b, np.array([0, 2, 1, 0])), [x, w])
print(f"max relative error vs central differences: {err:.2e}")
