"""A learnable per-frequency mask: zeroing one bin removes a pure tone and nothing else."""

import numpy as np

from pdftime import Tensor
from pdftime.embedding import FrequencyMask, frequency_weight

L = 64
t = np.arange(L)
slow = np.sin(2 * np.pi * 4 * t / L)
fast = np.sin(2 * np.pi * 9 * t / L)
x = (slow + fast)[None, None, :]

mask = FrequencyMask(V=1, L=L, dtype=np.float64)
print("mask shape (channels, rfft bins):", mask.weights.shape)
print("all-ones mask, max change:", np.abs(frequency_weight(Tensor(x), mask).data - x).max())

mask.weights.data[0, 4] = 0.0
out = frequency_weight(Tensor(x), mask).data[0, 0]
print("notch at bin 4, distance from the 9-cycle tone:", np.abs(out - fast).max())
