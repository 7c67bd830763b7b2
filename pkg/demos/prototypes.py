"""Prototype bank basics: orthogonal init, the momentum schedule, and one EMA update."""

import numpy as np

from pdftime import ema_update, gamma_schedule, init_prototypes
from pdftime.prototypes import diversity_loss

bank = init_prototypes(3, (2, 3), 8, seed=0)  # 3 classes, 2 then 3 per class, D=8
print("levels:", [lv.shape for lv in bank.levels])
print("diversity loss at init:", diversity_loss(bank).item())

print("momentum by epoch:")
for t in (0, 2, 3, 8, 13, 20, 50, 1000):
    print(f"  t={t:4d}  gamma={gamma_schedule(t):.5f}")

rng = np.random.default_rng(1)
z = rng.standard_normal((12, 8))
labels = rng.integers(0, 3, 12)
before = bank.levels[-1].copy()
ema_update(bank, z, labels, gamma=0.9)
moved = np.linalg.norm(bank.levels[-1] - before, axis=-1)
print("top-level prototype movement per class:\n", np.round(moved, 4))
print("norms after update:", np.round(np.linalg.norm(bank.levels[-1], axis=-1), 6).ravel())
