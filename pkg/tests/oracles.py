"""Independent reference implementations used as test oracles."""

import math

import numpy as np


def brute_force_ema(levels, z, labels, gamma, radius=1.0):
    """Scalar-loop EMA update: soft assignment per sample, weighted mean, blend, reproject."""
    out = [lv.copy() for lv in levels]
    B, D = z.shape
    for lv in out:
        C, K, _ = lv.shape
        for c in range(C):
            members = [i for i in range(B) if labels[i] == c]
            if not members:
                continue
            old = lv[c].copy()
            q = np.zeros((len(members), K))
            for row, i in enumerate(members):
                zn = math.sqrt(sum(z[i, d] ** 2 for d in range(D)))
                sims = []
                for k in range(K):
                    pn = math.sqrt(sum(old[k, d] ** 2 for d in range(D)))
                    sims.append(sum(z[i, d] * old[k, d] for d in range(D)) / (zn * pn))
                denom = sum(math.exp(s) for s in sims)
                for k in range(K):
                    q[row, k] = math.exp(sims[k]) / denom
            for k in range(K):
                weight = sum(q[row, k] for row in range(len(members)))
                target = [sum(q[row, k] * z[i, d] for row, i in enumerate(members)) / weight for d in range(D)]
                new = [gamma * old[k, d] + (1 - gamma) * target[d] for d in range(D)]
                norm = math.sqrt(sum(v * v for v in new))
                lv[c, k] = [radius * v / norm for v in new]
    return out
