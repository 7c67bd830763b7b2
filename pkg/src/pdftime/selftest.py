"""Fast built-in oracle and invariant checks, runnable without a test runner."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ops
from .gradcheck import finite_diff_check
from .metrics import aggregate
from .prototypes import GammaSchedule, PrototypeBank, ema_update, gamma_schedule, init_prototypes
from .tensor import Tensor

__all__ = ["CheckResult", "run_selftest", "CHECKS"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _rand(rng, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _grad_ops() -> str:
    rng = np.random.default_rng(0)
    cases: dict[str, Callable[[], float]] = {}

    def weighted(fn, *shapes):
        def run():
            ts = [_rand(rng, *s) for s in shapes]
            out_shape = fn(*ts).shape
            G = Tensor(rng.standard_normal(out_shape))
            return finite_diff_check(lambda *a: (fn(*a) * G).sum(), ts)
        return run

    cases["conv1d"] = weighted(ops.conv1d, (2, 3, 10), (4, 3, 5), (4,))
    cases["gelu"] = weighted(ops.gelu, (3, 7))
    cases["layer_norm"] = weighted(ops.layer_norm, (3, 6), (6,), (6,))
    cases["softmax"] = weighted(ops.softmax, (3, 5))
    cases["spectral_filter"] = weighted(ops.spectral_filter, (2, 3, 12), (3, 7))
    cases["maxpool1d"] = weighted(ops.maxpool1d, (2, 3, 9))
    worst = {k: f() for k, f in cases.items()}
    bad = {k: v for k, v in worst.items() if not v <= 1e-6}
    if bad:
        raise AssertionError(f"relative error too large: {bad}")
    return f"max rel err {max(worst.values()):.1e}"


def _fft_identities() -> str:
    rng = np.random.default_rng(1)
    x = rng.standard_normal((4, 2, 33))
    ones = ops.spectral_filter(Tensor(x), Tensor(np.ones((2, 17)))).data
    err = np.max(np.abs(ones - x))
    t = np.arange(64)
    tone = np.sin(2 * np.pi * 5 * t / 64)[None, None]
    w = np.ones((1, 33))
    w[0, 5] = 0.0
    resid = np.max(np.abs(ops.spectral_filter(Tensor(tone), Tensor(w)).data))
    if err > 1e-10 or resid > 1e-10:
        raise AssertionError(f"identity err {err:.2e}, notch residual {resid:.2e}")
    return f"identity {err:.1e}, notch {resid:.1e}"


def _gamma_table() -> str:
    want = {0: 1.0, 2: 1.0, 8: 0.995, 13: 0.99}
    got = {t: gamma_schedule(t) for t in want}
    if any(abs(got[t] - want[t]) > 1e-12 for t in want) or abs(gamma_schedule(1000) - 0.999) > 1e-6:
        raise AssertionError(f"schedule values {got}")
    g = np.array([gamma_schedule(t) for t in np.arange(0, 500, 0.5)])
    tail = g[2 * 13 :]
    head = g[: 2 * 13 + 1]
    if np.any(np.diff(head) > 1e-15) or np.any(np.diff(tail) < -1e-15):
        raise AssertionError("schedule not monotone on its phases")
    return "table and monotonicity ok"


def _ema_oracle() -> str:
    rng = np.random.default_rng(2)
    bank = init_prototypes(2, (2,), 6, seed=3)
    ref = bank.copy()
    z = rng.standard_normal((7, 6))
    y = np.array([0, 1, 0, 0, 1, 1, 0])
    ema_update(bank, z, y, gamma=0.9)
    for c in range(2):
        P = ref.levels[0][c]
        Zc = z[y == c]
        for k in range(2):
            num = np.zeros(6)
            den = 0.0
            for zi in Zc:
                e = [np.exp(zi @ P[j] / np.linalg.norm(zi) / np.linalg.norm(P[j])) for j in range(2)]
                q = e[k] / sum(e)
                num += q * zi
                den += q
            new = 0.9 * P[k] + 0.1 * num / den
            new = new / np.linalg.norm(new)
            if not np.allclose(new, bank.levels[0][c, k], atol=1e-12):
                raise AssertionError(f"EMA mismatch at class {c}, prototype {k}")
    frozen = bank.copy()
    ema_update(frozen, z, y, t=0)
    if not frozen.equals(bank):
        raise AssertionError("warm-up update changed the bank")
    return "matches loop oracle"


def _metric_hand_case() -> str:
    agg = aggregate([[0.9, 0.8], [0.8, 0.9]])
    if agg.top1 != [1, 1] or agg.average_rank != [1.5, 1.5]:
        raise AssertionError(f"got top1 {agg.top1}, ranks {agg.average_rank}")
    return "top1 [1, 1], ranks [1.5, 1.5]"


def _bank_roundtrip() -> str:
    bank = init_prototypes(3, (2, 3), 8, seed=5, schedule=GammaSchedule(gamma_a=0.97, gamma_b=0.997))
    back = PrototypeBank.from_arrays(bank.to_arrays())
    if not back.equals(bank) or back.schedule != bank.schedule:
        raise AssertionError("bank round trip is not exact")
    return "bit-exact"


CHECKS: dict[str, Callable[[], str]] = {
    "gradients": _grad_ops,
    "frequency_identities": _fft_identities,
    "gamma_schedule": _gamma_table,
    "ema_oracle": _ema_oracle,
    "metrics": _metric_hand_case,
    "bank_roundtrip": _bank_roundtrip,
}


def run_selftest() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS.items():
        t0 = time.perf_counter()
        try:
            detail, ok = fn(), True
        except Exception as exc:  # report, keep going
            detail, ok = f"{type(exc).__name__}: {exc}", False
        results.append(CheckResult(name, ok, detail, time.perf_counter() - t0))
    return results
