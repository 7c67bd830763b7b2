import csv
import re
import json
from pathlib import Path

import numpy as np
import pytest

from pdftime.config import TrainConfig
from pdftime.data import SyntheticSpec, synthetic_split, znormalize

DATA = Path(__file__).parent / "data"


def tiny_config(**changes) -> TrainConfig:
    """A model small enough for unit tests that still has every component."""
    base = dict(
        d_model=16, heads=2, encoder_layers=1, inception_layers=1, kernel_sizes=[3, 5],
        max_epochs=3, patience=2, batch_size=8, dropout=0.0, seed=7,
    )
    base.update(changes)
    return TrainConfig(**base)


def read_table(name: str) -> tuple[list[str], list[str], np.ndarray]:
    """(datasets, methods, datasets x methods accuracy array) from a CSV table."""
    rows = list(csv.reader(open(DATA / name)))
    methods = rows[0][1:]
    datasets = [r[0] for r in rows[1:]]
    acc = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return datasets, methods, acc


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    spec = SyntheticSpec(n_train=36, n_test=30, L=32, seed=3)
    tr, te = synthetic_split(spec)
    tr.X = znormalize(tr.X)
    te.X = znormalize(te.X)
    return tr, te


CORPUS = DATA / "ts_corpus"

# file -> (n, V, L, C, labels) for well-formed files
CORPUS_GOOD = {
    "uni_basic.ts": (3, 1, 5, 2, [0, 1, 0]),
    "uni_numeric_labels.ts": (4, 1, 4, 3, [2, 0, 1, 0]),
    "multi_three_dims.ts": (2, 3, 4, 2, [0, 1]),
    "variable_length.ts": (3, 1, 7, 2, [0, 1, 0]),
    "missing_values.ts": (2, 2, 5, 2, [0, 1]),
    "comments_blank_lines.ts": (2, 1, 3, 2, [0, 1]),
}

# file -> line number the error must name
CORPUS_BAD = {
    "bad_missing_data.ts": 3,
    "bad_undeclared_label.ts": 6,
    "bad_dimension_count.ts": 7,
    "bad_non_numeric.ts": 6,
    "bad_record_before_data.ts": 4,
    "bad_all_missing_channel.ts": 7,
}


def tiny_config_dict(**changes) -> dict:
    return tiny_config(max_epochs=40, patience=40, **changes).to_dict()


@pytest.fixture(scope="session")
def cli_run(tmp_path_factory):
    """A synthetic dataset written by the CLI and a model trained on it through the CLI."""
    from pdftime.cli import main

    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert main(["synthetic", "--out", str(data), "--n-train", "60", "--n-test", "30",
                 "--length", "32", "--seed", "11"]) == 0
    cfg = root / "config.json"
    cfg.write_text(json.dumps(tiny_config_dict(seed=2025)))
    out = root / "run"
    assert main(["train", "--config", str(cfg), "--data", str(data / "Synthetic_TRAIN.ts"),
                 "--test-data", str(data / "Synthetic_TEST.ts"), "--out", str(out)]) == 0
    return {"root": root, "train": data / "Synthetic_TRAIN.ts", "test": data / "Synthetic_TEST.ts",
            "config": cfg, "out": out}


# -- acceptance summary -------------------------------------------------------------------------

ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def _criterion(nodeid: str):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", nodeid)
    return (int(m.group(1)), m.group(2).replace("_", " ")) if m else None


def pytest_runtest_logreport(report):
    found = _criterion(report.nodeid)
    if found is None or (report.when != "call" and report.passed):
        return
    n, title = found
    ok = report.passed and ACCEPTANCE.get(n, (title, True))[1]
    ACCEPTANCE[n] = (title, ok and not report.skipped)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {title}")
