import json

import numpy as np
import pytest

from conftest import tiny_config
from pdftime.checkpoint import CheckpointError, checkpoint_arrays, load_checkpoint, model_from_arrays, save_checkpoint
from pdftime.model import PDFTime
from pdftime.training import evaluate, train


@pytest.fixture(scope="module")
def trained(small_synthetic):
    tr, _ = small_synthetic
    cfg = tiny_config(max_epochs=5, patience=5, warmup=1, active=2)
    return train(cfg, tr).model


def test_round_trip_is_bit_exact(trained, tmp_path, small_synthetic):
    _, te = small_synthetic
    path = save_checkpoint(tmp_path / "m.npz", trained, ["a", "b", "c"])
    model, names = load_checkpoint(path)
    assert names == ["a", "b", "c"]
    for (n1, p1), (n2, p2) in zip(trained.named_parameters(), model.named_parameters()):
        assert n1 == n2 and p1.dtype == p2.dtype and p1.data.tobytes() == p2.data.tobytes()
    assert model.bank.equals(trained.bank)
    assert model.bank.step == trained.bank.step and model.bank.schedule == trained.bank.schedule
    assert model.config == trained.config
    X = te.X.astype(np.float32)
    assert model.predict_proba(X).tobytes() == trained.predict_proba(X).tobytes()
    assert evaluate(model, te) == evaluate(trained, te)


def test_saving_twice_gives_identical_bytes(trained, tmp_path):
    a = save_checkpoint(tmp_path / "a.npz", trained).read_bytes()
    b = save_checkpoint(tmp_path / "b.npz", trained).read_bytes()
    assert a == b


def test_top_level_only_checkpoint_predicts_identically(trained, small_synthetic):
    _, te = small_synthetic
    arrays = checkpoint_arrays(trained)
    arrays.pop("bank/level0")
    meta = json.loads(bytes(arrays["bank/meta"]).decode())
    meta["counts"] = meta["counts"][1:]
    arrays["bank/level0"] = arrays.pop("bank/level1")
    arrays["bank/meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    pruned, _ = model_from_arrays(arrays)
    assert len(pruned.bank.levels) == 1
    X = te.X.astype(np.float32)
    assert pruned.predict_proba(X).tobytes() == trained.predict_proba(X).tobytes()


def test_linear_head_round_trip(tmp_path, small_synthetic):
    tr, _ = small_synthetic
    model = PDFTime(tr.V, tr.L, tr.C, tiny_config(head="linear"))
    back, _ = load_checkpoint(save_checkpoint(tmp_path / "l.npz", model))
    assert back.bank is None
    X = tr.X.astype(np.float32)
    assert back.predict_proba(X).tobytes() == model.predict_proba(X).tobytes()


def test_corrupt_or_inconsistent_checkpoints(trained, tmp_path):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"garbage")
    with pytest.raises(CheckpointError):
        load_checkpoint(bad)
    arrays = checkpoint_arrays(trained)
    arrays.pop("param/encoder.layers.0.ff1.weight")
    with pytest.raises(CheckpointError, match="missing"):
        model_from_arrays(arrays)
    arrays = {k: v for k, v in checkpoint_arrays(trained).items() if not k.startswith("bank/")}
    with pytest.raises(CheckpointError):
        model_from_arrays(arrays)
    with pytest.raises(CheckpointError):
        model_from_arrays({})
    arrays = checkpoint_arrays(trained)
    meta = json.loads(bytes(arrays["meta"]).decode())
    meta["format_version"] = 99
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    with pytest.raises(CheckpointError, match="format_version"):
        model_from_arrays(arrays)
