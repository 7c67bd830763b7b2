"""Model checkpoints as a single ``.npz`` archive.

Layout: ``param/<name>`` for every trainable tensor, ``bank/<key>`` for the
prototype bank (see :meth:`PrototypeBank.to_arrays`) and ``meta`` holding a
JSON document with the format version, shape, class names and config.
Values are stored in their native dtype, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import FORMAT_VERSION, TrainConfig
from .model import PDFTime
from .prototypes import PrototypeBank

__all__ = ["CheckpointError", "save_checkpoint", "load_checkpoint", "checkpoint_arrays", "model_from_arrays"]


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint."""


def _json_bytes(doc) -> np.ndarray:
    return np.frombuffer(json.dumps(doc, sort_keys=True).encode(), dtype=np.uint8)


def checkpoint_arrays(model: PDFTime, class_names=None) -> dict[str, np.ndarray]:
    meta = {
        "format_version": FORMAT_VERSION,
        "V": model.V,
        "L": model.L,
        "C": model.C,
        "dtype": model.dtype.name,
        "class_names": list(class_names) if class_names is not None else [str(c) for c in range(model.C)],
        "config": model.config.to_dict(),
    }
    out = {"meta": _json_bytes(meta)}
    for name, p in model.named_parameters():
        out[f"param/{name}"] = p.data
    if model.bank is not None:
        for k, v in model.bank.to_arrays().items():
            out[f"bank/{k}"] = v
    return out


def model_from_arrays(arrays) -> tuple[PDFTime, list[str]]:
    try:
        meta = json.loads(bytes(np.asarray(arrays["meta"], dtype=np.uint8)).decode())
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"missing or corrupt metadata ({exc})") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported format_version {meta.get('format_version')}")
    config = TrainConfig.from_dict(meta["config"])
    model = PDFTime(meta["V"], meta["L"], meta["C"], config, dtype=np.dtype(meta["dtype"]))
    state = {k[len("param/"):]: np.asarray(arrays[k]) for k in arrays if k.startswith("param/")}
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(str(exc)) from None
    bank_keys = {k[len("bank/"):]: arrays[k] for k in arrays if k.startswith("bank/")}
    if model.bank is not None:
        if not bank_keys:
            raise CheckpointError("prototype head without a stored bank")
        try:
            model.bank = PrototypeBank.from_arrays(bank_keys)
        except KeyError as exc:
            raise CheckpointError(f"incomplete prototype bank: missing {exc}") from None
    model.eval()
    return model, meta["class_names"]


def save_checkpoint(path, model: PDFTime, class_names=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **checkpoint_arrays(model, class_names))
    return path


def load_checkpoint(path) -> tuple[PDFTime, list[str]]:
    """Rebuild the model stored at ``path``; returns (model, class_names)."""
    try:
        with np.load(Path(path), allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from None
    return model_from_arrays(arrays)
