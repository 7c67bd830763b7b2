"""Train a small model on seeded sinusoids, save it, reload it and list prototype neighbours.

Pass --full for the default configuration on the 300/300 task (a few minutes on one core).
"""

import sys
import tempfile
from pathlib import Path

from pdftime import (
    SyntheticSpec,
    TrainConfig,
    evaluate,
    inspect,
    load_checkpoint,
    save_checkpoint,
    synthetic_split,
    train,
    znormalize,
)

full = "--full" in sys.argv
spec = SyntheticSpec() if full else SyntheticSpec(n_train=90, n_test=60, L=64)
tr, te = synthetic_split(spec)
tr.X, te.X = znormalize(tr.X), znormalize(te.X)

if full:
    cfg = TrainConfig()
else:
    cfg = TrainConfig(d_model=16, heads=2, encoder_layers=1, inception_layers=1, kernel_sizes=[3, 7],
                      max_epochs=30, patience=10, dropout=0.0)


def progress(rec):
    print(f"epoch {rec.epoch:3d}  loss {rec.train_loss:.4f}  val acc {rec.val_accuracy:.3f}  gamma {rec.gamma:.4f}")


res = train(cfg, tr, on_epoch=progress)
print(f"best epoch {res.best_epoch}, test accuracy {evaluate(res.model, te):.3f}")

with tempfile.TemporaryDirectory() as tmp:
    path = save_checkpoint(Path(tmp) / "model.npz", res.model, tr.class_names)
    model, names = load_checkpoint(path)
    print("reloaded checkpoint gives the same accuracy:", evaluate(model, te) == evaluate(res.model, te))

for rec in inspect(model, tr, m=3):
    print(f"level {rec.level} class {rec.class_name} prototype {rec.index}: neighbours {rec.neighbors} "
          f"labels {rec.neighbor_labels} cos {[round(s, 3) for s in rec.scores]}")
