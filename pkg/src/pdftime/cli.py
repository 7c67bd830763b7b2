"""``pdftime`` command-line tool.

Every failure ends the process with a nonzero exit code and exactly one
line on stderr of the form ``pdftime: <kind>: <message>``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from threadpoolctl import threadpool_limits

from .attribution import inspect, records_to_json
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import FORMAT_VERSION, ConfigError, TrainConfig, load_config
from .data import ParseError, SyntheticSpec, TimeSeriesDataset, format_ts, load_dataset, synthetic_split
from .metrics import BenchmarkReport
from .selftest import run_selftest
from .tensor import NumericError
from .training import evaluate, train

__all__ = ["main", "CliError", "EXIT_CODES"]

EXIT_CODES = {"usage": 2, "config": 3, "io": 4, "parse": 5, "checkpoint": 6, "numeric": 7, "data": 8, "selftest": 9}


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.code = EXIT_CODES[kind]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("usage", message)


def _one_line(text: str) -> str:
    return " ".join(str(text).split())


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise CliError("io", f"cannot write {path}: {exc.strerror}") from None


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _env_seed() -> int | None:
    raw = os.environ.get("PDF_SEED")
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise CliError("config", f"PDF_SEED is not an integer: {raw!r}") from None


def _resolve(args, need_config: bool = False) -> tuple[TrainConfig, dict]:
    """Effective config: file values, then --seed, with PDF_SEED as the fallback seed."""
    run: dict = {}
    seed_in_file = False
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise CliError("io", f"config file not found: {path}")
        cfg, run = load_config(path)
        seed_in_file = "seed" in json.loads(path.read_text())
    elif need_config:
        raise CliError("usage", "--config is required")
    else:
        cfg = TrainConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    elif not seed_in_file and _env_seed() is not None:
        cfg = cfg.replace(seed=_env_seed())
    cfg.validate()
    return cfg, run


def _load(path, **kw) -> TimeSeriesDataset:
    path = Path(path)
    if not path.is_file():
        raise CliError("io", f"data file not found: {path}")
    try:
        return load_dataset(path, **kw)
    except ParseError as exc:
        raise CliError("parse", f"{path}: {exc}") from None
    except ValueError as exc:
        raise CliError("data", f"{path}: {exc}") from None


def _pick(cli_value, run: dict, key: str, required: bool = True):
    value = cli_value if cli_value is not None else run.get(key)
    if value is None and required:
        raise CliError("usage", f"--{key.replace('_', '-')} is required (flag or config key {key!r})")
    return value


def _record(r) -> dict:
    return {k: getattr(r, k) for k in r.__dataclass_fields__}


def cmd_train(args) -> int:
    cfg, run = _resolve(args)
    data = _pick(args.data, run, "data")
    out = Path(_pick(args.out, run, "out"))
    test_path = _pick(args.test_data, run, "test_data", required=False)
    ds = _load(data, V=args.channels, L=args.length)
    test = _load(test_path, length=ds.L, V=ds.V, L=ds.L, class_names=ds.class_names) if test_path else None
    result = train(cfg, ds)
    model = result.model
    save_checkpoint(out / "checkpoint.npz", model, ds.class_names)
    _write(out / "history.csv", result.history.to_csv())
    echo = {"format_version": FORMAT_VERSION, **cfg.to_dict(), "data": str(data), "out": str(out)}
    if test_path:
        echo["test_data"] = str(test_path)
    _write(out / "config.json", _dump(echo))
    best = result.history.records[result.best_epoch]
    summary = {
        "format_version": FORMAT_VERSION,
        "data": str(data),
        "n_train": result.train_set.n,
        "n_val": result.val_set.n,
        "class_names": ds.class_names,
        "best_epoch": result.best_epoch,
        "stopped_epoch": result.stopped_epoch,
        "epochs": len(result.history),
        "history": [_record(r) for r in result.history.records],
        "final": {
            "epoch": result.best_epoch,
            "val_accuracy": best.val_accuracy,
            "val_loss": best.val_loss,
            # accuracy of the restored model on the whole --data file
            "train_accuracy": evaluate(model, ds),
        },
    }
    if test is not None:
        summary["test_accuracy"] = evaluate(model, test)
    _write(out / "summary.json", _dump(summary))
    print(_dump({k: summary[k] for k in ("best_epoch", "stopped_epoch", "final")} | (
        {"test_accuracy": summary["test_accuracy"]} if test is not None else {})), end="")
    return 0


def cmd_evaluate(args) -> int:
    try:
        model, names = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise CliError("checkpoint", str(exc)) from None
    ds = _load(args.data, length=model.L, V=model.V, L=model.L, class_names=names)
    doc = {"format_version": FORMAT_VERSION, "data": str(args.data), "n": ds.n, "accuracy": evaluate(model, ds)}
    text = _dump(doc)
    if args.out:
        _write(Path(args.out), text)
    print(text, end="")
    return 0


def _find_splits(root: Path) -> dict[str, tuple[Path, Path]]:
    """``<name>_TRAIN.ts``/``<name>_TEST.ts`` pairs, flat or one directory per dataset."""
    pairs = {}
    for train_file in sorted(root.rglob("*_TRAIN.ts")):
        name = train_file.name[: -len("_TRAIN.ts")]
        test_file = train_file.with_name(f"{name}_TEST.ts")
        if test_file.is_file():
            pairs[name] = (train_file, test_file)
    return pairs


def _bench_one(job):
    name, train_file, test_file, cfg_dict, head = job
    cfg = TrainConfig.from_dict(cfg_dict).replace(head=head)
    ds = load_dataset(train_file)
    test = load_dataset(test_file, length=ds.L, class_names=ds.class_names)
    result = train(cfg, ds)
    return name, head, evaluate(result.model, test), [_record(r) for r in result.history.records]


def cmd_benchmark(args) -> int:
    cfg, run = _resolve(args, need_config=True)
    root = Path(_pick(args.data_dir, run, "data_dir"))
    out = Path(_pick(args.out, run, "out"))
    if not root.is_dir():
        raise CliError("io", f"dataset directory not found: {root}")
    pairs = _find_splits(root)
    if not pairs:
        raise CliError("data", f"no <name>_TRAIN.ts / <name>_TEST.ts pairs under {root}")
    heads = args.heads.split(",")
    for h in heads:
        if h not in ("prototype", "linear"):
            raise CliError("usage", f"unknown head {h!r}")
    jobs = [(n, a, b, cfg.to_dict(), h) for n, (a, b) in pairs.items() for h in heads]
    workers = max(1, args.device_threads or 1)
    try:
        if workers == 1:
            results = [_bench_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_bench_one, jobs))
    except ParseError as exc:
        raise CliError("parse", str(exc)) from None
    label = {"prototype": "PDFTime", "linear": "PDFTime-linear"}
    acc: dict[str, dict[str, float]] = {}
    curves = {}
    for name, head, a, hist in sorted(results, key=lambda r: (r[0], r[1])):
        acc.setdefault(label[head], {})[name] = a
        curves[f"{name}/{label[head]}"] = hist
    report = BenchmarkReport(acc, curves)
    _write(out / "report.csv", report.to_csv())
    _write(out / "report.json", report.to_json())
    print(_dump(report.aggregates().to_dict()), end="")
    return 0


def cmd_inspect(args) -> int:
    try:
        model, names = load_checkpoint(args.checkpoint)
    except CheckpointError as exc:
        raise CliError("checkpoint", str(exc)) from None
    if model.bank is None:
        raise CliError("data", "checkpoint has a linear head; nothing to inspect")
    ds = _load(args.data, length=model.L, V=model.V, L=model.L, class_names=names)
    text = records_to_json(inspect(model, ds, m=args.top))
    if args.out:
        _write(Path(args.out), text)
    else:
        print(text, end="")
    return 0


def cmd_synthetic(args) -> int:
    kw = {}
    if args.spec:
        try:
            kw = json.loads(Path(args.spec).read_text())
        except OSError as exc:
            raise CliError("io", f"cannot read {args.spec}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise CliError("config", f"{args.spec}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    for key in ("n_classes", "n_train", "n_test", "V", "L", "noise_std"):
        v = getattr(args, key)
        if v is not None:
            kw[key] = v
    if args.seed is not None:
        kw["seed"] = args.seed
    elif "seed" not in kw and _env_seed() is not None:
        kw["seed"] = _env_seed()
    n = kw.get("n_classes", 3)
    if n != 3 and "base_frequencies" not in kw:
        kw["base_frequencies"] = [2.0 + 3.0 * i for i in range(n)]
    try:
        spec = SyntheticSpec(**kw)
    except (TypeError, ValueError) as exc:
        raise CliError("config", _one_line(exc)) from None
    tr, te = synthetic_split(spec)
    out = Path(args.out)
    _write(out / f"{args.name}_TRAIN.ts", format_ts(tr, args.name))
    _write(out / f"{args.name}_TEST.ts", format_ts(te, args.name))
    print(_dump({"train": str(out / f"{args.name}_TRAIN.ts"), "test": str(out / f"{args.name}_TEST.ts")}), end="")
    return 0


def cmd_selftest(args) -> int:
    results = run_selftest()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.seconds:.2f}s): {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CliError("selftest", f"failed checks: {', '.join(failed)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdftime", description="Prototype-guided time-series classification.")
    p.add_argument("--device-threads", type=int, default=None, help="cap on BLAS threads / worker processes")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True, seed=True):
        if config:
            sp.add_argument("--config", help="JSON config file")
        if seed:
            sp.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        sp.add_argument("--device-threads", type=int, default=argparse.SUPPRESS)

    t = sub.add_parser("train", help="train a model on a dataset file")
    common(t)
    t.add_argument("--data")
    t.add_argument("--test-data")
    t.add_argument("--out")
    t.add_argument("--channels", type=int, help="V, for CSV input")
    t.add_argument("--length", type=int, help="L, for CSV input")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="accuracy of a checkpoint on a dataset")
    common(e, config=False, seed=False)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", help="train and test on every dataset in a directory")
    common(b)
    b.add_argument("--data-dir")
    b.add_argument("--out")
    b.add_argument("--heads", default="prototype", help="comma list of heads: prototype,linear")
    b.set_defaults(func=cmd_benchmark)

    i = sub.add_parser("inspect", help="nearest training samples of every prototype")
    common(i, config=False, seed=False)
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--out")
    i.add_argument("--top", type=int, default=5)
    i.set_defaults(func=cmd_inspect)

    s = sub.add_parser("synthetic", help="write a seeded synthetic train/test pair")
    common(s, config=False)
    s.add_argument("--out", required=True)
    s.add_argument("--name", default="Synthetic")
    s.add_argument("--spec", help="JSON file with SyntheticSpec fields")
    s.add_argument("--classes", dest="n_classes", type=int)
    s.add_argument("--n-train", type=int)
    s.add_argument("--n-test", type=int)
    s.add_argument("--channels", dest="V", type=int)
    s.add_argument("--length", dest="L", type=int)
    s.add_argument("--noise", dest="noise_std", type=float)
    s.set_defaults(func=cmd_synthetic)

    st = sub.add_parser("selftest", help="run built-in oracle checks")
    common(st, config=False, seed=False)
    st.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        threads = args.device_threads
        if threads is not None and threads < 1:
            raise CliError("usage", "--device-threads must be >= 1")
        with threadpool_limits(limits=threads):
            return args.func(args)
    except CliError as exc:
        err = exc
    except ConfigError as exc:
        err = CliError("config", str(exc))
    except ParseError as exc:
        err = CliError("parse", str(exc))
    except NumericError as exc:
        err = CliError("numeric", str(exc))
    except CheckpointError as exc:
        err = CliError("checkpoint", str(exc))
    except OSError as exc:
        err = CliError("io", f"{exc.filename or ''}: {exc.strerror or exc}")
    print(f"pdftime: {err.kind}: {_one_line(err)}", file=sys.stderr)
    return err.code


if __name__ == "__main__":
    sys.exit(main())
