"""Command-line driver: gen-data, train, eval, bench, tune.

Exit codes: 0 success, 2 usage or parameter error, 3 data or format error,
4 tuning finished without a feasible trial.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .complexity import CostQuery, inference_cost, retraining_cost, training_cost
from .core import HDCError, LabelError, ParameterError, ShapeError
from .encoder import EncoderConfig, EncoderKind, build_basis, encode_batch
from .instrumentation import EnergyModel, OpCounter, Stage, energy, measure_time, scope
from .model import DEFAULT_EPOCHS, fit, infer_batch
from .modelfile import ModelFormatError, load_model, save_model
from .synthdata import (
    STD_FLOOR,
    Dataset,
    DatasetFormatError,
    Split,
    gen_image_task,
    gen_signal_task,
    read_dataset,
    split,
    standardize,
    write_dataset,
)
from .tuner import Constraints, SearchSpace, Theta, best_feasible, run, train_and_score

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _dims(text: str) -> list[int]:
    try:
        dims = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad dimension list {text!r}") from None
    if not dims:
        raise argparse.ArgumentTypeError("empty dimension list")
    return dims


def _scaler_path(model_path) -> Path:
    return Path(str(model_path) + ".scaler.json")


def _write_json(path, payload: dict) -> None:
    line = json.dumps(payload)
    if path is None:
        print(line)
    else:
        Path(path).write_text(line + "\n")


def _standardized_split(ds: Dataset, fraction: float, seed: int) -> Split:
    sp = split(ds, fraction, seed)
    return Split(standardize(sp.train), standardize(sp.train, sp.test), sp.fraction, sp.train_rows, sp.test_rows)


def cmd_gen_data(args) -> int:
    if args.task == "signal":
        ds = gen_signal_task(args.samples, args.seed)
    else:
        ds = gen_image_task(args.samples, args.side, args.seed)
    write_dataset(ds, args.out)
    print(json.dumps({"out": str(args.out), "N": ds.N, "J": ds.J, "L": ds.L, "provenance": ds.provenance}))
    return EXIT_OK


def cmd_train(args) -> int:
    ds = read_dataset(args.data)
    data = _standardized_split(ds, args.test_frac, args.seed)
    theta = Theta(args.encoder, args.dim, args.sigma)
    EncoderConfig(theta.kind, theta.D, theta.sigma_b, args.seed)  # validate before the work starts
    metrics, memory, _ = train_and_score(theta, data, epochs=args.epochs, rep=args.rep, seed=args.seed,
                                         early_stop=False)
    if args.model_out:
        save_model(memory, args.model_out)
        # the model file has no slot for input scaling, so the train-split
        # statistics go to a sidecar that eval picks up
        raw = ds.subset(data.train_rows).features.astype(np.float64)
        scaler = {"mean": raw.mean(axis=0).tolist(), "std": np.maximum(raw.std(axis=0), STD_FLOOR).tolist()}
        _scaler_path(args.model_out).write_text(json.dumps(scaler))
    payload = metrics.as_dict()
    payload["config"] = {"kind": theta.kind.value, "dim": theta.D, "sigma_b": theta.sigma_b,
                         "epochs": args.epochs, "seed": args.seed}
    _write_json(args.metrics_out, payload)
    return EXIT_OK


def cmd_eval(args) -> int:
    memory, basis = load_model(args.model)
    ds = read_dataset(args.data)
    if ds.J != basis.J:
        raise ShapeError(f"model expects J={basis.J} features but data has J={ds.J}")
    if ds.n_classes != memory.L:
        raise LabelError(f"model has L={memory.L} classes but data declares L={ds.n_classes}")
    X = ds.features
    scaler = _scaler_path(args.model)
    if scaler.exists():
        stats = json.loads(scaler.read_text())
        X = ((X - np.asarray(stats["mean"])) / np.asarray(stats["std"])).astype(np.float32)

    def infer_all():
        return infer_batch(memory, encode_batch(basis, X))[0]

    with scope(Stage.INFER) as ops:
        pred = infer_all()
    _, seconds = measure_time(infer_all, repeat=args.rep)
    acc = float(np.mean(pred == ds.labels)) if ds.N else 0.0
    cfg = memory.config
    payload = {
        "accuracy": acc,
        "inference_time_ms": 1e3 * seconds,
        "train_time_s": 0.0,
        "energy_j": 0.0,
        "ops": {s.value: (ops if s is Stage.INFER else OpCounter()).as_dict() for s in Stage},
        "config": {"kind": cfg.kind.value, "dim": cfg.D, "sigma_b": cfg.sigma_b, "epochs": None, "seed": cfg.seed},
    }
    _write_json(args.metrics_out, payload)
    return EXIT_OK


def bench_rows(data: Split, dims, kind: EncoderKind, sigma: float, epochs: int, seed: int, rep: int = 5):
    """One row per dimension: timings, energy proxy, measured vs analytic op totals."""
    rows = []
    model = EnergyModel()
    J, L = data.train.J, data.train.n_classes
    n_train, n_test = data.train.N, data.test.N
    for D in dims:
        config = EncoderConfig(kind, D, sigma, seed)
        basis = build_basis(config, J)
        (memory, stats, _), t_train = measure_time(fit, data.train, config, epochs, False, basis)

        def infer_all():
            return infer_batch(memory, encode_batch(basis, data.test.features))

        with scope(Stage.INFER) as infer_ops:
            infer_all()
        _, t_infer = measure_time(infer_all, repeat=rep)

        train_ops = stats.ops[Stage.TRAIN.value]
        retrain_ops = stats.ops[Stage.RETRAIN.value]
        measured = train_ops.arithmetic + retrain_ops.arithmetic + infer_ops.arithmetic
        q = CostQuery(J=J, D=D, L=L, N=n_train, P=stats.P, kind=kind, epochs=stats.epochs_run)
        analytic = (
            training_cost(q).total
            + retraining_cost(q, cached=True).total
            + n_test * inference_cost(q).total
        )
        rows.append({
            "dim": D,
            "kind": kind.value,
            "t_infer_ms": 1e3 * t_infer,
            "t_train_s": t_train,
            "energy_j": energy(model, train_ops + retrain_ops),
            "ops_measured": measured,
            "ops_analytic": analytic,
            "match": "PASS" if measured == analytic else "FAIL",
        })
    return rows


BENCH_COLUMNS = ["dim", "kind", "t_infer_ms", "t_train_s", "energy_j", "ops_measured", "ops_analytic", "match"]


def cmd_bench(args) -> int:
    if args.task == "signal":
        ds = gen_signal_task(args.samples, args.seed)
    else:
        ds = gen_image_task(args.samples, args.side, args.seed)
    data = _standardized_split(ds, args.test_frac, args.seed)
    rows = bench_rows(data, args.dims, EncoderKind(args.encoder), args.sigma, args.epochs, args.seed, args.rep)
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            out.close()
    return EXIT_OK if all(r["match"] == "PASS" for r in rows) else EXIT_DATA


def cmd_tune(args) -> int:
    ds = read_dataset(args.data)
    data = _standardized_split(ds, args.test_frac, args.seed)
    constraints = Constraints(args.acc_min, args.infer_max_ms, args.train_max_s, args.energy_max_j)
    space = SearchSpace(kinds=tuple(args.kinds), D_range=(args.dim_min, args.dim_max),
                        sigma_range=(args.sigma_min, args.sigma_max))
    trials, front = run(space, constraints, data, episodes=args.episodes, seed=args.seed,
                        log_path=args.out, resume=args.resume, epochs=args.epochs, rep=args.rep)
    best = best_feasible(trials)
    summary = {
        "episodes": len(trials),
        "feasible": sum(t.feasible for t in trials),
        "front": front.indices,
        "best": None if best is None else best.to_json(),
        # unbounded limits are written as null
        "constraints": {k: (v if math.isfinite(v) else None) for k, v in (
            ("acc_min", args.acc_min), ("infer_max_ms", args.infer_max_ms),
            ("train_max_s", args.train_max_s), ("energy_max_j", args.energy_max_j))},
        "seed": args.seed,
    }
    text = json.dumps(summary)
    print(text)
    if args.summary_out:
        Path(args.summary_out).write_text(text + "\n")
    return EXIT_OK if best is not None else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hdctune", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset (HDCD)")
    g.add_argument("--task", choices=["signal", "image"], required=True)
    g.add_argument("--samples", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--side", type=int, default=16, help="image side length (image task)")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="fit a model and report metrics")
    t.add_argument("--data", required=True)
    t.add_argument("--encoder", choices=["rp", "rff"], default="rff")
    t.add_argument("--dim", type=int, required=True)
    t.add_argument("--sigma", type=float, default=1.0)
    t.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    t.add_argument("--test-frac", type=float, default=0.3)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--rep", type=_positive_int, default=5, help="timing repetitions")
    t.add_argument("--model-out")
    t.add_argument("--metrics-out")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score a saved model on a dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--rep", type=_positive_int, default=5)
    e.add_argument("--metrics-out")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="latency and op-count sweep over D")
    b.add_argument("--dims", type=_dims, required=True)
    b.add_argument("--task", choices=["signal", "image"], default="image")
    b.add_argument("--samples", type=int, default=400)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--side", type=int, default=16)
    b.add_argument("--encoder", choices=["rp", "rff"], default="rp")
    b.add_argument("--sigma", type=float, default=1.0)
    b.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    b.add_argument("--test-frac", type=float, default=0.3)
    b.add_argument("--rep", type=_positive_int, default=5)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    u = sub.add_parser("tune", help="constrained Bayesian search")
    u.add_argument("--data", required=True)
    u.add_argument("--episodes", type=int, default=50)
    u.add_argument("--acc-min", type=float, default=0.0)
    u.add_argument("--infer-max-ms", type=float, default=math.inf)
    u.add_argument("--train-max-s", type=float, default=math.inf)
    u.add_argument("--energy-max-j", type=float, default=math.inf)
    u.add_argument("--seed", type=int, default=0)
    u.add_argument("--out", required=True, help="trial log (JSON lines)")
    u.add_argument("--summary-out")
    u.add_argument("--resume", action="store_true", help="continue from an existing trial log")
    u.add_argument("--kinds", nargs="+", choices=["rp", "rff"], default=["rp", "rff"])
    u.add_argument("--dim-min", type=int, default=100)
    u.add_argument("--dim-max", type=int, default=50000)
    u.add_argument("--sigma-min", type=float, default=0.01)
    u.add_argument("--sigma-max", type=float, default=2.0)
    u.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    u.add_argument("--test-frac", type=float, default=0.3)
    u.add_argument("--rep", type=_positive_int, default=5)
    u.set_defaults(func=cmd_tune)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DatasetFormatError, ModelFormatError, ShapeError, LabelError, FileNotFoundError) as exc:
        print(f"hdctune: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ParameterError, HDCError, ValueError) as exc:
        print(f"hdctune: parameter error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
