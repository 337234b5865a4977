"""Command-line entry point: ``mlasdi {generate,train,evaluate,export}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import metrics
from .config import load_config
from .data import generate_toy, load_snapshots, save_snapshots
from .errors import (
    ConfigError,
    DimensionMismatch,
    FormatError,
    InvalidGrid,
    InvalidTensor,
    NonFiniteLoss,
    NonFiniteState,
    NonUniformTimeGrid,
    ShapeError,
    UnknownExport,
    ZeroNormSlice,
)
from .gp_interp import write_gp_rows
from .rom import predict, train_multistage
from .serialization import load_stack, save_stack, write_losses_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
EXPORTS = ("coefficients", "gp_params", "losses")

log = logging.getLogger("mlasdi")


def _out_dir(args, config):
    return args.out or (config.output if config is not None else ".")


def dataset_split(config):
    """Train and test tensors described by the dataset section."""
    d = config.dataset
    if d["kind"] == "toy":
        train = generate_toy(d["train_amplitudes"], d["nx"], d["nt"])
        test = generate_toy(d["test_amplitudes"], d["nx"], d["nt"]) if d["test_amplitudes"] else None
        return train, test
    if "file" in d:
        full = load_snapshots(d["file"])
        idx = np.asarray(d["train_indices"], dtype=int)
        if idx.size == 0 or idx.min() < 0 or idx.max() >= full.n_params:
            raise ConfigError("dataset.train_indices out of range")
        rest = np.setdiff1d(np.arange(full.n_params), idx)
        return full.subset(idx), (full.subset(rest) if rest.size else None)
    train = load_snapshots(d["train_file"])
    test = load_snapshots(d["test_file"]) if d.get("test_file") else None
    return train, test


def cmd_generate(args):
    config = load_config(args.config)
    out = _out_dir(args, config)
    os.makedirs(out, exist_ok=True)
    train, test = dataset_split(config)
    written = {"train": os.path.join(out, "train.mlsd")}
    save_snapshots(train, written["train"])
    if test is not None:
        written["test"] = os.path.join(out, "test.mlsd")
        save_snapshots(test, written["test"])
    with open(os.path.join(out, "data_manifest.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["split", "file", "n_params", "n_times", "state_dim"])
        for split, tensor in (("train", train), ("test", test)):
            if tensor is not None:
                w.writerow([split, os.path.basename(written[split]), tensor.n_params,
                            tensor.n_times, tensor.state_dim])
    for split, path in written.items():
        print(f"{split}: {path}")
    return EXIT_OK


def cmd_train(args):
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    out = _out_dir(args, config)
    data_path = args.data or os.path.join(config.output, "train.mlsd")
    train = load_snapshots(data_path)
    configs = config.stage_configs()
    for i, c in enumerate(configs):
        if c.architecture[0] != train.state_dim:
            raise ConfigError(f"stages[{i}].architecture input {c.architecture[0]} does not "
                              f"match data state dimension {train.state_dim}")
    stack = train_multistage(train, configs, config.seed)
    stack_dir = args.stack or os.path.join(out, "stack")
    save_stack(stack, stack_dir, config_echo=config.to_dict())
    for k, stage in enumerate(stack.stages):
        print(f"stage {k + 1}: {stage.wall_time:.2f}s, final loss {stage.loss_history[-1][1]:.4e}")
    print(f"total training time: {sum(s.wall_time for s in stack.stages):.2f}s")
    print(f"stack: {stack_dir}")
    return EXIT_OK


def evaluate_stack(stack, data, n_samples=0, seed=0):
    """Per-parameter errors (and std scores when sampling) as an ErrorReport."""
    if data.state_dim != stack.state_dim or data.n_times != stack.n_times:
        raise DimensionMismatch("data and stack disagree on state dim or time grid")
    train_rows = {tuple(p) for p in stack.parameters}
    errors, stds, flags = [], [], []
    for i in range(data.n_params):
        pred = predict(stack, data.parameters[i], data.values[i, 0], n_samples, seed)
        errors.append(metrics.max_relative_error(data.values[i], pred.mean_trajectory))
        stds.append(metrics.prediction_std_summary(pred) if n_samples > 0 else np.nan)
        flags.append(tuple(data.parameters[i]) in train_rows)
    return metrics.ErrorReport(data.parameters, errors, stds, flags)


def cmd_evaluate(args):
    config = load_config(args.config) if args.config else None
    stack_dir = args.stack or os.path.join(_out_dir(args, config), "stack")
    stack = load_stack(stack_dir)
    data_path = args.data or os.path.join(config.output if config else ".", "test.mlsd")
    data = load_snapshots(data_path)
    n_samples = args.samples if args.samples is not None else (config.n_samples if config else 0)
    seed = config.prediction_seed if config else 0
    report = evaluate_stack(stack, data, n_samples, seed)
    out = args.out or stack_dir
    os.makedirs(out, exist_ok=True)
    name = os.path.splitext(os.path.basename(data_path))[0]
    path = os.path.join(out, f"errors_{name}.csv")
    report.to_csv(path)
    s = report.summary()
    print(f"{name}: max={s['max']:.4%} p90={s['p90']:.4%} p75={s['p75']:.4%} "
          f"n={len(report.errors)} -> {path}")
    return EXIT_OK


def export(stack, what, path):
    if what not in EXPORTS:
        raise UnknownExport(f"unknown export '{what}' (choose from {', '.join(EXPORTS)})")
    if what == "losses":
        write_losses_csv(stack, path)
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if what == "coefficients":
            w.writerow(["stage", "param_index", "row", "col", "value"])
            for k, stage in enumerate(stack.stages):
                for i, C in enumerate(stage.coefficients):
                    for (r, c), v in np.ndenumerate(C):
                        w.writerow([k, i, r, c, repr(float(v))])
        else:
            w.writerow(["stage", "j", "k", "kind", "A", "L", "sigma2", "degenerate"])
            for k, stage in enumerate(stack.stages):
                write_gp_rows(w, stage.gp_field, stage=k)


def cmd_export(args):
    if args.what not in EXPORTS:
        raise UnknownExport(f"unknown export '{args.what}' (choose from {', '.join(EXPORTS)})")
    stack = load_stack(args.stack)
    path = args.out or os.path.join(args.stack, f"{args.what}.csv")
    export(stack, args.what, path)
    print(path)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="mlasdi", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write train/test snapshot files")
    g.add_argument("--config", required=True)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a multi-stage model")
    t.add_argument("--config", required=True)
    t.add_argument("--data", help="training MLSD file (default: <output>/train.mlsd)")
    t.add_argument("--out")
    t.add_argument("--stack", help="stack directory (default: <out>/stack)")
    t.add_argument("--seed", type=int)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="write per-parameter error report")
    e.add_argument("--config")
    e.add_argument("--stack")
    e.add_argument("--data")
    e.add_argument("--out")
    e.add_argument("--samples", type=int, help="posterior samples (overrides config)")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("export", help="export coefficients, GP parameters or losses")
    x.add_argument("what")
    x.add_argument("--stack", required=True)
    x.add_argument("--out")
    x.set_defaults(func=cmd_export)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidGrid, UnknownExport) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteLoss, NonFiniteState, ZeroNormSlice) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, FormatError, ShapeError, NonUniformTimeGrid, InvalidTensor) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DimensionMismatch as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
