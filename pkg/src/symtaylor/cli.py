"""Command-line surface: gen, train, eval, ablate, nbody.

Every command is a pure function of (config file, seed): reruns with the
same inputs produce byte-identical output files. Config files are JSON;
per-system defaults follow the benchmark setups and any field can be
overridden.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import datagen, evaluate, nbody as nbody_mod
from .core import BUILTIN_SYSTEMS, PhaseState, builtin_system
from .datagen import DatasetSpec, generate_dataset, read_dataset, write_dataset
from .errors import ConfigError, SymtaylorError
from .integrators import IntegrationPlan, integrate, symplectic_step
from .model import ACT_RELU, ACT_TAYLOR, forward, init_net
from .training import (
    ENGINE_ADJOINT,
    ENGINE_BACKPROP,
    LOSS_L1,
    LOSS_MSE,
    ModelPair,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    train,
    write_history,
)

# Benchmark training setups, per system.
SYSTEM_DEFAULTS = {
    "pendulum": dict(
        t_train=0.01, t_predict=20 * math.pi, n_train=15, epochs=100,
        lr0=0.002, step_size=10, gamma=0.8, terms=8, hidden=16,
    ),
    "lotka_volterra": dict(
        t_train=0.01, t_predict=20 * math.pi, n_train=25, epochs=150,
        lr0=0.003, step_size=10, gamma=0.8, terms=8, hidden=8,
    ),
    "kepler": dict(
        t_train=0.01, t_predict=20 * math.pi, n_train=25, epochs=50,
        lr0=0.001, step_size=10, gamma=0.8, terms=20, hidden=8,
    ),
    "henon_heiles": dict(
        t_train=0.01, t_predict=10.0, n_train=25, epochs=100,
        lr0=0.001, step_size=10, gamma=0.8, terms=12, hidden=16,
    ),
}

STREAM_MODEL_INIT = 10


def max_threads() -> int:
    """Parallelism cap from SYMTAYLOR_THREADS (all commands run serially,
    so any cap >= 1 is honored trivially)."""
    raw = os.environ.get("SYMTAYLOR_THREADS")
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"SYMTAYLOR_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("SYMTAYLOR_THREADS must be >= 1")
    return n


def load_config(path) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return doc


def resolve(cfg: dict, args, require_system: bool = True) -> dict:
    """Merge per-system defaults, config file, and CLI overrides."""
    merged = dict(cfg)
    if args.system:
        merged["system"] = args.system
    if args.seed is not None:
        merged["seed"] = args.seed
    merged.setdefault("seed", 0)
    if require_system:
        system = merged.get("system")
        if system not in SYSTEM_DEFAULTS:
            raise ConfigError(f"system must be one of {BUILTIN_SYSTEMS}, got {system!r}")
        for key, val in SYSTEM_DEFAULTS[system].items():
            merged.setdefault(key, val)
    return merged


def train_config_from(merged: dict) -> TrainConfig:
    return TrainConfig(
        t_train=merged["t_train"],
        epochs=merged["epochs"],
        lr0=merged["lr0"],
        step_size=merged["step_size"],
        gamma=merged["gamma"],
        dt=merged.get("dt"),
        loss=merged.get("loss", LOSS_L1),
        seed=merged["seed"],
        n_train=merged["n_train"],
        n_validation=merged.get("n_validation", 100),
        batch_size=merged.get("batch_size", 1),
    )


def init_pair(dim: int, hidden: int, terms: int, seed: int, activation: str = ACT_TAYLOR) -> ModelPair:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), STREAM_MODEL_INIT]))
    return ModelPair(
        tp=init_net(dim, hidden, terms, rng, activation=activation),
        vq=init_net(dim, hidden, terms, rng, activation=activation),
    )


def _dataset_specs(merged: dict):
    common = dict(
        system=merged["system"],
        horizon=merged["t_train"],
        gt_dt=merged.get("gt_dt", 1e-3),
        seed=merged["seed"],
    )
    noise = dict(
        noise_std_q=merged.get("noise_std_q", 0.0),
        noise_std_p=merged.get("noise_std_p", 0.0),
    )
    train_spec = DatasetSpec(n_samples=merged["n_train"], **common, **noise)
    val_spec = DatasetSpec(n_samples=merged.get("n_validation", 100), **{**common, "seed": merged["seed"] + 1}, **noise)
    test_spec = DatasetSpec(n_samples=merged.get("n_test", 100), **{**common, "seed": merged["seed"] + 2})
    return train_spec, val_spec, test_spec


def cmd_gen(args) -> None:
    merged = resolve(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system = builtin_system(merged["system"])
    for name, spec in zip(("train", "validation", "test"), _dataset_specs(merged)):
        write_dataset(out / f"{name}.csv", generate_dataset(system, spec))


def cmd_train(args) -> None:
    merged = resolve(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system = builtin_system(merged["system"])
    cfg = train_config_from(merged)
    train_spec, val_spec, _ = _dataset_specs(merged)
    if "train_data" in merged:
        train_set = read_dataset(merged["train_data"])
    else:
        train_set = generate_dataset(system, train_spec)
    if "validation_data" in merged:
        val_set = read_dataset(merged["validation_data"])
    else:
        val_set = generate_dataset(system, val_spec)
    pair = init_pair(
        system.dim,
        merged["hidden"],
        merged["terms"],
        merged["seed"],
        activation=merged.get("activation", ACT_TAYLOR),
    )
    pair, history = train(pair, train_set, cfg, validation_pairs=val_set, engine=args.grad_engine)
    save_checkpoint(out / "checkpoint.json", pair, cfg)
    write_history(out / "history.csv", history)


def cmd_eval(args) -> None:
    merged = resolve(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    system = builtin_system(merged["system"])
    if "checkpoint" not in merged:
        raise ConfigError("eval config needs a 'checkpoint' path")
    pair = load_checkpoint(merged["checkpoint"])
    if "test_data" in merged:
        test_set = read_dataset(merged["test_data"])
    else:
        _, _, test_spec = _dataset_specs(merged)
        test_set = generate_dataset(system, test_spec)
    dt = merged.get("eval_dt", 0.01)
    report = evaluate.prediction_errors(pair, system, test_set, merged["t_predict"], dt)
    gT = lambda x: forward(pair.tp, x)
    gV = lambda x: forward(pair.vq, x)
    defect = evaluate.symplecticity_defect(
        lambda s, h: symplectic_step(gT, gV, s, h), test_set[0].initial, dt
    )
    evaluate.write_report_csv(out / "report.csv", report)
    evaluate.write_summary_json(out / "summary.json", report, defect)


ABLATION_AXES = {
    "activation": [ACT_TAYLOR, ACT_RELU],
    "loss": [LOSS_L1, LOSS_MSE],
    "hidden_width": [8, 16, 32],
    "dt": [0.002, 0.01, 0.02, 0.04],
}


def cmd_ablate(args) -> None:
    merged = resolve(load_config(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    axis = merged.get("axis")
    if axis not in ABLATION_AXES:
        raise ConfigError(f"axis must be one of {sorted(ABLATION_AXES)}, got {axis!r}")
    values = merged.get("values", ABLATION_AXES[axis])
    system = builtin_system(merged["system"])
    histories = {}
    for value in values:
        run = dict(merged)
        if axis == "activation":
            run["activation"] = value
        elif axis == "loss":
            run["loss"] = value
        elif axis == "hidden_width":
            run["hidden"] = int(value)
        elif axis == "dt":
            run["dt"] = float(value)
        cfg = train_config_from(run)
        train_spec, val_spec, _ = _dataset_specs(run)
        train_set = generate_dataset(system, train_spec)
        val_set = generate_dataset(system, val_spec)
        pair = init_pair(
            system.dim, run["hidden"], run["terms"], run["seed"],
            activation=run.get("activation", ACT_TAYLOR),
        )
        _, history = train(pair, train_set, cfg, validation_pairs=val_set, engine=args.grad_engine)
        histories[str(value)] = history
    epochs = merged["epochs"]
    with open(out / f"ablation_{axis}.csv", "w", newline="") as fh:
        import csv as _csv

        writer = _csv.writer(fh)
        cols = ["epoch"]
        for v in histories:
            cols.extend([f"train_{v}", f"validation_{v}"])
        writer.writerow(cols)
        for e in range(epochs):
            row = [e]
            for hist in histories.values():
                row.append(f"{hist[e].train_loss:.17g}")
                row.append(f"{hist[e].validation_loss:.17g}")
            writer.writerow(row)


def cmd_nbody(args) -> None:
    merged = resolve(load_config(args.config), args, require_system=False)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = nbody_mod.NBodyConfig(
        n_body=merged.get("n_body", 3),
        masses=merged.get("masses"),
    )
    if "checkpoint" in merged:
        pair = load_checkpoint(merged["checkpoint"])
    else:
        tc = nbody_mod.pairwise_train_config(
            seed=merged["seed"], epochs=merged.get("epochs", 100)
        )
        pair, history = nbody_mod.train_pairwise(tc)
        save_checkpoint(out / "pair_checkpoint.json", pair, tc)
        write_history(out / "pair_history.csv", history)
    s0 = nbody_mod.ring_state(cfg, radius=merged.get("radius", 3.0))
    plan = IntegrationPlan(
        t0=0.0, t_end=merged.get("t_predict", 2 * math.pi), dt=merged.get("eval_dt", 0.01)
    )
    final, states = nbody_mod.predict_nbody(pair, cfg, s0, plan)
    nbody_mod.write_trajectory_csv(out / "trajectory.csv", cfg, plan, states)

    system = nbody_mod.nbody_system(cfg)
    _, truth = integrate(system.grad_T, system.grad_V, s0, plan, record=True)
    errs = [
        float(np.abs(a.q - b.q).sum() + np.abs(a.p - b.p).sum())
        for a, b in zip(states[1:], truth[1:])
    ]
    gT, gV = nbody_mod.compose_pairwise(pair, cfg)
    defect = evaluate.symplecticity_defect(
        lambda s, h: symplectic_step(gT, gV, s, h), s0, plan.dt
    )
    with open(out / "nbody_report.json", "w") as fh:
        json.dump(
            {
                "n_body": cfg.n_body,
                "mean_step_error": float(np.mean(errs)),
                "max_step_error": float(np.max(errs)),
                "symplecticity_defect": defect,
                "final_energy": system.energy_state(final),
                "initial_energy": system.energy_state(s0),
            },
            fh,
            sort_keys=True,
            indent=1,
        )
        fh.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="symtaylor",
        description="Structure-preserving learning of separable Hamiltonian dynamics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("gen", cmd_gen),
        ("train", cmd_train),
        ("eval", cmd_eval),
        ("ablate", cmd_ablate),
        ("nbody", cmd_nbody),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON run config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, required=True, help="output directory")
        p.add_argument("--system", type=str, default=None, choices=BUILTIN_SYSTEMS)
        p.add_argument(
            "--grad-engine",
            type=str,
            default=ENGINE_BACKPROP,
            choices=(ENGINE_BACKPROP, ENGINE_ADJOINT),
        )
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        max_threads()
        args.fn(args)
    except (SymtaylorError, OSError, KeyError, ValueError) as e:
        json.dump({"error": type(e).__name__, "message": str(e)}, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
