"""Endpoint-pair dataset generation, noise injection, and CSV I/O.

Each sample stores only the two endpoints of a ground-truth trajectory:
the random initial state and the state after integrating the analytic
system over the horizon with the fourth-order symplectic scheme.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .core import HamiltonianSystem, PhaseState
from .errors import ConfigError, NumericError
from .integrators import IntegrationPlan, integrate

Array = np.ndarray

# Sub-stream tags so data, init, and noise draws never share a stream.
STREAM_DATA = 0
STREAM_INIT = 1
STREAM_NOISE = 2

_MAX_REJECTIONS = 100_000


@dataclass(frozen=True)
class SamplePair:
    """One endpoint-only training record ((q0, p0), (qn, pn))."""

    initial: PhaseState
    final: PhaseState

    def __post_init__(self):
        if self.initial.dim != self.final.dim:
            raise ConfigError("initial and final states must share dim")


@dataclass(frozen=True)
class DatasetSpec:
    system: str
    n_samples: int
    horizon: float
    gt_dt: float = 1e-3
    noise_std_q: float = 0.0
    noise_std_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 0:
            raise ConfigError("n_samples must be >= 0")
        if self.horizon > 0 and self.gt_dt > self.horizon:
            raise ConfigError("gt_dt must not exceed the horizon")
        if not (np.isfinite(self.noise_std_q) and np.isfinite(self.noise_std_p)):
            raise ConfigError("noise stds must be finite")
        if self.noise_std_q < 0 or self.noise_std_p < 0:
            raise ConfigError("noise stds must be >= 0")


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic named RNG stream derived from (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def sample_initial(system: HamiltonianSystem, rng: np.random.Generator) -> PhaseState:
    """Uniform draw from the system's box; rejection keeps bodies apart."""
    for _ in range(_MAX_REJECTIONS):
        q = rng.uniform(system.q_box[:, 0], system.q_box[:, 1])
        p = rng.uniform(system.p_box[:, 0], system.p_box[:, 1])
        if system.min_separation is None or _separated(system, q):
            return PhaseState(q=q, p=p)
    raise ConfigError(
        f"{system.name}: could not satisfy min_separation "
        f"{system.min_separation} within {_MAX_REJECTIONS} draws"
    )


def _separated(system: HamiltonianSystem, q: Array) -> bool:
    nb, sd = system.n_bodies, system.space_dim
    pos = q.reshape(nb, sd)
    for j in range(nb):
        for k in range(j + 1, nb):
            if np.linalg.norm(pos[j] - pos[k]) < system.min_separation:
                return False
    return True


def generate_dataset(system: HamiltonianSystem, spec: DatasetSpec) -> List[SamplePair]:
    """Ground-truth endpoint pairs; per-sample RNG streams keyed by index."""
    plan = IntegrationPlan(t0=0.0, t_end=spec.horizon, dt=spec.gt_dt)
    out: List[SamplePair] = []
    for idx in range(spec.n_samples):
        rng = substream(spec.seed, STREAM_DATA, idx)
        s0 = sample_initial(system, rng)
        try:
            s1 = integrate(system.grad_T, system.grad_V, s0, plan)
        except NumericError as e:
            raise NumericError(f"sample {idx}: {e}", step=e.step, substep=e.substep) from e
        out.append(SamplePair(initial=s0, final=s1))
    if spec.noise_std_q > 0.0 or spec.noise_std_p > 0.0:
        out = add_noise(out, spec.noise_std_q, spec.noise_std_p, substream(spec.seed, STREAM_NOISE))
    return out


def add_noise(
    dataset: List[SamplePair],
    std_q: float,
    std_p: float,
    rng: np.random.Generator,
) -> List[SamplePair]:
    """Gaussian noise on the target endpoints only; initial states stay clean."""
    if std_q < 0 or std_p < 0:
        raise ConfigError("noise stds must be >= 0")
    if std_q == 0.0 and std_p == 0.0:
        return list(dataset)
    out = []
    for pair in dataset:
        qn = pair.final.q + std_q * rng.standard_normal(pair.final.dim)
        pn = pair.final.p + std_p * rng.standard_normal(pair.final.dim)
        out.append(SamplePair(initial=pair.initial, final=PhaseState(q=qn, p=pn)))
    return out


# --- CSV I/O -----------------------------------------------------------------


def _header(dim: int) -> List[str]:
    cols = []
    for tag in ("q0", "p0", "qn", "pn"):
        cols.extend(f"{tag}_{i}" for i in range(dim))
    return cols


def write_dataset(path, dataset: List[SamplePair]) -> None:
    if not dataset:
        raise ConfigError("refusing to write an empty dataset")
    dim = dataset[0].initial.dim
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_header(dim))
        for pair in dataset:
            row = np.concatenate([pair.initial.q, pair.initial.p, pair.final.q, pair.final.p])
            writer.writerow([f"{x:.17g}" for x in row])


def read_dataset(path) -> List[SamplePair]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) % 4 != 0:
            raise ConfigError(f"{path}: expected 4*N columns, got {len(header)}")
        dim = len(header) // 4
        out = []
        for row in reader:
            vals = np.array([float(x) for x in row])
            out.append(
                SamplePair(
                    initial=PhaseState(q=vals[0:dim], p=vals[dim : 2 * dim]),
                    final=PhaseState(q=vals[2 * dim : 3 * dim], p=vals[3 * dim : 4 * dim]),
                )
            )
        return out
