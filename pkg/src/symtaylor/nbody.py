"""Pairwise-composed Hamiltonian learning for planar N-body systems.

A gradient-net pair trained on two-body data is reused for N bodies by
summing its potential gradient over all unordered body pairs with mass
weights m_j * m_k. The kinetic gradient stays analytic (p_j / m_j) by
default; a learned-kinetic option averages the per-body blocks of the
pairwise kinetic net over the pairs containing that body.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .core import HamiltonianSystem, PhaseState, builtin_system
from .datagen import DatasetSpec, generate_dataset
from .errors import ConfigError, DimensionError, NumericError
from .integrators import IntegrationPlan, integrate
from .model import init_net, forward
from .training import ModelPair, TrainConfig, train

Array = np.ndarray


@dataclass(frozen=True)
class NBodyConfig:
    n_body: int
    masses: Optional[Sequence[float]] = None
    space_dim: int = 2

    def __post_init__(self):
        if self.n_body < 2:
            raise ConfigError("need at least 2 bodies")
        m = self.masses
        if m is None:
            m = tuple(1.0 for _ in range(self.n_body))
        else:
            m = tuple(float(x) for x in m)
        if len(m) != self.n_body or any(x <= 0 for x in m):
            raise ConfigError("masses must be n_body positive reals")
        object.__setattr__(self, "masses", m)

    @property
    def dim(self) -> int:
        return self.n_body * self.space_dim


def _pairs(n: int):
    return [(j, k) for j in range(n) for k in range(j + 1, n)]


def nbody_system(cfg: NBodyConfig) -> HamiltonianSystem:
    """Analytic H = sum |p_j|^2 / (2 m_j) - sum_{j<k} m_j m_k / |q_j - q_k|."""
    nb, sd = cfg.n_body, cfg.space_dim
    masses = np.asarray(cfg.masses)
    pair_idx = _pairs(nb)

    def body(x: Array, j: int) -> Array:
        return x[..., j * sd : (j + 1) * sd]

    def kinetic(p):
        total = 0.0
        for j in range(nb):
            pj = body(p, j)
            total = total + np.sum(pj * pj, axis=-1) / (2.0 * masses[j])
        return total

    def _distances(q):
        out = []
        for j, k in pair_idx:
            d = body(q, j) - body(q, k)
            r = np.sqrt(np.sum(d * d, axis=-1))
            if not np.all(r > 0.0):
                raise NumericError("coincident bodies: singular potential")
            out.append((j, k, d, r))
        return out

    def potential(q):
        total = 0.0
        for j, k, _, r in _distances(q):
            total = total - masses[j] * masses[k] / r
        return total

    def grad_V(q):
        g = np.zeros_like(np.asarray(q, dtype=np.float64))
        for j, k, d, r in _distances(q):
            f = masses[j] * masses[k] * d / r[..., None] ** 3
            g[..., j * sd : (j + 1) * sd] += f
            g[..., k * sd : (k + 1) * sd] -= f
        return g

    def grad_T(p):
        g = np.asarray(p, dtype=np.float64).copy()
        for j in range(nb):
            g[..., j * sd : (j + 1) * sd] /= masses[j]
        return g

    box_q = np.tile(np.array([[-3.0, 3.0]]), (cfg.dim, 1))
    box_p = np.tile(np.array([[-2.0, 2.0]]), (cfg.dim, 1))
    return HamiltonianSystem(
        name=f"nbody{nb}",
        dim=cfg.dim,
        kinetic=kinetic,
        potential=potential,
        grad_T=grad_T,
        grad_V=grad_V,
        q_box=box_q,
        p_box=box_p,
        min_separation=4.0,
        n_bodies=nb,
        space_dim=sd,
    )


def compose_pairwise(pair_model: ModelPair, cfg: NBodyConfig, learned_kinetic: bool = False):
    """Gradient providers (gT, gV) on the N-body phase space.

    The potential gradient sums the two-body net over unordered pairs
    j < k, feeding the pair state (q_j, q_k) and adding the j-block to
    body j and the k-block to body k, scaled by m_j * m_k. With two
    unit-mass bodies this reduces exactly to the trained pair model.
    """
    nb, sd = cfg.n_body, cfg.space_dim
    if pair_model.dim != 2 * sd:
        raise DimensionError(
            f"pair model has dim {pair_model.dim}, expected {2 * sd} for pairwise use"
        )
    masses = np.asarray(cfg.masses)
    pair_idx = _pairs(nb)

    def block(x: Array, j: int) -> Array:
        return x[..., j * sd : (j + 1) * sd]

    def gV(q: Array) -> Array:
        q = np.asarray(q, dtype=np.float64)
        g = np.zeros_like(q)
        for j, k in pair_idx:
            pq = np.concatenate([block(q, j), block(q, k)], axis=-1)
            out = masses[j] * masses[k] * forward(pair_model.vq, pq)
            g[..., j * sd : (j + 1) * sd] += out[..., :sd]
            g[..., k * sd : (k + 1) * sd] += out[..., sd:]
        return g

    if learned_kinetic:

        def gT(p: Array) -> Array:
            p = np.asarray(p, dtype=np.float64)
            g = np.zeros_like(p)
            for j, k in pair_idx:
                pp = np.concatenate([block(p, j), block(p, k)], axis=-1)
                out = forward(pair_model.tp, pp)
                g[..., j * sd : (j + 1) * sd] += out[..., :sd]
                g[..., k * sd : (k + 1) * sd] += out[..., sd:]
            if nb > 2:
                g /= nb - 1
            return g

    else:

        def gT(p: Array) -> Array:
            g = np.asarray(p, dtype=np.float64).copy()
            for j in range(nb):
                g[..., j * sd : (j + 1) * sd] /= masses[j]
            return g

    return gT, gV


def pairwise_train_config(seed: int = 0, epochs: int = 100) -> TrainConfig:
    """Two-body training setup: Kepler settings with a 0.08 window, 40 samples."""
    return TrainConfig(
        t_train=0.08,
        epochs=epochs,
        lr0=0.001,
        step_size=10,
        gamma=0.8,
        seed=seed,
        n_train=40,
    )


def train_pairwise(cfg2: TrainConfig, hidden: int = 8, terms: int = 20):
    """Train the two-body interaction model on Kepler-form endpoint data."""
    system = builtin_system("kepler")
    spec = DatasetSpec(
        system="kepler",
        n_samples=cfg2.n_train,
        horizon=cfg2.t_train,
        seed=cfg2.seed,
    )
    dataset = generate_dataset(system, spec)
    val_spec = DatasetSpec(
        system="kepler",
        n_samples=cfg2.n_validation,
        horizon=cfg2.t_train,
        seed=cfg2.seed + 1,
    )
    validation = generate_dataset(system, val_spec)
    rng = np.random.default_rng(np.random.SeedSequence([cfg2.seed, 10]))
    pair = ModelPair(
        tp=init_net(system.dim, hidden, terms, rng),
        vq=init_net(system.dim, hidden, terms, rng),
    )
    return train(pair, dataset, cfg2, validation_pairs=validation)


def predict_nbody(
    pair_model: ModelPair,
    cfg: NBodyConfig,
    s0: PhaseState,
    plan: IntegrationPlan,
    learned_kinetic: bool = False,
):
    """Symplectic rollout of the composed providers; returns (final, trajectory)."""
    if s0.dim != cfg.dim:
        raise DimensionError(f"state dim {s0.dim} != config dim {cfg.dim}")
    gT, gV = compose_pairwise(pair_model, cfg, learned_kinetic=learned_kinetic)
    return integrate(gT, gV, s0, plan, record=True)


def ring_state(cfg: NBodyConfig, radius: float, speed_scale: float = 1.0) -> PhaseState:
    """Equal-mass bodies on a ring with the circular-orbit tangential momenta.

    Keeps pairwise separations roughly constant over a fraction of the
    orbital period, which keeps the composed model inside its training
    regime.
    """
    nb, sd = cfg.n_body, cfg.space_dim
    if sd != 2:
        raise ConfigError("ring_state requires a planar configuration")
    m = cfg.masses[0]
    # Net inward pull on one ring body from the others, in units of 1/R^2.
    lam = sum(1.0 / (4.0 * np.sin(np.pi * k / nb)) for k in range(1, nb))
    v = speed_scale * np.sqrt(m * lam / radius)
    q = np.empty(cfg.dim)
    p = np.empty(cfg.dim)
    for j in range(nb):
        ang = 2.0 * np.pi * j / nb
        q[2 * j : 2 * j + 2] = radius * np.array([np.cos(ang), np.sin(ang)])
        p[2 * j : 2 * j + 2] = m * v * np.array([-np.sin(ang), np.cos(ang)])
    return PhaseState(q=q, p=p)


def write_trajectory_csv(path, cfg: NBodyConfig, plan: IntegrationPlan, states) -> None:
    """Rows: t, then q and p components grouped per body."""
    nb, sd = cfg.n_body, cfg.space_dim
    header = ["t"]
    for j in range(nb):
        header.extend(f"q{j}_{a}" for a in range(sd))
    for j in range(nb):
        header.extend(f"p{j}_{a}" for a in range(sd))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, s in enumerate(states):
            row = [f"{plan.t0 + i * plan.dt:.17g}"]
            row.extend(f"{x:.17g}" for x in s.q)
            row.extend(f"{x:.17g}" for x in s.p)
            writer.writerow(row)
