"""Phase-space types and the built-in separable Hamiltonian systems.

Each built-in system provides the analytic energy H(q, p) = T(p) + V(q)
together with closed-form gradients dT/dp and dV/dq, plus the box from
which initial conditions are drawn. These serve as ground truth for data
generation and as oracles in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError

Array = np.ndarray

BUILTIN_SYSTEMS = ("pendulum", "lotka_volterra", "kepler", "henon_heiles")


@dataclass(frozen=True)
class PhaseState:
    """One point (q, p) of a 2N-dimensional phase space."""

    q: Array
    p: Array

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64).reshape(-1)
        p = np.asarray(self.p, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)
        if q.shape != p.shape or q.size < 1:
            raise DimensionError(f"q and p must share length >= 1, got {q.shape} and {p.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ValueError("phase state components must be finite")

    @property
    def dim(self) -> int:
        return self.q.size


@dataclass(frozen=True)
class HamiltonianSystem:
    """An analytic separable Hamiltonian H(q, p) = T(p) + V(q).

    grad_T and grad_V accept arrays of shape (..., N) and operate on the
    last axis, so they can drive batched integration directly.
    """

    name: str
    dim: int
    kinetic: Callable[[Array], Array]
    potential: Callable[[Array], Array]
    grad_T: Callable[[Array], Array]
    grad_V: Callable[[Array], Array]
    q_box: Array  # (N, 2) per-component [lo, hi]
    p_box: Array
    min_separation: Optional[float] = None
    n_bodies: Optional[int] = None
    space_dim: Optional[int] = None

    def energy(self, q: Array, p: Array) -> Array:
        q = np.asarray(q, dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if q.shape[-1] != self.dim or p.shape[-1] != self.dim:
            raise DimensionError(
                f"{self.name}: expected states of dimension {self.dim}, "
                f"got q{q.shape} p{p.shape}"
            )
        return self.kinetic(p) + self.potential(q)

    def energy_state(self, s: PhaseState) -> float:
        return float(self.energy(s.q, s.p))


def _box(lo: float, hi: float, n: int) -> Array:
    b = np.empty((n, 2))
    b[:, 0] = lo
    b[:, 1] = hi
    return b


def _pendulum() -> HamiltonianSystem:
    # H = p^2/2 - cos(q)
    return HamiltonianSystem(
        name="pendulum",
        dim=1,
        kinetic=lambda p: 0.5 * np.sum(p * p, axis=-1),
        potential=lambda q: -np.sum(np.cos(q), axis=-1),
        grad_T=lambda p: np.asarray(p, dtype=np.float64),
        grad_V=lambda q: np.sin(q),
        q_box=_box(-2.0, 2.0, 1),
        p_box=_box(-2.0, 2.0, 1),
    )


def _lotka_volterra() -> HamiltonianSystem:
    # H = p - e^p + 2q - e^q
    return HamiltonianSystem(
        name="lotka_volterra",
        dim=1,
        kinetic=lambda p: np.sum(p - np.exp(p), axis=-1),
        potential=lambda q: np.sum(2.0 * q - np.exp(q), axis=-1),
        grad_T=lambda p: 1.0 - np.exp(p),
        grad_V=lambda q: 2.0 - np.exp(q),
        q_box=_box(-2.0, 2.0, 1),
        p_box=_box(-2.0, 2.0, 1),
    )


def _kepler() -> HamiltonianSystem:
    # Two bodies in the plane: q = (x1, y1, x2, y2), p likewise.
    # H = sum(p^2)/2 - 1/|r1 - r2|
    def potential(q):
        d = q[..., 0:2] - q[..., 2:4]
        r = np.sqrt(np.sum(d * d, axis=-1))
        return -1.0 / r

    def grad_V(q):
        d = q[..., 0:2] - q[..., 2:4]
        r = np.sqrt(np.sum(d * d, axis=-1, keepdims=True))
        g = d / r**3
        return np.concatenate([g, -g], axis=-1)

    return HamiltonianSystem(
        name="kepler",
        dim=4,
        kinetic=lambda p: 0.5 * np.sum(p * p, axis=-1),
        potential=potential,
        grad_T=lambda p: np.asarray(p, dtype=np.float64),
        grad_V=grad_V,
        q_box=_box(-3.0, 3.0, 4),
        p_box=_box(-2.0, 2.0, 4),
        min_separation=4.0,
        n_bodies=2,
        space_dim=2,
    )


def _henon_heiles() -> HamiltonianSystem:
    # H = (p1^2+p2^2)/2 + (q1^2+q2^2)/2 + q1^2 q2 - q2^3/3
    def potential(q):
        q1, q2 = q[..., 0], q[..., 1]
        return 0.5 * (q1 * q1 + q2 * q2) + q1 * q1 * q2 - q2**3 / 3.0

    def grad_V(q):
        q1, q2 = q[..., 0], q[..., 1]
        return np.stack([q1 + 2.0 * q1 * q2, q2 + q1 * q1 - q2 * q2], axis=-1)

    return HamiltonianSystem(
        name="henon_heiles",
        dim=2,
        kinetic=lambda p: 0.5 * np.sum(p * p, axis=-1),
        potential=potential,
        grad_T=lambda p: np.asarray(p, dtype=np.float64),
        grad_V=grad_V,
        q_box=_box(-0.5, 0.5, 2),
        p_box=_box(-0.5, 0.5, 2),
    )


_FACTORIES = {
    "pendulum": _pendulum,
    "lotka_volterra": _lotka_volterra,
    "kepler": _kepler,
    "henon_heiles": _henon_heiles,
}


def builtin_system(name: str) -> HamiltonianSystem:
    """Return one of the four built-in systems by name."""
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise KeyError(f"unknown system {name!r}; choose from {BUILTIN_SYSTEMS}") from None
