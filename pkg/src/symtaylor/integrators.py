"""Fourth-order symplectic (Forest-Ruth) and Runge-Kutta time steppers.

The symplectic stepper is generic over the gradient providers gT(p) and
gV(q), so it drives both the analytic systems and the learned networks.
One step applies, for j = 1..4, the drift q <- q + c_j * gT(p) * dt
followed by the kick p <- p - d_j * gV(q) * dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .core import PhaseState
from .errors import NumericError

Array = np.ndarray
GradFn = Callable[[Array], Array]

# Slack applied before flooring the step count, so horizons that are an
# exact multiple of dt up to float roundoff yield the intended count.
_FLOOR_SLACK = 1e-9


@dataclass(frozen=True)
class SymplecticCoefficients:
    c: Tuple[float, float, float, float]
    d: Tuple[float, float, float, float]


def forest_ruth_coefficients() -> SymplecticCoefficients:
    """Closed-form fourth-order composition coefficients (s = 2^(1/3))."""
    s = 2.0 ** (1.0 / 3.0)
    w = 2.0 - s
    c1 = 1.0 / (2.0 * w)
    c2 = (1.0 - s) / (2.0 * w)
    d1 = 1.0 / w
    d2 = -s / w
    return SymplecticCoefficients(c=(c1, c2, c2, c1), d=(d1, d2, d1, 0.0))


_COEFFS = forest_ruth_coefficients()


@dataclass(frozen=True)
class IntegrationPlan:
    """Fixed-step integration window [t0, t_end] with step dt."""

    t0: float
    t_end: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end < self.t0:
            raise ValueError("t_end must be >= t0")

    @property
    def n(self) -> int:
        return int(math.floor((self.t_end - self.t0) / self.dt + _FLOOR_SLACK))


def step_arrays(
    gT: GradFn,
    gV: GradFn,
    q: Array,
    p: Array,
    dt: float,
    trace: Optional[list] = None,
    step_index: Optional[int] = None,
) -> Tuple[Array, Array]:
    """One Forest-Ruth step on arrays of shape (..., N).

    When `trace` is given, appends per-substep (p-at-drift, q-at-kick)
    pairs, exactly the values the reverse pass needs. The kick with
    d_4 = 0 is skipped in both the plain and the traced path so the two
    stay bit-identical.
    """
    for j in range(4):
        c = _COEFFS.c[j]
        d = _COEFFS.d[j]
        p_in = p
        q = q + c * dt * gT(p)
        q_in = q
        if d != 0.0:
            p = p - d * dt * gV(q)
        if trace is not None:
            trace.append((p_in, q_in))
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise NumericError(
                f"non-finite state after substep {j + 1}"
                + (f" of step {step_index}" if step_index is not None else ""),
                step=step_index,
                substep=j + 1,
            )
    return q, p


def symplectic_step(gT: GradFn, gV: GradFn, s: PhaseState, dt: float) -> PhaseState:
    q, p = step_arrays(gT, gV, s.q, s.p, dt)
    return PhaseState(q=q, p=p)


def integrate(
    gT: GradFn,
    gV: GradFn,
    s0: PhaseState,
    plan: IntegrationPlan,
    record: bool = False,
):
    """Apply exactly plan.n symplectic steps from s0.

    Returns the final state, or (final, trajectory) with all n+1 states
    when record is set.
    """
    q, p = s0.q, s0.p
    states: List[PhaseState] = [s0]
    for i in range(plan.n):
        q, p = step_arrays(gT, gV, q, p, plan.dt, step_index=i)
        if record:
            states.append(PhaseState(q=q, p=p))
    final = states[-1] if record else PhaseState(q=q, p=p)
    if record:
        return final, states
    return final


def rk4_step_arrays(
    field: Callable[[Array, Array], Tuple[Array, Array]],
    q: Array,
    p: Array,
    dt: float,
) -> Tuple[Array, Array]:
    """Classical RK4 on the joint field (q, p) -> (dq, dp)."""
    k1q, k1p = field(q, p)
    k2q, k2p = field(q + 0.5 * dt * k1q, p + 0.5 * dt * k1p)
    k3q, k3p = field(q + 0.5 * dt * k2q, p + 0.5 * dt * k2p)
    k4q, k4p = field(q + dt * k3q, p + dt * k3p)
    qn = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    pn = p + (dt / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    if not (np.all(np.isfinite(qn)) and np.all(np.isfinite(pn))):
        raise NumericError("non-finite state after RK4 step")
    return qn, pn


def rk4_step(field, s: PhaseState, dt: float) -> PhaseState:
    q, p = rk4_step_arrays(field, s.q, s.p, dt)
    return PhaseState(q=q, p=p)


def rk4_integrate(field, s0: PhaseState, plan: IntegrationPlan, record: bool = False):
    q, p = s0.q, s0.p
    states = [s0]
    for i in range(plan.n):
        try:
            q, p = rk4_step_arrays(field, q, p, plan.dt)
        except NumericError as e:
            e.step = i
            raise
        if record:
            states.append(PhaseState(q=q, p=p))
    final = states[-1] if record else PhaseState(q=q, p=p)
    if record:
        return final, states
    return final


def hamiltonian_field(gT: GradFn, gV: GradFn):
    """Joint vector field (dq, dp) = (gT(p), -gV(q)) for RK4."""

    def field(q: Array, p: Array):
        return gT(p), -gV(q)

    return field
