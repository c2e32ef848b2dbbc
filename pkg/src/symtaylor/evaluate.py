"""Long-horizon prediction metrics and structure-defect diagnostics.

Prediction error at step n_t is the test-set mean of the per-sample L1
state deviation between the learned rollout and the analytic ground
truth on the same time grid; the scalar score is its average over the
horizon.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import HamiltonianSystem, PhaseState
from .errors import NumericError
from .integrators import IntegrationPlan, step_arrays
from .model import TaylorGradNet, jacobian
from .training import ModelPair, rollout_arrays
from . import model as tmodel

Array = np.ndarray


@dataclass(frozen=True)
class PredictionReport:
    per_step: Array  # epsilon at steps 1..N_T
    mean: float
    energy: Array  # test-set mean analytic H of the predicted states, steps 0..N_T
    times: Array
    dt: float
    t_predict: float
    complete: bool = True

    @property
    def n_steps(self) -> int:
        return self.per_step.size


def prediction_errors(
    pair: ModelPair,
    system: HamiltonianSystem,
    testset,
    t_predict: float,
    dt: float,
) -> PredictionReport:
    """Roll the model and the analytic ground truth over the same grid."""
    if len(testset) == 0:
        raise ValueError("empty test set")
    q = np.stack([s.initial.q for s in testset])
    p = np.stack([s.initial.p for s in testset])
    qg, pg = q.copy(), p.copy()
    plan = IntegrationPlan(t0=0.0, t_end=t_predict, dt=dt)
    gT = lambda x: tmodel.forward(pair.tp, x)
    gV = lambda x: tmodel.forward(pair.vq, x)

    eps = np.empty(plan.n)
    energy = np.empty(plan.n + 1)
    energy[0] = float(np.mean(system.energy(q, p)))
    complete = True
    n_done = plan.n
    for i in range(plan.n):
        try:
            q, p = step_arrays(gT, gV, q, p, dt, step_index=i)
            qg, pg = step_arrays(system.grad_T, system.grad_V, qg, pg, dt, step_index=i)
        except NumericError:
            complete = False
            n_done = i
            break
        eps[i] = float(np.mean(np.abs(p - pg).sum(axis=-1) + np.abs(q - qg).sum(axis=-1)))
        energy[i + 1] = float(np.mean(system.energy(q, p)))
    eps = eps[:n_done]
    energy = energy[: n_done + 1]
    return PredictionReport(
        per_step=eps,
        mean=float(eps.mean()) if eps.size else float("nan"),
        energy=energy,
        times=dt * np.arange(n_done + 1),
        dt=dt,
        t_predict=t_predict,
        complete=complete,
    )


def energy_series(
    system: HamiltonianSystem,
    s0: PhaseState,
    plan: IntegrationPlan,
    gT: Optional[Callable] = None,
    gV: Optional[Callable] = None,
) -> Array:
    """Analytic H along a trajectory rolled out with the given providers
    (the system's own gradients by default)."""
    gT = gT if gT is not None else system.grad_T
    gV = gV if gV is not None else system.grad_V
    q, p = s0.q, s0.p
    H = np.empty(plan.n + 1)
    H[0] = float(system.energy(q, p))
    for i in range(plan.n):
        q, p = step_arrays(gT, gV, q, p, plan.dt, step_index=i)
        H[i + 1] = float(system.energy(q, p))
    return H


def energy_drift_slope(H: Array, dt: float) -> float:
    """Least-squares linear trend of H(t), per unit time."""
    t = dt * np.arange(H.size)
    slope = np.polyfit(t, H, 1)[0]
    return float(slope)


def finite_difference_jacobian(step_map, s: PhaseState, dt: float, fd_h: float = 1e-5) -> Array:
    """Central-difference Jacobian of a one-step map on the 2N state (q, p)."""
    n = s.dim
    x0 = np.concatenate([s.q, s.p])
    J = np.empty((2 * n, 2 * n))
    for k in range(2 * n):
        h = fd_h * (1.0 + abs(x0[k]))
        xp = x0.copy()
        xm = x0.copy()
        xp[k] += h
        xm[k] -= h
        sp = step_map(PhaseState(q=xp[:n], p=xp[n:]), dt)
        sm = step_map(PhaseState(q=xm[:n], p=xm[n:]), dt)
        J[:, k] = (np.concatenate([sp.q, sp.p]) - np.concatenate([sm.q, sm.p])) / (2.0 * h)
    return J


def symplectic_form(n: int) -> Array:
    omega = np.zeros((2 * n, 2 * n))
    omega[:n, n:] = np.eye(n)
    omega[n:, :n] = -np.eye(n)
    return omega


def symplecticity_defect(step_map, s: PhaseState, dt: float, fd_h: float = 1e-5) -> float:
    """max |J^T Omega J - Omega| for the finite-difference Jacobian of one step."""
    if not 1e-7 <= fd_h <= 1e-4:
        raise ValueError("fd_h must lie in [1e-7, 1e-4]")
    J = finite_difference_jacobian(step_map, s, dt, fd_h)
    omega = symplectic_form(s.dim)
    return float(np.max(np.abs(J.T @ omega @ J - omega)))


def symmetry_defect(net: TaylorGradNet, x: Array) -> float:
    J = jacobian(net, x)
    return float(np.max(np.abs(J - J.T)))


# --- report files ------------------------------------------------------------


def write_report_csv(path, report: PredictionReport) -> None:
    """Rows: step index, t, epsilon at that step, mean analytic H."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "t", "epsilon", "H"])
        for i in range(report.per_step.size):
            writer.writerow(
                [
                    i + 1,
                    f"{report.times[i + 1]:.17g}",
                    f"{report.per_step[i]:.17g}",
                    f"{report.energy[i + 1]:.17g}",
                ]
            )


def write_summary_json(path, report: PredictionReport, defect: float) -> None:
    summary = {
        "epsilon_mean": report.mean,
        "max_energy_dev": float(np.max(np.abs(report.energy - report.energy[0]))),
        "symplecticity_defect": defect,
        "complete": report.complete,
    }
    with open(path, "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)
        fh.write("\n")
