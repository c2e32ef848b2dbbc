"""Differentiable rollout through the symplectic integrator and training.

The forward rollout reuses the exact stepping code from `integrators`
(same floating-point operation order), recording the per-substep inputs
that the reverse pass needs. Gradients come either from the exact
reverse-mode sweep over that trace (default) or from integrating the
adjoint ODE system backward over the same time grid.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import model as tmodel
from .core import PhaseState
from .errors import ConfigError, DimensionError
from .integrators import IntegrationPlan, forest_ruth_coefficients, step_arrays
from .model import TaylorGradNet, forward, vjp

Array = np.ndarray

LOSS_L1 = "l1"
LOSS_MSE = "mse"

ENGINE_BACKPROP = "backprop"
ENGINE_ADJOINT = "adjoint"

_COEFFS = forest_ruth_coefficients()


@dataclass(frozen=True)
class ModelPair:
    """The two learned gradient nets: tp ~ dT/dp, vq ~ dV/dq."""

    tp: TaylorGradNet
    vq: TaylorGradNet

    def __post_init__(self):
        if self.tp.dim != self.vq.dim:
            raise DimensionError("tp and vq must share the phase-space dimension")

    @property
    def dim(self) -> int:
        return self.tp.dim


@dataclass(frozen=True)
class TrainConfig:
    t_train: float
    epochs: int
    lr0: float
    step_size: int = 10
    gamma: float = 0.8
    dt: Optional[float] = None  # integrator step inside the training rollout
    loss: str = LOSS_L1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    n_train: int = 25
    n_validation: int = 100
    # Optimizer steps sweep the samples in fixed order, batch_size at a
    # time; None means one full-batch step per epoch. Per-sample updates
    # are the default: with the tiny sample counts used here, one
    # full-batch step per epoch stalls an order of magnitude short of
    # the achievable loss within the epoch budgets.
    batch_size: Optional[int] = 1

    def __post_init__(self):
        if self.lr0 <= 0.0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigError("gamma must be in (0, 1]")
        dt = self.rollout_dt
        ratio = self.t_train / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError("dt must divide t_train")
        if self.loss not in (LOSS_L1, LOSS_MSE):
            raise ConfigError(f"unknown loss {self.loss!r}")

    @property
    def rollout_dt(self) -> float:
        # Default: 10 integrator steps across the training window.
        return self.dt if self.dt is not None else self.t_train / 10.0

    @property
    def plan(self) -> IntegrationPlan:
        return IntegrationPlan(t0=0.0, t_end=self.t_train, dt=self.rollout_dt)


# --- rollout -----------------------------------------------------------------


def rollout_arrays(
    pair: ModelPair,
    q0: Array,
    p0: Array,
    plan: IntegrationPlan,
    trace: Optional[list] = None,
    grid: Optional[list] = None,
) -> Tuple[Array, Array]:
    """Roll (..., N) arrays through plan.n learned symplectic steps.

    `trace` collects per-substep inputs for the reverse sweep; `grid`
    collects the (q_i, p_i) states at the step boundaries for the
    adjoint engine.
    """
    gT = lambda p: forward(pair.tp, p)
    gV = lambda q: forward(pair.vq, q)
    q, p = np.asarray(q0, dtype=np.float64), np.asarray(p0, dtype=np.float64)
    if grid is not None:
        grid.append((q, p))
    for i in range(plan.n):
        q, p = step_arrays(gT, gV, q, p, plan.dt, trace=trace, step_index=i)
        if grid is not None:
            grid.append((q, p))
    return q, p


def rollout(pair: ModelPair, s0: PhaseState, plan: IntegrationPlan) -> PhaseState:
    q, p = rollout_arrays(pair, s0.q, s0.p, plan)
    return PhaseState(q=q, p=p)


# --- loss --------------------------------------------------------------------


def loss_value(pred_q, pred_p, tgt_q, tgt_p, kind: str = LOSS_L1) -> float:
    """Sample mean of the per-sample state error (L1 or squared)."""
    pred_q, pred_p = np.atleast_2d(pred_q), np.atleast_2d(pred_p)
    tgt_q, tgt_p = np.atleast_2d(tgt_q), np.atleast_2d(tgt_p)
    if pred_q.shape != tgt_q.shape or pred_p.shape != tgt_p.shape:
        raise DimensionError("prediction/target batch shapes differ")
    if pred_q.shape[0] == 0:
        raise ValueError("empty batch")
    dq = pred_q - tgt_q
    dp = pred_p - tgt_p
    if kind == LOSS_L1:
        per_sample = np.abs(dp).sum(axis=-1) + np.abs(dq).sum(axis=-1)
    elif kind == LOSS_MSE:
        per_sample = (dp * dp).sum(axis=-1) + (dq * dq).sum(axis=-1)
    else:
        raise ConfigError(f"unknown loss {kind!r}")
    return float(per_sample.mean())


def loss_grad(pred_q, pred_p, tgt_q, tgt_p, kind: str = LOSS_L1):
    """d(loss)/d(pred_q), d(loss)/d(pred_p); L1 subgradient at 0 is 0."""
    dq = pred_q - tgt_q
    dp = pred_p - tgt_p
    n = pred_q.shape[0]
    if kind == LOSS_L1:
        return np.sign(dq) / n, np.sign(dp) / n
    if kind == LOSS_MSE:
        return 2.0 * dq / n, 2.0 * dp / n
    raise ConfigError(f"unknown loss {kind!r}")


# --- gradient engines --------------------------------------------------------

NetGrads = List[Array]  # [dA, dB, dbias]


def _zero_grads(net: TaylorGradNet) -> NetGrads:
    return [np.zeros_like(net.A), np.zeros_like(net.B), np.zeros_like(net.bias)]


def _accumulate(acc: NetGrads, delta, scale: float) -> None:
    acc[0] += scale * delta[0]
    acc[1] += scale * delta[1]
    acc[2] += scale * delta[2]


def backprop_gradients(
    pair: ModelPair,
    q0: Array,
    p0: Array,
    tgt_q: Array,
    tgt_p: Array,
    plan: IntegrationPlan,
    kind: str = LOSS_L1,
) -> Tuple[float, NetGrads, NetGrads]:
    """Exact reverse-mode gradient of loss(rollout(q0, p0)) w.r.t. both nets.

    Inputs are batched (B, N) arrays. Returns (loss, grads_tp, grads_vq).
    """
    q0, p0 = np.atleast_2d(q0), np.atleast_2d(p0)
    tgt_q, tgt_p = np.atleast_2d(tgt_q), np.atleast_2d(tgt_p)
    trace: list = []
    qn, pn = rollout_arrays(pair, q0, p0, plan, trace=trace)
    value = loss_value(qn, pn, tgt_q, tgt_p, kind)
    uq, up = loss_grad(qn, pn, tgt_q, tgt_p, kind)

    g_tp = _zero_grads(pair.tp)
    g_vq = _zero_grads(pair.vq)
    dt = plan.dt
    for k in range(len(trace) - 1, -1, -1):
        j = k % 4
        p_in, q_in = trace[k]
        d = _COEFFS.d[j]
        if d != 0.0:
            # kick: p <- p - d*dt*gV(q)
            dxq, grads = vjp(pair.vq, q_in, up)
            uq = uq - d * dt * dxq
            _accumulate(g_vq, grads, -d * dt)
        # drift: q <- q + c*dt*gT(p)
        c = _COEFFS.c[j]
        dxp, grads = vjp(pair.tp, p_in, uq)
        up = up + c * dt * dxp
        _accumulate(g_tp, grads, c * dt)
    return value, g_tp, g_vq


def adjoint_gradients(
    pair: ModelPair,
    q0: Array,
    p0: Array,
    tgt_q: Array,
    tgt_p: Array,
    plan: IntegrationPlan,
    kind: str = LOSS_L1,
) -> Tuple[float, NetGrads, NetGrads]:
    """Adjoint-state gradients on the same dt grid as the forward pass.

    Integrates the coupled adjoint system backward from the loss
    cotangents at t1 with a second-order (Heun) sweep over the recorded
    step states,

        d(sig_q)/dt =  sig_p . dVq/dq,
        d(sig_p)/dt = -sig_q . dTp/dp,

    and accumulates the parameter integrals by the trapezoid rule:

        dL/dtheta_p =  int sig_q . dTp/dtheta_p dt,
        dL/dtheta_q = -int sig_p . dVq/dtheta_q dt.

    Agrees with the reverse-mode sweep up to the O(dt^2) discretization
    of the backward integration.
    """
    q0, p0 = np.atleast_2d(q0), np.atleast_2d(p0)
    tgt_q, tgt_p = np.atleast_2d(tgt_q), np.atleast_2d(tgt_p)
    grid: list = []
    qn, pn = rollout_arrays(pair, q0, p0, plan, grid=grid)
    value = loss_value(qn, pn, tgt_q, tgt_p, kind)
    sig_q, sig_p = loss_grad(qn, pn, tgt_q, tgt_p, kind)

    def rhs(q, p, sq, sp):
        dq, _ = vjp(pair.vq, q, sp, with_params=False)
        dp, _ = vjp(pair.tp, p, sq, with_params=False)
        return dq, -dp

    n = plan.n
    dt = plan.dt
    g_tp = _zero_grads(pair.tp)
    g_vq = _zero_grads(pair.vq)

    def take(q, p, sq, sp, weight):
        _, grads = vjp(pair.tp, p, sq)
        _accumulate(g_tp, grads, weight * dt)
        _, grads = vjp(pair.vq, q, sp)
        _accumulate(g_vq, grads, -weight * dt)

    q1, p1 = grid[n]
    take(q1, p1, sig_q, sig_p, 0.5)
    for i in range(n - 1, -1, -1):
        qa, pa = grid[i + 1]
        qb, pb = grid[i]
        k1q, k1p = rhs(qa, pa, sig_q, sig_p)
        pred_q = sig_q - dt * k1q
        pred_p = sig_p - dt * k1p
        k2q, k2p = rhs(qb, pb, pred_q, pred_p)
        sig_q = sig_q - 0.5 * dt * (k1q + k2q)
        sig_p = sig_p - 0.5 * dt * (k1p + k2p)
        take(qb, pb, sig_q, sig_p, 0.5 if i == 0 else 1.0)
    return value, g_tp, g_vq


def gradients(pair, q0, p0, tgt_q, tgt_p, plan, kind=LOSS_L1, engine=ENGINE_BACKPROP):
    if engine == ENGINE_BACKPROP:
        return backprop_gradients(pair, q0, p0, tgt_q, tgt_p, plan, kind)
    if engine == ENGINE_ADJOINT:
        return adjoint_gradients(pair, q0, p0, tgt_q, tgt_p, plan, kind)
    raise ConfigError(f"unknown gradient engine {engine!r}")


# --- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    m: List[Array]
    v: List[Array]
    t: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Array]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


def adam_step(
    params: Sequence[Array],
    grads: Sequence[Array],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> List[Array]:
    """One bias-corrected Adam update; mutates state, returns new params."""
    state.t += 1
    t = state.t
    out = []
    for k, (p, g) in enumerate(zip(params, grads)):
        state.m[k] = beta1 * state.m[k] + (1.0 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1.0 - beta2) * g * g
        m_hat = state.m[k] / (1.0 - beta1**t)
        v_hat = state.v[k] / (1.0 - beta2**t)
        out.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
    return out


def lr_at(epoch: int, cfg: TrainConfig) -> float:
    """Step-decay schedule lr0 * gamma^floor(epoch / step_size)."""
    return cfg.lr0 * cfg.gamma ** (epoch // cfg.step_size)


# --- training loop -----------------------------------------------------------


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    validation_loss: float
    lr: float


def _batch(pairs) -> Tuple[Array, Array, Array, Array]:
    q0 = np.stack([s.initial.q for s in pairs])
    p0 = np.stack([s.initial.p for s in pairs])
    qn = np.stack([s.final.q for s in pairs])
    pn = np.stack([s.final.p for s in pairs])
    return q0, p0, qn, pn


def train(
    pair: ModelPair,
    train_pairs,
    cfg: TrainConfig,
    validation_pairs=None,
    engine: str = ENGINE_BACKPROP,
) -> Tuple[ModelPair, List[EpochRecord]]:
    """Train for exactly cfg.epochs epochs; deterministic given the inputs.

    Each epoch sweeps the training samples in fixed order, taking one
    Adam step per cfg.batch_size samples (one full-batch step when
    batch_size is None). The two nets keep separate Adam moment state.
    The recorded train loss is the mean of the batch losses seen during
    the epoch; validation loss is evaluated after the epoch's updates.
    """
    if len(train_pairs) == 0:
        raise ConfigError("training dataset is empty")
    q0, p0, tq, tp_ = _batch(train_pairs)
    val = _batch(validation_pairs) if validation_pairs else None
    plan = cfg.plan
    n = len(train_pairs)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)

    params_tp = [pair.tp.A, pair.tp.B, pair.tp.bias]
    params_vq = [pair.vq.A, pair.vq.B, pair.vq.bias]
    st_tp = AdamState.for_params(params_tp)
    st_vq = AdamState.for_params(params_vq)

    history: List[EpochRecord] = []
    for epoch in range(cfg.epochs):
        lr = lr_at(epoch, cfg)
        batch_losses = []
        for start in range(0, n, bs):
            sl = slice(start, min(start + bs, n))
            value, g_tp, g_vq = gradients(
                pair, q0[sl], p0[sl], tq[sl], tp_[sl], plan, cfg.loss, engine
            )
            batch_losses.append(value)
            params_tp = adam_step(
                params_tp, g_tp, st_tp, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            )
            params_vq = adam_step(
                params_vq, g_vq, st_vq, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps
            )
            pair = ModelPair(
                tp=pair.tp.with_params(A=params_tp[0], B=params_tp[1], bias=params_tp[2]),
                vq=pair.vq.with_params(A=params_vq[0], B=params_vq[1], bias=params_vq[2]),
            )
        val_loss = float("nan")
        if val is not None:
            vq_pred, vp_pred = rollout_arrays(pair, val[0], val[1], plan)
            val_loss = loss_value(vq_pred, vp_pred, val[2], val[3], cfg.loss)
        history.append(
            EpochRecord(
                epoch=epoch,
                train_loss=float(np.mean(batch_losses)),
                validation_loss=val_loss,
                lr=lr,
            )
        )
    return pair, history


# --- serialization -----------------------------------------------------------


def checkpoint_dict(pair: ModelPair, cfg: Optional[TrainConfig] = None) -> dict:
    doc = {"tp": tmodel.to_dict(pair.tp), "vq": tmodel.to_dict(pair.vq)}
    if cfg is not None:
        doc["config"] = {
            "t_train": cfg.t_train,
            "dt": cfg.rollout_dt,
            "epochs": cfg.epochs,
            "lr0": cfg.lr0,
            "step_size": cfg.step_size,
            "gamma": cfg.gamma,
            "loss": cfg.loss,
            "adam_beta1": cfg.adam_beta1,
            "adam_beta2": cfg.adam_beta2,
            "adam_eps": cfg.adam_eps,
            "seed": cfg.seed,
            "n_train": cfg.n_train,
            "n_validation": cfg.n_validation,
        }
    return doc


def save_checkpoint(path, pair: ModelPair, cfg: Optional[TrainConfig] = None) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_dict(pair, cfg), fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> ModelPair:
    with open(path) as fh:
        doc = json.load(fh)
    return ModelPair(tp=tmodel.from_dict(doc["tp"]), vq=tmodel.from_dict(doc["vq"]))


def write_history(path, history: Sequence[EpochRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "validation_loss", "lr"])
        for rec in history:
            writer.writerow(
                [
                    rec.epoch,
                    f"{rec.train_loss:.17g}",
                    f"{rec.validation_loss:.17g}",
                    f"{rec.lr:.17g}",
                ]
            )
