"""Symmetric polynomial-term gradient networks.

A net maps x in R^N to

    out(x) = sum_i [ A_i^T f_i(A_i x) - B_i^T f_i(B_i x) ] + b,

with elementwise f_i(x) = x^i / i! (or max(0, x) for the ReLU ablation
variant). With the polynomial terms the Jacobian

    J(x) = sum_i [ A_i^T diag(f_i'(A_i x)) A_i - B_i^T diag(f_i'(B_i x)) B_i ]

is symmetric at every input, which is what makes each integrator substep
built on such a net a symplectic map.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Tuple, Union

import numpy as np

from .errors import NumericError

Array = np.ndarray

ACT_TAYLOR = "taylor"
ACT_RELU = "relu"

M_MAX = 30
_FACTORIALS = np.array([math.factorial(i) for i in range(M_MAX + 1)], dtype=np.float64)


def taylor_term(i: int, x):
    """i-th polynomial term x^i / i!, elementwise."""
    if not 1 <= i <= M_MAX:
        raise ValueError(f"term order must be in [1, {M_MAX}], got {i}")
    out = np.power(np.asarray(x, dtype=np.float64), i) / _FACTORIALS[i]
    if not np.all(np.isfinite(out)):
        raise NumericError(f"overflow in polynomial term of order {i}")
    return out


def _term(i: int, z: Array, activation: str) -> Array:
    if activation == ACT_RELU:
        return np.maximum(0.0, z)
    return np.power(z, i) / _FACTORIALS[i]


def _term_deriv(i: int, z: Array, activation: str) -> Array:
    # ReLU subgradient at 0 is taken as 0.
    if activation == ACT_RELU:
        return (z > 0.0).astype(np.float64)
    if i == 1:
        return np.ones_like(z)
    return np.power(z, i - 1) / _FACTORIALS[i - 1]


@dataclass(frozen=True)
class TaylorGradNet:
    """Parameters of one symmetric gradient network."""

    dim: int
    hidden: int
    terms: int
    A: Array  # (terms, hidden, dim)
    B: Array  # (terms, hidden, dim)
    bias: Array  # (dim,)
    activation: str = ACT_TAYLOR

    def __post_init__(self):
        shape = (self.terms, self.hidden, self.dim)
        if self.A.shape != shape or self.B.shape != shape:
            raise ValueError(f"A/B must have shape {shape}")
        if self.bias.shape != (self.dim,):
            raise ValueError(f"bias must have shape ({self.dim},)")
        if self.activation not in (ACT_TAYLOR, ACT_RELU):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 1 <= self.terms <= M_MAX:
            raise ValueError(f"terms must be in [1, {M_MAX}]")

    def with_params(self, A=None, B=None, bias=None) -> "TaylorGradNet":
        return replace(
            self,
            A=self.A if A is None else A,
            B=self.B if B is None else B,
            bias=self.bias if bias is None else bias,
        )


def init_net(
    dim: int,
    hidden: int,
    terms: int,
    seed: Union[int, np.random.Generator],
    activation: str = ACT_TAYLOR,
) -> TaylorGradNet:
    """He-style initialization: entries of A_i, B_i drawn with standard
    deviation sqrt(2 / (N * N_h * (i + 1))); bias starts at zero."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    A = np.empty((terms, hidden, dim))
    B = np.empty((terms, hidden, dim))
    for i in range(1, terms + 1):
        std = math.sqrt(2.0 / (dim * hidden * (i + 1)))
        A[i - 1] = rng.normal(0.0, std, size=(hidden, dim))
        B[i - 1] = rng.normal(0.0, std, size=(hidden, dim))
    return TaylorGradNet(
        dim=dim,
        hidden=hidden,
        terms=terms,
        A=A,
        B=B,
        bias=np.zeros(dim),
        activation=activation,
    )


def zero_net(dim: int, hidden: int, terms: int, activation: str = ACT_TAYLOR) -> TaylorGradNet:
    return TaylorGradNet(
        dim=dim,
        hidden=hidden,
        terms=terms,
        A=np.zeros((terms, hidden, dim)),
        B=np.zeros((terms, hidden, dim)),
        bias=np.zeros(dim),
        activation=activation,
    )


def forward(net: TaylorGradNet, x: Array) -> Array:
    """Evaluate the net on x of shape (..., N); batched over leading axes."""
    x = np.asarray(x, dtype=np.float64)
    out = np.broadcast_to(net.bias, x.shape).copy()
    for i in range(1, net.terms + 1):
        A = net.A[i - 1]
        B = net.B[i - 1]
        out += _term(i, x @ A.T, net.activation) @ A
        out -= _term(i, x @ B.T, net.activation) @ B
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite network output")
    return out


def jacobian(net: TaylorGradNet, x: Array) -> Array:
    """d(forward)/dx at a single input x of shape (N,)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    J = np.zeros((net.dim, net.dim))
    for i in range(1, net.terms + 1):
        A = net.A[i - 1]
        B = net.B[i - 1]
        J += (A * _term_deriv(i, A @ x, net.activation)[:, None]).T @ A
        J -= (B * _term_deriv(i, B @ x, net.activation)[:, None]).T @ B
    return J


def vjp(net: TaylorGradNet, x: Array, u: Array, with_params: bool = True):
    """Vector-Jacobian products of forward at x with cotangent u.

    x and u have shape (..., N). Returns (dx, grads) where dx has the
    shape of x and grads is a (dA, dB, dbias) tuple with parameter
    cotangents summed over all leading axes (None when with_params is
    off).
    """
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    dx = np.zeros_like(x)
    dA = np.zeros_like(net.A) if with_params else None
    dB = np.zeros_like(net.B) if with_params else None
    flat_x = x.reshape(-1, net.dim)
    flat_u = u.reshape(-1, net.dim)
    flat_dx = dx.reshape(-1, net.dim)
    for i in range(1, net.terms + 1):
        for W, dW, sign in ((net.A[i - 1], dA, 1.0), (net.B[i - 1], dB, -1.0)):
            z = flat_x @ W.T  # (batch, hidden)
            fp = _term_deriv(i, z, net.activation)
            wu = flat_u @ W.T  # (batch, hidden)
            flat_dx += sign * ((fp * wu) @ W)
            if with_params:
                f = _term(i, z, net.activation)
                dW[i - 1] += sign * (f.T @ flat_u + (fp * wu).T @ flat_x)
    grads = None
    if with_params:
        dbias = flat_u.sum(axis=0)
        grads = (dA, dB, dbias)
    return dx, grads


def identity_net(dim: int) -> TaylorGradNet:
    """Single-term net realizing the identity map (A_1 = I, B_1 = 0)."""
    A = np.zeros((1, dim, dim))
    A[0] = np.eye(dim)
    return TaylorGradNet(
        dim=dim,
        hidden=dim,
        terms=1,
        A=A,
        B=np.zeros((1, dim, dim)),
        bias=np.zeros(dim),
        activation=ACT_TAYLOR,
    )


def to_dict(net: TaylorGradNet) -> dict:
    return {
        "dim": net.dim,
        "hidden": net.hidden,
        "terms": net.terms,
        "activation": net.activation,
        "A": net.A.tolist(),
        "B": net.B.tolist(),
        "bias": net.bias.tolist(),
    }


def from_dict(doc: dict) -> TaylorGradNet:
    return TaylorGradNet(
        dim=int(doc["dim"]),
        hidden=int(doc["hidden"]),
        terms=int(doc["terms"]),
        activation=doc["activation"],
        A=np.asarray(doc["A"], dtype=np.float64),
        B=np.asarray(doc["B"], dtype=np.float64),
        bias=np.asarray(doc["bias"], dtype=np.float64),
    )


def to_json(net: TaylorGradNet) -> str:
    return json.dumps(to_dict(net), sort_keys=True)


def from_json(text: str) -> TaylorGradNet:
    return from_dict(json.loads(text))
