"""Structure-preserving learning of separable Hamiltonian dynamics.

Learns the gradients dT/dp and dV/dq of a separable Hamiltonian from
endpoint-only observations using symmetric polynomial-term networks
rolled through a fourth-order symplectic integrator, and evaluates the
resulting long-horizon predictions and conservation properties.
"""

from .core import BUILTIN_SYSTEMS, HamiltonianSystem, PhaseState, builtin_system
from .errors import ConfigError, DimensionError, NumericError, SymtaylorError
from .integrators import (
    IntegrationPlan,
    SymplecticCoefficients,
    forest_ruth_coefficients,
    integrate,
    rk4_step,
    symplectic_step,
)
from .model import TaylorGradNet, forward, init_net, jacobian, taylor_term
from .training import ModelPair, TrainConfig, rollout, train

__all__ = [
    "BUILTIN_SYSTEMS",
    "ConfigError",
    "DimensionError",
    "HamiltonianSystem",
    "IntegrationPlan",
    "ModelPair",
    "NumericError",
    "PhaseState",
    "SymplecticCoefficients",
    "SymtaylorError",
    "TaylorGradNet",
    "TrainConfig",
    "builtin_system",
    "forest_ruth_coefficients",
    "forward",
    "init_net",
    "integrate",
    "jacobian",
    "rk4_step",
    "rollout",
    "symplectic_step",
    "taylor_term",
    "train",
]

__version__ = "0.1.0"
