import math

import numpy as np
import pytest

from symtaylor.core import BUILTIN_SYSTEMS, PhaseState, builtin_system
from symtaylor.errors import DimensionError
from symtaylor.integrators import symplectic_step


def central_diff(f, x, h=1e-6):
    """Componentwise central finite difference of a scalar function."""
    g = np.empty_like(x)
    for k in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[k] += h
        xm[k] -= h
        g[k] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def random_state(system, rng):
    q = rng.uniform(system.q_box[:, 0], system.q_box[:, 1])
    p = rng.uniform(system.p_box[:, 0], system.p_box[:, 1])
    if system.name == "kepler":
        # Keep the two bodies apart so the potential is regular.
        q = np.array([2.5, 2.5, -2.5, -2.5]) + 0.3 * q
    return q, p


class TestPhaseState:
    def test_dim(self):
        s = PhaseState(q=[1.0, 2.0], p=[3.0, 4.0])
        assert s.dim == 2

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(DimensionError):
            PhaseState(q=[1.0], p=[1.0, 2.0])

    def test_empty_rejected(self):
        with pytest.raises(DimensionError):
            PhaseState(q=[], p=[])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            PhaseState(q=[np.nan], p=[0.0])
        with pytest.raises(ValueError):
            PhaseState(q=[0.0], p=[np.inf])


class TestBuiltinSystems:
    def test_dims(self):
        for name, dim in (("pendulum", 1), ("lotka_volterra", 1), ("kepler", 4), ("henon_heiles", 2)):
            assert builtin_system(name).dim == dim

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            builtin_system("not_a_system")

    def test_pendulum_energy_origin(self):
        system = builtin_system("pendulum")
        assert system.energy(np.zeros(1), np.zeros(1)) == pytest.approx(-1.0, abs=1e-15)

    def test_lotka_volterra_energy_origin(self):
        system = builtin_system("lotka_volterra")
        assert system.energy(np.zeros(1), np.zeros(1)) == pytest.approx(-2.0, abs=1e-15)

    def test_henon_heiles_grad_v_origin(self):
        system = builtin_system("henon_heiles")
        np.testing.assert_allclose(system.grad_V(np.zeros(2)), np.zeros(2), atol=1e-15)

    def test_pendulum_energy_example(self):
        system = builtin_system("pendulum")
        val = system.energy(np.array([math.pi / 2]), np.array([2.0]))
        assert val == pytest.approx(2.0, abs=1e-15)

    def test_kepler_energy_example(self):
        # Bodies at (-2, 0) and (2, 0), zero momenta: separation 4 -> H = -1/4.
        system = builtin_system("kepler")
        q = np.array([-2.0, 0.0, 2.0, 0.0])
        assert system.energy(q, np.zeros(4)) == pytest.approx(-0.25, abs=1e-15)

    def test_henon_heiles_energy_example(self):
        system = builtin_system("henon_heiles")
        val = system.energy(np.array([0.0, 1.0]), np.zeros(2))
        assert val == pytest.approx(1.0 / 6.0, abs=1e-15)

    def test_pendulum_grad_examples(self):
        system = builtin_system("pendulum")
        assert system.grad_T(np.array([2.0]))[0] == pytest.approx(2.0)
        assert system.grad_V(np.array([0.0]))[0] == pytest.approx(0.0)

    def test_energy_dimension_mismatch(self):
        system = builtin_system("pendulum")
        with pytest.raises(DimensionError):
            system.energy(np.zeros(2), np.zeros(2))

    def test_kepler_metadata(self):
        system = builtin_system("kepler")
        assert system.min_separation == 4.0
        assert system.n_bodies == 2
        assert system.space_dim == 2
        np.testing.assert_array_equal(system.q_box, np.tile([[-3.0, 3.0]], (4, 1)))
        np.testing.assert_array_equal(system.p_box, np.tile([[-2.0, 2.0]], (4, 1)))


class TestGradientConsistency:
    @pytest.mark.parametrize("name", BUILTIN_SYSTEMS)
    def test_grads_match_finite_differences(self, name, rng):
        system = builtin_system(name)
        for _ in range(100):
            q, p = random_state(system, rng)
            fd_t = central_diff(lambda x: float(system.kinetic(x)), p)
            fd_v = central_diff(lambda x: float(system.potential(x)), q)
            scale_t = max(1.0, float(np.abs(fd_t).max()))
            scale_v = max(1.0, float(np.abs(fd_v).max()))
            assert np.abs(system.grad_T(p) - fd_t).max() / scale_t < 1e-6
            assert np.abs(system.grad_V(q) - fd_v).max() / scale_v < 1e-6

    @pytest.mark.parametrize("name", BUILTIN_SYSTEMS)
    def test_energy_conserved_over_small_step(self, name, rng):
        system = builtin_system(name)
        for _ in range(100):
            q, p = random_state(system, rng)
            s0 = PhaseState(q=q, p=p)
            s1 = symplectic_step(system.grad_T, system.grad_V, s0, 1e-4)
            assert abs(system.energy_state(s1) - system.energy_state(s0)) < 1e-6

    def test_batched_gradients_match_single(self, rng):
        system = builtin_system("kepler")
        qs, ps = zip(*(random_state(system, rng) for _ in range(7)))
        qb, pb = np.stack(qs), np.stack(ps)
        np.testing.assert_allclose(
            system.grad_V(qb), np.stack([system.grad_V(q) for q in qs]), rtol=1e-14
        )
        np.testing.assert_allclose(
            system.grad_T(pb), np.stack([system.grad_T(p) for p in ps]), rtol=1e-14
        )
