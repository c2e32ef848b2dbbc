import csv
import json
import math

import numpy as np
import pytest

from symtaylor.core import PhaseState, builtin_system
from symtaylor.datagen import DatasetSpec, generate_dataset
from symtaylor.evaluate import (
    energy_drift_slope,
    energy_series,
    finite_difference_jacobian,
    prediction_errors,
    symmetry_defect,
    symplectic_form,
    symplecticity_defect,
    write_report_csv,
    write_summary_json,
)
from symtaylor.integrators import IntegrationPlan, hamiltonian_field, rk4_step, symplectic_step
from symtaylor.model import forward, init_net, zero_net
from symtaylor.training import ModelPair


class TestPredictionErrors:
    @pytest.fixture(scope="class")
    def pendulum_testset(self):
        system = builtin_system("pendulum")
        spec = DatasetSpec(system="pendulum", n_samples=8, horizon=0.01, seed=5)
        return system, generate_dataset(system, spec)

    def test_oracle_model_zero_error(self, pendulum_testset, monkeypatch):
        # Inject the analytic gradients as the "learned" fields: identical
        # integrator on both sides must give epsilon = 0 to 1e-12.
        system, testset = pendulum_testset
        pair = ModelPair(tp=zero_net(1, 2, 1), vq=zero_net(1, 2, 1))

        import symtaylor.evaluate as ev

        def fake_forward(net, x):
            return system.grad_T(x) if net is pair.tp else system.grad_V(x)

        monkeypatch.setattr(ev.tmodel, "forward", fake_forward)
        report = ev.prediction_errors(pair, system, testset, 1.0, 0.01)
        assert report.complete
        assert report.per_step.max() < 1e-12
        assert report.mean < 1e-12

    def test_untrained_model_worse_than_oracle(self, pendulum_testset, rng):
        system, testset = pendulum_testset
        pair = ModelPair(tp=init_net(1, 16, 8, rng), vq=init_net(1, 16, 8, rng))
        report = prediction_errors(pair, system, testset, 1.0, 0.01)
        assert report.mean > 1e-10  # strictly worse than the oracle's 1e-12

    def test_reorder_invariance(self, pendulum_testset, rng):
        system, testset = pendulum_testset
        pair = ModelPair(tp=init_net(1, 4, 2, rng), vq=init_net(1, 4, 2, rng))
        a = prediction_errors(pair, system, testset, 0.5, 0.01)
        b = prediction_errors(pair, system, list(reversed(testset)), 0.5, 0.01)
        np.testing.assert_allclose(a.per_step, b.per_step, rtol=1e-12)

    def test_step_count_times_dt_covers_horizon(self, pendulum_testset, rng):
        system, testset = pendulum_testset
        pair = ModelPair(tp=init_net(1, 4, 2, rng), vq=init_net(1, 4, 2, rng))
        report = prediction_errors(pair, system, testset, 1.0, 0.03)
        assert abs(report.n_steps * report.dt - 1.0) <= report.dt

    def test_empty_testset_rejected(self, rng):
        system = builtin_system("pendulum")
        pair = ModelPair(tp=init_net(1, 4, 2, rng), vq=init_net(1, 4, 2, rng))
        with pytest.raises(ValueError):
            prediction_errors(pair, system, [], 1.0, 0.01)


class TestEnergySeries:
    def test_analytic_pendulum_12pi(self):
        system = builtin_system("pendulum")
        s0 = PhaseState(q=[1.0], p=[1.0])
        plan = IntegrationPlan(0.0, 12 * math.pi, 0.01)
        H = energy_series(system, s0, plan)
        assert np.abs(H - H[0]).max() < 1e-4
        assert abs(energy_drift_slope(H, plan.dt)) < 1e-6

    def test_zero_field_trajectory_fixed(self):
        system = builtin_system("pendulum")
        s0 = PhaseState(q=[0.7], p=[0.4])
        plan = IntegrationPlan(0.0, 1.0, 0.1)
        zero = lambda x: np.zeros_like(x)
        H = energy_series(system, s0, plan, gT=zero, gV=zero)
        # The state never moves, so the analytic H stays exactly constant.
        np.testing.assert_array_equal(H, np.full(plan.n + 1, H[0]))


class TestSymplecticityDefect:
    def test_identity_map_zero(self):
        s = PhaseState(q=[0.2, -0.1], p=[0.5, 0.3])
        # Not exactly zero: (x+h)-(x-h) rounds, so the FD Jacobian of the
        # identity is I only to machine precision.
        defect = symplecticity_defect(lambda st, dt: st, s, 0.01)
        assert defect < 1e-10

    def test_learned_symplectic_step_small(self, rng):
        for _ in range(10):
            tp = init_net(1, 6, 3, rng)
            vq = init_net(1, 6, 3, rng)
            gT = lambda x: forward(tp, x)
            gV = lambda x: forward(vq, x)
            s = PhaseState(q=rng.uniform(-1, 1, 1), p=rng.uniform(-1, 1, 1))
            defect = symplecticity_defect(
                lambda st, dt: symplectic_step(gT, gV, st, dt), s, 0.01
            )
            assert defect < 1e-6

    def test_rk4_negative_control(self, rng):
        # A non-quadratic learned field: RK4's defect at dt=0.1 dominates.
        tp = init_net(1, 6, 3, rng)
        vq = init_net(1, 6, 3, rng)
        gT = lambda x: forward(tp, x)
        gV = lambda x: forward(vq, x)
        field = hamiltonian_field(gT, gV)
        s = PhaseState(q=[0.4], p=[-0.6])
        d_sym = symplecticity_defect(lambda st, dt: symplectic_step(gT, gV, st, dt), s, 0.1)
        d_rk4 = symplecticity_defect(lambda st, dt: rk4_step(field, st, dt), s, 0.1)
        assert d_rk4 > 10.0 * d_sym

    def test_fd_h_validated(self):
        s = PhaseState(q=[0.0], p=[0.0])
        with pytest.raises(ValueError):
            symplecticity_defect(lambda st, dt: st, s, 0.01, fd_h=1e-2)

    def test_symplectic_form(self):
        omega = symplectic_form(2)
        np.testing.assert_array_equal(omega, -omega.T)
        np.testing.assert_array_equal(omega @ omega, -np.eye(4))

    def test_fd_jacobian_of_linear_map(self):
        # Linear symplectic shear: q <- q + dt*p, exact Jacobian known.
        def shear(st, dt):
            return PhaseState(q=st.q + dt * st.p, p=st.p)

        J = finite_difference_jacobian(shear, PhaseState(q=[0.3], p=[0.7]), 0.25)
        np.testing.assert_allclose(J, np.array([[1.0, 0.25], [0.0, 1.0]]), atol=1e-9)


class TestSymmetryDefect:
    def test_taylor_net_below_threshold(self, rng):
        net = init_net(3, 5, 4, rng)
        x = rng.uniform(-1, 1, size=3)
        assert symmetry_defect(net, x) < 1e-12

    def test_zero_net(self):
        assert symmetry_defect(zero_net(2, 3, 2), np.ones(2)) == 0.0

    def test_corrupted_forward_breaks_symmetry(self, rng):
        # Harness-level negative control: a raw asymmetric vector field has
        # an asymmetric Jacobian, which the finite-difference probe detects.
        def raw_field(x):
            return np.array([x[0] + 2.0 * x[1], 0.5 * x[0] - x[1]])

        h = 1e-6
        x = rng.uniform(-1, 1, size=2)
        J = np.empty((2, 2))
        for k in range(2):
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            J[:, k] = (raw_field(xp) - raw_field(xm)) / (2.0 * h)
        assert np.abs(J - J.T).max() > 1.0


class TestReportFiles:
    def test_csv_and_json(self, rng, tmp_path):
        system = builtin_system("pendulum")
        testset = generate_dataset(
            system, DatasetSpec(system="pendulum", n_samples=4, horizon=0.01, seed=6)
        )
        pair = ModelPair(tp=init_net(1, 4, 2, rng), vq=init_net(1, 4, 2, rng))
        report = prediction_errors(pair, system, testset, 0.1, 0.01)
        gT = lambda x: forward(pair.tp, x)
        gV = lambda x: forward(pair.vq, x)
        defect = symplecticity_defect(
            lambda st, dt: symplectic_step(gT, gV, st, dt), testset[0].initial, 0.01
        )
        csv_path = tmp_path / "report.csv"
        json_path = tmp_path / "summary.json"
        write_report_csv(csv_path, report)
        write_summary_json(json_path, report, defect)

        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["step", "t", "epsilon", "H"]
        assert len(rows) == report.n_steps + 1

        summary = json.loads(json_path.read_text())
        assert set(summary) >= {"epsilon_mean", "max_energy_dev", "symplecticity_defect"}
        assert summary["epsilon_mean"] == pytest.approx(report.mean)
