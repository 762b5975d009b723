"""Projected gradient flow: integration, stationary points, descent checks."""

import numpy as np
import pytest

from gossipopt.constraints import Ball, Box
from gossipopt.flow import (
    default_step_size,
    find_kkt,
    integrate_flow,
    lyapunov_check,
    suggest_flow_step,
)
from gossipopt.problems import constrained_least_squares, least_squares_targets, power_allocation
from tests.test_problems import symmetric_channel

DISK = Ball(np.zeros(2), 1.0)


class TestIntegrateFlow:
    def test_quadratic_decays_monotonically_toward_origin(self):
        traj = integrate_flow(DISK, lambda x: x, np.array([1.0, 0.0]), horizon=8.0, step=0.01)
        norms = np.linalg.norm(traj.states, axis=1)
        assert np.all(np.diff(norms) <= 1e-15)
        assert norms[-1] < 1e-3
        values = 0.5 * norms**2
        assert np.all(np.diff(values) <= 1e-15)

    def test_linear_objective_slides_to_the_pole(self):
        c = np.array([0.6, 0.8])
        grad = lambda x: -c
        traj = integrate_flow(DISK, grad, np.array([-0.9, 0.1]), horizon=30.0, step=0.01)
        np.testing.assert_allclose(traj.terminal, c, atol=1e-4)
        assert DISK.kkt_residual(grad(traj.terminal), traj.terminal) < 1e-3

    def test_power_allocation_from_low_powers_reaches_the_optimum(self):
        problem = power_allocation(symmetric_channel())
        traj = integrate_flow(
            problem.constraint_set,
            problem.mean_gradient,
            np.array([1.0, 1.0]),
            horizon=200_000.0,
            step=5.0,
        )
        np.testing.assert_allclose(traj.terminal, [10.0, 5.4], atol=0.2)

    def test_infeasible_start_rejected(self):
        with pytest.raises(ValueError, match="start"):
            integrate_flow(DISK, lambda x: x, np.array([2.0, 0.0]), horizon=1.0, step=0.1)

    def test_nonfinite_gradient_aborts(self):
        bad = lambda x: np.array([np.nan, 0.0])
        with pytest.raises(ValueError, match="non-finite"):
            integrate_flow(DISK, bad, np.zeros(2), horizon=1.0, step=0.1)

    def test_first_order_step_convergence(self):
        # halving the step roughly halves the deviation from a fine reference
        grad = lambda x: x - np.array([2.0, 0.0])  # pulls onto the boundary
        x0 = np.array([-0.5, 0.5])
        ref = integrate_flow(DISK, grad, x0, horizon=4.0, step=0.04 / 8).terminal
        err = {}
        for h in (0.04, 0.02):
            err[h] = np.linalg.norm(integrate_flow(DISK, grad, x0, horizon=4.0, step=h).terminal - ref)
        ratio = err[0.04] / err[0.02]
        assert 1.5 < ratio < 3.0

    def test_default_step_formula(self):
        grad = lambda x: np.array([2.0, 0.0])
        step = default_step_size(DISK, grad)
        assert step == pytest.approx(1e-3 * 2.0 / 2.0, rel=1e-6)


class TestFindKKT:
    def test_strictly_convex_problem_yields_single_point(self, rng):
        targets = rng.normal(size=(5, 2)) * 2.0
        problem = least_squares_targets(targets, 0.0, DISK)
        candidates = find_kkt(
            DISK, problem.mean_gradient, problem.objective, n_starts=6, rng=rng, step=0.5
        )
        assert len(candidates) == 1
        np.testing.assert_allclose(candidates[0].point, problem.theta_star, atol=1e-6)
        assert candidates[0].residual < 1e-8

    def test_constant_objective_makes_every_start_stationary(self, rng):
        grad = lambda x: np.zeros(2)
        candidates = find_kkt(DISK, grad, lambda x: 1.0, n_starts=5, rng=rng, step=0.1)
        assert len(candidates) == 5
        assert all(c.residual == 0.0 for c in candidates)

    def test_power_allocation_stationary_point(self, rng):
        problem = power_allocation(symmetric_channel())
        candidates = find_kkt(
            problem.constraint_set,
            problem.mean_gradient,
            problem.objective,
            n_starts=6,
            rng=rng,
            step=suggest_flow_step(problem.constraint_set, problem.mean_gradient),
            max_steps=100_000,
        )
        assert candidates
        np.testing.assert_allclose(candidates[0].point, [10.0, 5.4], atol=0.1)

    def test_least_squares_instances_match_reference_minimizer(self, rng):
        for _ in range(5):
            problem = constrained_least_squares(10, rng)
            gram = np.stack(
                [-problem.gradient_i(i, np.zeros(2)) for i in range(10)]
            )  # rows are the directions s_i
            lipschitz = 2.0 * float(np.linalg.eigvalsh(gram.T @ gram)[-1]) / 10
            candidates = find_kkt(
                problem.constraint_set,
                problem.mean_gradient,
                problem.objective,
                n_starts=4,
                rng=rng,
                step=1.0 / lipschitz,
                max_steps=50_000,
            )
            assert len(candidates) == 1
            np.testing.assert_allclose(candidates[0].point, problem.theta_star, atol=1e-6)

    def test_no_convergence_warns_and_returns_empty(self, rng):
        problem = power_allocation(symmetric_channel())
        with pytest.warns(RuntimeWarning, match="stationarity"):
            out = find_kkt(
                problem.constraint_set,
                problem.mean_gradient,
                problem.objective,
                n_starts=2,
                rng=rng,
                step=1e-9,
                max_steps=50,
            )
        assert out == []


class TestLyapunovCheck:
    def test_constant_objective_has_zero_increments(self):
        grad = lambda x: np.zeros(2)
        traj = integrate_flow(DISK, grad, np.array([0.3, 0.1]), horizon=1.0, step=0.01)
        report = lyapunov_check(traj, DISK, grad, lambda x: 7.0)
        assert report.monotone
        assert report.rate_match_fraction == 1.0

    def test_interior_rate_equals_squared_gradient_norm(self):
        grad = lambda x: x
        f = lambda x: 0.5 * float(x @ x)
        traj = integrate_flow(DISK, grad, np.array([0.5, 0.0]), horizon=0.5, step=1e-3)
        # rate check against the analytic value on a few early steps
        for k in range(5):
            rate = (f(traj.states[k + 1]) - f(traj.states[k])) / traj.step
            assert rate == pytest.approx(-float(traj.states[k] @ traj.states[k]), rel=2e-3)
        report = lyapunov_check(traj, DISK, grad, f)
        assert report.monotone
        assert report.rate_match_fraction >= 0.95

    def test_boundary_sliding_rate_matches_tangential_component(self):
        # linear objective on the disk from a boundary start: the analytic
        # descent rate is -(|c|^2 - <c, x>^2), the squared tangential part
        c = np.array([1.0, 0.0])
        grad = lambda x: -c
        f = lambda x: -float(c @ x)
        x0 = np.array([0.0, 1.0])
        h = 1e-3
        traj = integrate_flow(DISK, grad, x0, horizon=0.8, step=h)
        for k in range(0, 500, 50):
            x = traj.states[k]
            rate = (f(traj.states[k + 1]) - f(x)) / h
            tangential_sq = 1.0 - float(c @ x) ** 2
            assert rate == pytest.approx(-tangential_sq, abs=30 * h)
        report = lyapunov_check(traj, DISK, grad, f)
        assert report.monotone
        assert report.rate_match_fraction >= 0.95

    def test_box_constrained_trajectory_passes(self, rng):
        problem = power_allocation(symmetric_channel())
        traj = integrate_flow(
            problem.constraint_set,
            problem.mean_gradient,
            problem.constraint_set.sample(rng),
            horizon=2000.0,
            step=1.0,
        )
        report = lyapunov_check(traj, problem.constraint_set, problem.mean_gradient, problem.objective)
        assert report.monotone
        assert report.rate_match_fraction >= 0.95
