import numpy as np
import pytest

from platoonlab import (
    ControllerParams,
    PlatoonState,
    SpeedDropProfile,
    check_control_bounds,
    check_decay_envelope,
    check_error_distance_bound,
    check_error_propagation_bounds,
    fit_decay_rate,
    macroscopic,
    noncollision_threshold,
    string_gain_coefficients,
    target_point,
)
from platoonlab.platoon import target_arrays
from platoonlab.sim import Perturbation, Scenario, run

import oracles

T = 1.0


class TestFitDecayRate:
    def test_exact_exponential(self):
        times = np.arange(0.0, 10.0, 0.1)
        fit = fit_decay_rate(times, 3.0 * np.exp(-times))
        assert fit.rate == pytest.approx(-1.0, abs=1e-9)
        assert fit.residual == pytest.approx(0.0, abs=1e-9)
        assert not fit.converged

    def test_matches_longhand_least_squares(self, rng):
        times = np.arange(0.0, 6.0, 0.05)
        noisy = 2.0 * np.exp(-1.03 * times) * np.exp(rng.normal(0, 0.01, times.size))
        fit = fit_decay_rate(times, noisy)
        expected = oracles.log_slope(times, noisy)
        assert fit.rate == pytest.approx(expected, rel=1e-12)

    def test_all_zero_series_reports_converged(self):
        times = np.arange(0.0, 5.0, 0.1)
        fit = fit_decay_rate(times, np.zeros_like(times))
        assert fit.converged
        assert fit.rate is None

    def test_noise_floor_and_window(self):
        times = np.arange(0.0, 40.0, 0.1)
        delta = np.exp(-times) + 1e-12  # floors out around t = 27
        fit = fit_decay_rate(times, delta, t_min=0.5)
        assert fit.rate == pytest.approx(-1.0, abs=1e-3)

    def test_two_vehicle_perturbed_run(self, upstream_profile):
        sc = Scenario(
            n=2,
            T=T,
            profile=upstream_profile,
            x1_start=0.0,
            duration=6.0,
            dt=1e-3,
            record_interval=0.01,
            perturbations=(Perturbation(2, dx=-T * 2.0, dy=2.0),),
        )
        traj = run(sc)
        from platoonlab.sim import decay_series

        fit = fit_decay_rate(*decay_series(traj, 2))
        assert -1.02 <= fit.rate <= -0.98


class TestNoncollisionThreshold:
    def test_regression_value(self, drop_profile):
        assert noncollision_threshold(drop_profile, T) == pytest.approx(
            10.0 / 6.0, abs=1e-12
        )

    def test_flat_profile_value(self):
        flat = SpeedDropProfile(v0=20.0, rho=0.0, drop_start=0.0, drop_length=1.0)
        assert noncollision_threshold(flat, T) == pytest.approx(20.0 / 6.0, abs=1e-12)

    def test_monotonicity(self):
        # increasing in the speed infimum, decreasing in the Lipschitz
        # constant (via steeper drops)
        base = SpeedDropProfile(v0=20.0, rho=0.5, drop_start=0.0, drop_length=500.0)
        faster = SpeedDropProfile(v0=24.0, rho=0.5, drop_start=0.0, drop_length=500.0)
        assert noncollision_threshold(faster, T) > noncollision_threshold(base, T)
        steeper = SpeedDropProfile(v0=20.0, rho=0.5, drop_start=0.0, drop_length=4.0)
        # M = 2.5 > 2 so max(2+T, 1+M) switches to the Lipschitz term
        assert noncollision_threshold(steeper, T) < noncollision_threshold(base, T)


class TestStringGains:
    def test_second_vehicle_value(self):
        # single term (1 - T*M)^-1 with T*M = 0.02
        got = string_gain_coefficients(2, 0.02, T)[1]
        assert got == pytest.approx(1.0 / 0.98, abs=1e-12)

    def test_matches_direct_sum(self):
        M = 0.02
        got = string_gain_coefficients(10, M, T)
        for i in range(1, 11):
            assert got[i - 1] == pytest.approx(
                oracles.geometric_gain(i, M, T), rel=1e-12
            )

    def test_leader_gain_zero(self):
        assert string_gain_coefficients(5, 0.02, T)[0] == 0.0


class TestErrorPropagationBounds:
    def test_on_target_state_trivial(self, drop_profile):
        tp = target_point(100.0, 5, drop_profile, T)
        state = PlatoonState(t=0.0, x=tp.x_star, y=tp.y_star)
        records = check_error_propagation_bounds(state, drop_profile, T)
        assert len(records) == 10
        for r in records:
            assert r.passed
            assert r.lhs == pytest.approx(0.0, abs=1e-9)
            assert r.rhs == pytest.approx(0.0, abs=1e-9)

    def test_random_campaign_no_violations(self, drop_profile, rng):
        for _ in range(200):
            n = int(rng.integers(1, 11))
            s = float(rng.uniform(-300, 800))
            xs, ys = target_arrays(s, n, drop_profile, T)
            state = PlatoonState(
                t=0.0,
                x=xs + rng.uniform(-1.2, 1.2, n),
                y=ys + rng.uniform(-1.2, 1.2, n),
            )
            for r in check_error_propagation_bounds(state, drop_profile, T):
                assert r.passed, r


class TestErrorDistanceBound:
    def test_on_target_state(self, drop_profile):
        tp = target_point(42.0, 3, drop_profile, T)
        state = PlatoonState(t=0.0, x=tp.x_star, y=tp.y_star)
        record = check_error_distance_bound(state, drop_profile, T)
        assert record.passed
        assert record.lhs <= 1e-9

    def test_single_vehicle_analytic_margin(self):
        flat = SpeedDropProfile(v0=20.0, rho=0.0, drop_start=0.0, drop_length=1.0)
        state = PlatoonState(t=0.0, x=[0.0], y=[21.0])
        record = check_error_distance_bound(state, flat, T)
        # E = 1, dist = 1, factor = 3: holds with a 2x margin
        assert record.lhs == pytest.approx(1.0)
        assert record.rhs == pytest.approx(3.0, abs=1e-6)
        assert record.passed

    def test_random_campaign_no_violations(self, drop_profile, rng):
        for _ in range(100):
            n = int(rng.integers(1, 11))
            s = float(rng.uniform(-300, 800))
            xs, ys = target_arrays(s, n, drop_profile, T)
            state = PlatoonState(
                t=0.0,
                x=xs + rng.uniform(-1.2, 1.2, n),
                y=ys + rng.uniform(-1.2, 1.2, n),
            )
            assert check_error_distance_bound(state, drop_profile, T).passed


class TestControlBoundChecks:
    def test_zero_error_flat_run_all_tiny(self):
        flat = SpeedDropProfile(v0=20.0, rho=0.0, drop_start=0.0, drop_length=1.0)
        sc = Scenario(n=3, T=T, profile=flat, x1_start=0.0, duration=5.0, dt=0.01)
        traj = run(sc)
        assert np.max(np.abs(traj.u)) <= 1e-8
        records = check_control_bounds(traj, flat, ControllerParams(T=T))
        assert all(r.passed for r in records)

    def test_every_record_carries_both_sides(self, upstream_profile):
        sc = Scenario(
            n=3,
            T=T,
            profile=upstream_profile,
            x1_start=0.0,
            duration=2.0,
            dt=0.01,
            perturbations=(Perturbation(2, dx=1.0),),
        )
        traj = run(sc)
        records = check_control_bounds(traj, upstream_profile, ControllerParams(T=T))
        assert len(records) == 9  # three families x three vehicles
        for r in records:
            assert np.isfinite(r.lhs) and np.isfinite(r.rhs)
            assert r.margin == r.rhs - r.lhs


class TestDecayEnvelope:
    def test_pure_speed_error_run_within_envelope(self, upstream_profile):
        sc = Scenario(
            n=2,
            T=T,
            profile=upstream_profile,
            x1_start=0.0,
            duration=6.0,
            dt=1e-3,
            record_interval=0.01,
            perturbations=(Perturbation(2, dx=-T * 3.0, dy=3.0),),
        )
        traj = run(sc)
        records = check_decay_envelope(traj)
        assert all(r.passed for r in records)

    def test_detects_pumped_vehicle(self, upstream_profile):
        # vehicle 4 starts error-free but is pumped by the upstream
        # transient through the switching surface; the envelope records it
        sc = Scenario(
            n=4,
            T=T,
            profile=upstream_profile,
            x1_start=0.0,
            duration=8.0,
            dt=0.01,
            perturbations=(Perturbation(2, dx=5.0),),
        )
        traj = run(sc)
        records = {r.vehicle: r for r in check_decay_envelope(traj)}
        assert not records[4].passed
        assert records[4].lhs > records[4].rhs


class TestMacroscopic:
    def test_flow_is_inverse_headway(self, drop_profile):
        q, _ = macroscopic(drop_profile, T, -100.0)
        assert q == pytest.approx(1.0)
        q2, _ = macroscopic(drop_profile, 2.0, -100.0)
        assert q2 == pytest.approx(0.5)

    def test_density_before_and_after_drop(self, drop_profile):
        _, k_before = macroscopic(drop_profile, T, -100.0)
        _, k_after = macroscopic(drop_profile, T, 600.0)
        assert k_before == pytest.approx(0.05, abs=1e-12)
        assert k_after == pytest.approx(0.1, abs=1e-12)

    def test_flow_density_speed_identity(self, drop_profile, rng):
        for _ in range(50):
            location = float(rng.uniform(-500, 1000))
            headway = float(rng.uniform(0.3, 4.0))
            q, k = macroscopic(drop_profile, headway, location)
            assert q == pytest.approx(k * float(drop_profile(location)), rel=1e-12)
