"""End-to-end acceptance suite.

Each test carries a one-line criterion label; the conftest hook prints a
pass/fail line per criterion after the run.  Tolerances are fixed here,
not tuned: regression bands widen the reference solver's headway band by
0.01 s to allow for integrator differences, analytic values carry 1e-6
slack for double-precision integration, and everything else is exact.
"""

import time

import numpy as np
import pytest

from platoonlab import (
    ControllerParams,
    PlatoonState,
    SpeedDropProfile,
    check_control_bounds,
    check_error_distance_bound,
    check_error_propagation_bounds,
    distance_to_target,
    fit_decay_rate,
    macroscopic,
    max_error,
    noncollision_threshold,
)
from platoonlab.platoon import error_arrays, follower_position, target_arrays
from platoonlab.sim import Perturbation, Scenario, integrate_batch, run

import oracles
from conftest import DROP_LENGTH, DROP_START, RHO, T_HEADWAY, V0

HEADWAY_BAND = (0.97, 1.05)
END_SPEED_TOL = 0.1
END_HEADWAY_TOL = 1e-2
SLACK = 1e-6


def criterion(label):
    def mark(fn):
        fn._criterion = label
        return fn

    return mark


@criterion("1 scenario-1 regression: headway band and end velocities")
def test_criterion_1_scenario1_regression(scenario1_run, drop_profile):
    trajectory, wall_seconds = scenario1_run
    assert wall_seconds < 60.0, f"run took {wall_seconds:.1f} s"
    assert len(trajectory.collisions) == 0

    # every vehicle fully traverses the drop region
    assert np.all(trajectory.x[-1] > DROP_START + DROP_LENGTH)

    # sampled headway stays inside the band once a vehicle is in the drop
    for col in range(1, trajectory.n):
        in_drop = trajectory.x[:, col] >= DROP_START
        h = trajectory.headway[in_drop, col]
        assert np.all(np.isfinite(h))
        assert h.min() >= HEADWAY_BAND[0], (col + 1, h.min())
        assert h.max() <= HEADWAY_BAND[1], (col + 1, h.max())

    # end-of-run velocity matches the profile at each vehicle's position
    end_speed_err = np.abs(
        trajectory.y[-1] - drop_profile(trajectory.x[-1])
    )
    assert end_speed_err.max() <= END_SPEED_TOL


@criterion("2 scenario-2 regression: perturbation absorbed, no collision")
def test_criterion_2_scenario2_regression(scenario2_trajectory, drop_profile):
    trajectory = scenario2_trajectory
    assert len(trajectory.collisions) == 0
    last = trajectory.n - 1
    assert abs(trajectory.headway[-1, last] - T_HEADWAY) <= END_HEADWAY_TOL
    end_err = abs(
        trajectory.y[-1, last] - float(drop_profile(trajectory.x[-1, last]))
    )
    assert end_err <= END_SPEED_TOL


@criterion("3 error decay: rate -1 fits and exponential envelope")
def test_criterion_3_decay_campaign(upstream_profile):
    # ten two-vehicle runs with pure speed-error starts, magnitudes in
    # [0.1, 5]: the follower's speed offset e comes with the -T*e position
    # offset so the spacing error starts at zero
    rng = np.random.default_rng(31)
    magnitudes = rng.uniform(0.1, 5.0, 10) * rng.choice([-1.0, 1.0], 10)
    xs, ys = target_arrays(np.zeros(10), 2, upstream_profile, T_HEADWAY)
    x0 = np.array(xs)
    y0 = np.array(ys)
    x0[:, 1] -= T_HEADWAY * magnitudes
    y0[:, 1] += magnitudes

    dt = 1e-3
    res = integrate_batch(
        x0,
        y0,
        upstream_profile,
        ControllerParams(T=T_HEADWAY),
        duration=8.0,
        dt=dt,
        record_stride=10,
    )
    eps1, eps2 = error_arrays(res.x, res.y, upstream_profile, T_HEADWAY)
    delta = np.maximum(np.abs(eps1[:, :, 1]), np.abs(eps2[:, :, 1]))  # (S, runs)
    for r in range(10):
        series = delta[:, r]
        fit = fit_decay_rate(res.times, series)
        assert -1.02 <= fit.rate <= -0.98, (r, fit.rate)
        envelope = series[0] * np.exp(-res.times) * (1.0 + 1e-3)
        assert np.all(series <= envelope), (r, np.max(series - envelope))


@criterion("4 non-collision theorem: 200 runs inside the threshold")
def test_criterion_4_noncollision_campaign(drop_profile):
    threshold = noncollision_threshold(drop_profile, T_HEADWAY)
    assert threshold == pytest.approx(10.0 / 6.0, abs=1e-12)
    rng = np.random.default_rng(4242)
    total = 0
    for n, runs in ((2, 67), (5, 67), (10, 66)):
        anchors = rng.uniform(-300.0, 800.0, runs)
        xs, ys = target_arrays(anchors, n, drop_profile, T_HEADWAY)
        directions = rng.normal(size=(runs, 2 * n))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        scales = rng.uniform(0.0, threshold, runs)[:, None]
        offsets = directions * scales
        x0 = xs + offsets[:, :n]
        y0 = ys + offsets[:, n:]
        # the construction caps the distance by the offset norm; verify
        # against the actual minimizer anyway
        for k in range(runs):
            state = PlatoonState(t=0.0, x=x0[k], y=y0[k])
            d = distance_to_target(state, drop_profile, T_HEADWAY)
            assert d.distance <= threshold + 1e-9
        res = integrate_batch(
            x0,
            y0,
            drop_profile,
            ControllerParams(T=T_HEADWAY),
            duration=60.0,
            dt=0.01,
            record_stride=6000,
        )
        assert not np.any(res.collided), (n, res.min_spacing.min())
        total += runs
    assert total == 200


@criterion("5 deviation-bound campaigns: 1000 random states each, no violations")
def test_criterion_5_inequality_campaigns(drop_profile):
    rng = np.random.default_rng(55)
    checked_propagation = 0
    checked_distance = 0
    for k in range(1000):
        n = int(rng.integers(1, 11))
        anchor = float(rng.uniform(-300.0, 800.0))
        xs, ys = target_arrays(anchor, n, drop_profile, T_HEADWAY)
        state = PlatoonState(
            t=0.0,
            x=xs + rng.uniform(-1.2, 1.2, n),
            y=ys + rng.uniform(-1.2, 1.2, n),
        )
        assert max_error(state, drop_profile, T_HEADWAY) <= 5.0
        for record in check_error_propagation_bounds(state, drop_profile, T_HEADWAY):
            assert record.lhs <= record.rhs + SLACK, record
            checked_propagation += 1
        record = check_error_distance_bound(state, drop_profile, T_HEADWAY)
        assert record.lhs <= record.rhs + SLACK, record
        checked_distance += 1
    assert checked_distance == 1000
    assert checked_propagation >= 2000


@criterion("6 target-curve construction agrees with the bisection oracle")
def test_criterion_6_target_oracle_equivalence():
    rng = np.random.default_rng(66)
    for _ in range(100):
        v0 = float(rng.uniform(5.0, 40.0))
        rho = float(rng.uniform(0.0, 0.9))
        drop_start = float(rng.uniform(-500.0, 500.0))
        drop_length = float(rng.uniform(50.0, 2000.0))
        profile = SpeedDropProfile(
            v0=v0, rho=rho, drop_start=drop_start, drop_length=drop_length
        )
        M = profile.lipschitz_constant()
        # headway chosen to keep the contraction factor within (0, 0.8]
        T = float(rng.uniform(0.1, 0.8 / max(M, 0.8)))
        assert M * T < 1.0
        x_prev = float(rng.uniform(drop_start - 200.0, drop_start + drop_length + 200.0))
        got = follower_position(x_prev, profile, T)
        expected = oracles.bisect_follower(x_prev, profile, T)
        assert abs(got - expected) <= 1e-9


@criterion("7 control bounds: leader 0.4 ceiling and static bound checks")
def test_criterion_7_control_bounds(
    scenario1_trajectory, scenario2_trajectory, drop_profile
):
    params = ControllerParams(T=T_HEADWAY)

    # leader static bound is exactly 0.4 m/s^2 for the on-target start
    state0 = scenario1_trajectory.state_at(0)
    from platoonlab import control_bound

    b1, b2 = control_bound(state0, 1, drop_profile, params)
    assert b1 == pytest.approx(0.4, abs=1e-12)
    assert b2 == pytest.approx(40.0, abs=1e-12)
    assert np.max(np.abs(scenario1_trajectory.u[:, 0])) <= 0.4 + SLACK
    assert np.max(np.abs(scenario2_trajectory.u[:, 0])) <= 0.4 + SLACK

    # scenario 1: every vehicle satisfies its per-branch static bound
    for record in check_control_bounds(scenario1_trajectory, drop_profile, params):
        assert record.lhs <= record.rhs + SLACK, record

    # scenario 2: every vehicle stays under the branch-agnostic ceiling
    # max(bound1, bound2)
    for record in check_control_bounds(scenario2_trajectory, drop_profile, params):
        if record.check_id == "control_bound_overall":
            assert record.lhs <= record.rhs + SLACK, record


@criterion("7b scenario-2 per-branch static bounds (known model limitation)")
@pytest.mark.xfail(
    strict=True,
    reason=(
        "The per-branch static bound assumes each vehicle's max error never "
        "exceeds its initial value.  A vehicle that starts error-free behind "
        "a perturbed one is pumped through the switching surface (sliding "
        "imports the predecessor's speed error), so its branch-1 ceiling "
        "(0.4 m/s^2 here) is exceeded while the combined ceiling still "
        "holds.  Verified dt-independent (0.02 .. 0.0005): vehicle 5 peaks "
        "near 0.885 m/s^2.  See notes/decisions.md."
    ),
)
def test_criterion_7_branch_bounds_scenario2(scenario2_trajectory, drop_profile):
    params = ControllerParams(T=T_HEADWAY)
    for record in check_control_bounds(scenario2_trajectory, drop_profile, params):
        if record.check_id.startswith("control_bound_branch"):
            assert record.lhs <= record.rhs + SLACK, record


@criterion("8 integrator order: halving dt cuts the end-state error 4th-order")
def test_criterion_8_integrator_order(drop_profile):
    def end_state(dt):
        sc = Scenario(
            n=1,
            T=T_HEADWAY,
            profile=drop_profile,
            x1_start=200.0,
            duration=2.0,
            dt=dt,
            record_interval=2.0,
            perturbations=(Perturbation(1, dy=1.0),),
        )
        trajectory = run(sc)
        assert np.all(trajectory.branch == 1)
        return np.concatenate([trajectory.x[-1], trajectory.y[-1]])

    reference = end_state(0.00125)
    err = {dt: np.linalg.norm(end_state(dt) - reference) for dt in (0.04, 0.02, 0.01)}
    assert err[0.04] / err[0.02] >= 12.0
    assert err[0.02] / err[0.01] >= 12.0


@criterion("9 steady-state flow and density formulas")
def test_criterion_9_macroscopic(drop_profile):
    q, k_before = macroscopic(drop_profile, T_HEADWAY, DROP_START - 10.0)
    assert q == pytest.approx(1.0, abs=1e-12)
    assert k_before == pytest.approx(0.05, abs=1e-12)
    _, k_after = macroscopic(drop_profile, T_HEADWAY, DROP_START + DROP_LENGTH + 10.0)
    assert k_after == pytest.approx(0.1, abs=1e-12)
    # flow = density * speed at any location
    for location in (-50.0, 100.0, 250.0, 499.0, 700.0):
        q, k = macroscopic(drop_profile, T_HEADWAY, location)
        assert q == pytest.approx(k * float(drop_profile(location)), rel=1e-12)
