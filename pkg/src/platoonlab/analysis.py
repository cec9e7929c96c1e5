"""Quantitative verdicts on the controller's stability and safety claims.

Every checker is a pure function that records the evaluated left- and
right-hand sides, so a failure is reproducible from the report alone.
Strict inequalities carry a numerical slack of 1e-6 because every input
has passed through double-precision integration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .controller import ControllerParams, control_bound
from .platoon import (
    PlatoonState,
    distance_to_target,
    error_arrays,
    max_error,
    target_arrays,
)
from .profile import Profile, validate
from .sim import Trajectory, decay_series

INEQUALITY_SLACK = 1e-6
NOISE_FLOOR = 1e-10


@dataclass(frozen=True)
class BoundCheck:
    """One evaluated inequality ``lhs <= rhs (+ slack)``.

    ``margin`` is ``rhs - lhs``: negative beyond the slack means the
    inequality failed.  ``where`` locates the worst sample (a time, a
    vehicle position, ...) when that is meaningful.
    """

    check_id: str
    vehicle: int | None
    lhs: float
    rhs: float
    passed: bool
    where: float | None = None

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class DecayFit:
    """Log-linear fit of an error-decay series.

    ``rate`` is the least-squares slope of ln(delta) against t over the
    samples above the noise floor; None when the series is already
    converged (too few usable points).  ``residual`` is the RMS misfit of
    the log-linear model.
    """

    rate: float | None
    residual: float | None
    n_points: int

    @property
    def converged(self) -> bool:
        return self.rate is None


def fit_decay_rate(
    times: np.ndarray,
    delta: np.ndarray,
    *,
    t_min: float = 0.0,
    noise_floor: float = NOISE_FLOOR,
    min_points: int = 10,
) -> DecayFit:
    """Fit ``delta(t) ~ A * exp(rate * t)`` by least squares on ln(delta).

    The model is exactly log-linear for the closed loop's error dynamics,
    so no nonlinear fitting is needed.  Samples at or below ``noise_floor``
    (and before ``t_min``) are excluded; with fewer than ``min_points``
    usable samples the series is reported as converged.
    """
    times = np.asarray(times, dtype=float)
    delta = np.asarray(delta, dtype=float)
    mask = (delta > noise_floor) & (times >= t_min)
    if int(mask.sum()) < min_points:
        return DecayFit(rate=None, residual=None, n_points=int(mask.sum()))
    t = times[mask]
    logd = np.log(delta[mask])
    slope, intercept = np.polyfit(t, logd, 1)
    resid = logd - (slope * t + intercept)
    return DecayFit(
        rate=float(slope),
        residual=float(np.sqrt(np.mean(resid**2))),
        n_points=int(mask.sum()),
    )


def noncollision_threshold(profile: Profile, T: float) -> float:
    """Initial distance to the target curve below which no gap can close.

    ``T * inf(v_d) / (max(2 + T, 1 + M) * (1 + T))`` with M the profile's
    Lipschitz constant.  Requires a positive speed infimum.
    """
    check = validate(profile, T)
    if not check.infimum > 0:
        raise ValueError("noncollision threshold needs inf v_d > 0")
    M = check.lipschitz_constant
    return T * check.infimum / (max(2.0 + T, 1.0 + M) * (1.0 + T))


def string_gain_coefficients(n: int, M: float, T: float) -> np.ndarray:
    """Per-vehicle geometric sums ``C_i = sum_{k=2..i} (1 - T*M)^-(i-k+1)``.

    ``C_1 = 0``.  These amplify the max error into position bounds down
    the string; they require ``T * M < 1``.
    """
    if not T * M < 1.0:
        raise ValueError("coefficients need T*M < 1")
    r = 1.0 / (1.0 - T * M)
    c = np.zeros(n)
    for i in range(1, n):
        c[i] = r * (c[i - 1] + 1.0)
    return c


def check_error_propagation_bounds(
    state: PlatoonState, profile: Profile, T: float
) -> list[BoundCheck]:
    """Per-vehicle position/velocity deviation bounds against the max error.

    The reference point is the target-curve state anchored at the state's
    own leader position (x*_1 = x_1), which is what the bound is stated
    for; it generally differs from the distance-minimizing point.  For
    every vehicle:

    * ``|x_i - x*_i| <= C_i * (1 + T) * E``
    * ``|y_i - y*_i| <= (C_i * M * (1 + T) + 1) * E``
    """
    M = profile.lipschitz_constant()
    xs, ys = target_arrays(float(state.x[0]), state.n, profile, T)
    E = max_error(state, profile, T)
    C = string_gain_coefficients(state.n, M, T)
    pos_dev = np.abs(state.x - xs)
    vel_dev = np.abs(state.y - ys)
    pos_bound = C * (1.0 + T) * E
    vel_bound = (C * M * (1.0 + T) + 1.0) * E
    records = []
    for i in range(state.n):
        records.append(
            BoundCheck(
                check_id="error_propagation_position",
                vehicle=i + 1,
                lhs=float(pos_dev[i]),
                rhs=float(pos_bound[i]),
                passed=bool(pos_dev[i] <= pos_bound[i] + INEQUALITY_SLACK),
            )
        )
        records.append(
            BoundCheck(
                check_id="error_propagation_velocity",
                vehicle=i + 1,
                lhs=float(vel_dev[i]),
                rhs=float(vel_bound[i]),
                passed=bool(vel_dev[i] <= vel_bound[i] + INEQUALITY_SLACK),
            )
        )
    return records


def check_error_distance_bound(
    state: PlatoonState, profile: Profile, T: float
) -> BoundCheck:
    """Max error against distance to the target curve:
    ``E(Q) <= max(2 + T, 1 + M) * dist(Q, target)``."""
    M = profile.lipschitz_constant()
    E = max_error(state, profile, T)
    dist = distance_to_target(state, profile, T)
    factor = max(2.0 + T, 1.0 + M)
    rhs = factor * dist.distance
    return BoundCheck(
        check_id="error_vs_distance",
        vehicle=None,
        lhs=E,
        rhs=rhs,
        passed=bool(E <= rhs + INEQUALITY_SLACK),
        where=dist.leader_position,
    )


def check_control_bounds(
    trajectory: Trajectory, profile: Profile, params: ControllerParams
) -> list[BoundCheck]:
    """Recorded controls against the static per-branch bounds.

    For each vehicle three records are produced: the worst recorded |u|
    on branch-1 samples against the branch-1 bound, likewise for branch 2,
    and the overall worst |u| against max(bound1, bound2).  The per-branch
    comparisons are exact restatements of the boundedness proof; the
    combined one is the branch-agnostic ceiling.
    """
    state0 = trajectory.state_at(0)
    records = []
    abs_u = np.abs(trajectory.u)
    for i in range(1, trajectory.n + 1):
        b1, b2 = control_bound(state0, i, profile, params)
        col = i - 1
        for branch_id, bound in ((1, b1), (2, b2)):
            mask = trajectory.branch[:, col] == branch_id
            if np.any(mask):
                k = int(np.argmax(np.where(mask, abs_u[:, col], -np.inf)))
                worst = float(abs_u[k, col])
                where = float(trajectory.times[k])
            else:
                worst, where = 0.0, None
            records.append(
                BoundCheck(
                    check_id=f"control_bound_branch{branch_id}",
                    vehicle=i,
                    lhs=worst,
                    rhs=bound,
                    passed=bool(worst <= bound + INEQUALITY_SLACK),
                    where=where,
                )
            )
        k = int(np.argmax(abs_u[:, col]))
        records.append(
            BoundCheck(
                check_id="control_bound_overall",
                vehicle=i,
                lhs=float(abs_u[k, col]),
                rhs=max(b1, b2),
                passed=bool(abs_u[k, col] <= max(b1, b2) + INEQUALITY_SLACK),
                where=float(trajectory.times[k]),
            )
        )
    return records


def check_decay_envelope(
    trajectory: Trajectory,
    *,
    rel_tol: float = 1e-3,
    abs_tol: float = 1e-8,
) -> list[BoundCheck]:
    """Per-vehicle exponential envelope ``delta_i(t) <= delta_i(0) * e^-t``
    with tolerance ``rel_tol * delta_i(0) + abs_tol``.

    This is the idealized per-vehicle decay as a trajectory assertion.  It
    holds on runs whose active error is the only forcing (e.g. a follower
    with a velocity perturbation behind a clean leader); platoons being
    pumped by an upstream transient or by a profile kink can exceed it,
    which is exactly what the record then shows.
    """
    records = []
    for i in range(1, trajectory.n + 1):
        times, delta = decay_series(trajectory, i)
        envelope = delta[0] * np.exp(-times) + rel_tol * delta[0] + abs_tol
        excess = delta - envelope
        k = int(np.argmax(excess))
        records.append(
            BoundCheck(
                check_id="decay_envelope",
                vehicle=i,
                lhs=float(delta[k]),
                rhs=float(envelope[k]),
                passed=bool(excess[k] <= 0.0),
                where=float(times[k]),
            )
        )
    return records


def macroscopic(profile: Profile, T: float, location: float) -> tuple[float, float]:
    """Steady-state flow (veh/s) and density (veh/m) at ``location``.

    On the target curve every vehicle passes a fixed point T seconds after
    its predecessor, so ``q = 1/T``; spacing there is ``T * v_d(l)``, so
    ``k = 1 / (T * v_d(l))``.  The two satisfy ``q = k * v_d(l)`` exactly.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    q = 1.0 / T
    k = 1.0 / (T * float(profile(location)))
    return q, k


def headway_band(
    trajectory: Trajectory,
    *,
    x_min: float | None = None,
    x_max: float | None = None,
    t_min: float = 0.0,
) -> tuple[float, float]:
    """(min, max) recorded follower headway, optionally restricted to
    samples where the vehicle's position lies in [x_min, x_max] and
    t >= t_min.  NaN headways (leader, non-positive speeds) are ignored;
    returns (nan, nan) when nothing qualifies."""
    if trajectory.n < 2:
        return (float("nan"), float("nan"))
    h = trajectory.headway[:, 1:]
    pos = trajectory.x[:, 1:]
    mask = np.isfinite(h)
    mask &= trajectory.times[:, None] >= t_min
    if x_min is not None:
        mask &= pos >= x_min
    if x_max is not None:
        mask &= pos <= x_max
    if not np.any(mask):
        return (float("nan"), float("nan"))
    vals = h[mask]
    return float(np.min(vals)), float(np.max(vals))


@dataclass(frozen=True)
class AnalysisReport:
    """Everything the verify pipeline measures on one trajectory."""

    n: int
    headway: float
    lipschitz_constant: float
    speed_infimum: float
    threshold: float
    collision_count: int
    headway_band: tuple[float, float]
    flow: float
    density_before: float
    density_after: float
    worst_end_speed_error: float
    decay_fits: tuple[DecayFit, ...]
    checks: tuple[BoundCheck, ...]

    @property
    def failed_checks(self) -> tuple[BoundCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)


def analyze(trajectory: Trajectory) -> AnalysisReport:
    """Full analysis of a recorded run against the closed-loop claims."""
    scenario = trajectory.scenario
    profile = scenario.profile
    T = scenario.T
    params = ControllerParams(T=T)
    check = validate(profile, T)

    if hasattr(profile, "drop_start"):
        band = headway_band(trajectory, x_min=profile.drop_start)
        loc_before = profile.drop_start - 1.0
        loc_after = profile.drop_start + profile.drop_length + 1.0
    else:
        band = headway_band(trajectory)
        loc_before = float(trajectory.x[0, 0])
        loc_after = float(trajectory.x[-1, 0])

    q, k_before = macroscopic(profile, T, loc_before)
    _, k_after = macroscopic(profile, T, loc_after)

    eps1_end, _ = error_arrays(trajectory.x[-1], trajectory.y[-1], profile, T)
    fits = tuple(
        fit_decay_rate(*decay_series(trajectory, i))
        for i in range(1, trajectory.n + 1)
    )
    checks = check_control_bounds(trajectory, profile, params)
    return AnalysisReport(
        n=trajectory.n,
        headway=T,
        lipschitz_constant=check.lipschitz_constant,
        speed_infimum=check.infimum,
        threshold=noncollision_threshold(profile, T),
        collision_count=len(trajectory.collisions),
        headway_band=band,
        flow=q,
        density_before=k_before,
        density_after=k_after,
        worst_end_speed_error=float(np.max(np.abs(eps1_end))),
        decay_fits=fits,
        checks=tuple(checks),
    )
