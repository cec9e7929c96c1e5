"""Platoon states, tracking errors, and the target curve.

A platoon state is the vector of positions and velocities of n vehicles;
vehicle 1 is the leader and indices increase rearwards.  Each vehicle
carries two tracking errors: the speed error against the desired-velocity
profile and the spacing error against the constant-time-headway distance
to its predecessor.  The target curve is the one-parameter family of
states where every error vanishes; most of the analysis in this package
is phrased as distances and error magnitudes relative to it.

All functions here are pure; vehicle indices in public signatures are
1-based to match the scenario configuration files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError
from .profile import Profile, ensure_valid

FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 200
GOLDEN_TOL = 1e-9


def _as_state_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PlatoonState:
    """Positions and velocities of all vehicles at one instant.

    ``x[0]`` is the leader.  Positive spacing ``x[i-1] - x[i]`` is a
    diagnostic property of physically valid states, not a constructor
    constraint, so collided states can still be represented and analyzed.
    """

    t: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _as_state_array(self.x, "x"))
        object.__setattr__(self, "y", _as_state_array(self.y, "y"))
        if self.x.shape != self.y.shape:
            raise ValueError("x and y must have the same length")

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class ErrorPair:
    """Speed error (m/s) and spacing error (m) for one vehicle."""

    eps1: float
    eps2: float

    @property
    def delta(self) -> float:
        """max(|eps1|, |eps2|); the units are mixed on purpose.

        The switching law and the decay analysis compare the two error
        magnitudes numerically with no unit weighting, so the diagnostic
        preserves that convention.
        """
        return max(abs(self.eps1), abs(self.eps2))


@dataclass(frozen=True)
class TargetCurvePoint:
    """The unique zero-error state with the leader at ``leader_position``."""

    leader_position: float
    x_star: np.ndarray
    y_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_star", _as_state_array(self.x_star, "x_star"))
        object.__setattr__(self, "y_star", _as_state_array(self.y_star, "y_star"))

    @property
    def n(self) -> int:
        return self.x_star.size


def error_arrays(
    x: np.ndarray, y: np.ndarray, profile: Profile, T: float
) -> tuple[np.ndarray, np.ndarray]:
    """Speed and spacing errors for every vehicle, vectorized.

    Works on arrays of shape (..., n): the last axis indexes vehicles, any
    leading axes are independent platoons.  The leader has no predecessor;
    its spacing error is defined as 0 so it always tracks the profile.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eps1 = y - profile(x)
    eps2 = np.zeros_like(eps1)
    eps2[..., 1:] = x[..., :-1] - x[..., 1:] - T * y[..., 1:]
    return eps1, eps2


def errors(state: PlatoonState, i: int, profile: Profile, T: float) -> ErrorPair:
    """Error pair of vehicle ``i`` (1-based; 1 is the leader)."""
    if not 1 <= i <= state.n:
        raise IndexError(f"vehicle index {i} out of range 1..{state.n}")
    eps1 = float(state.y[i - 1] - profile(state.x[i - 1]))
    if i == 1:
        eps2 = 0.0
    else:
        eps2 = float(state.x[i - 2] - state.x[i - 1] - T * state.y[i - 1])
    return ErrorPair(eps1=eps1, eps2=eps2)


def max_error(state: PlatoonState, profile: Profile, T: float) -> float:
    """Largest error magnitude over the platoon (the function whose zero
    level set is the target curve): max over all speed errors and all
    follower spacing errors, 2n - 1 terms in total."""
    eps1, eps2 = error_arrays(state.x, state.y, profile, T)
    return float(max(np.max(np.abs(eps1)), np.max(np.abs(eps2[..., 1:]), initial=0.0)))


def follower_position(
    x_prev, profile: Profile, T: float, *, trace: list | None = None
):
    """Solve ``x = x_prev - T * v_d(x)`` for the on-curve follower position.

    ``x_prev`` may be a scalar or an array of predecessor positions (the
    solves are independent).  The map is a contraction with factor
    ``T * M < 1``, iterated from ``x_prev - T * v_d(x_prev)`` until the
    step shrinks below ``FIXED_POINT_TOL``.  When ``trace`` is given the
    successive iterates are appended to it (used by contraction tests).
    """
    x_prev = np.asarray(x_prev, dtype=float)
    x = x_prev - T * profile(x_prev)
    if trace is not None:
        trace.append(x.copy() if x.shape else float(x))
    for _ in range(FIXED_POINT_MAX_ITER):
        x_new = x_prev - T * profile(x)
        if trace is not None:
            trace.append(x_new.copy() if x_new.shape else float(x_new))
        step = np.max(np.abs(x_new - x))
        x = x_new
        if step < FIXED_POINT_TOL:
            return x if x.shape else float(x)
    raise ConvergenceError(
        f"follower fixed point did not converge within "
        f"{FIXED_POINT_MAX_ITER} iterations (last step {step:.3e} m)"
    )


def target_arrays(
    leader_positions, n: int, profile: Profile, T: float
) -> tuple[np.ndarray, np.ndarray]:
    """On-curve positions and velocities for one or many leader positions.

    Returns arrays of shape (..., n) where the leading shape matches
    ``leader_positions``.  Requires ``M * T < 1``.
    """
    ensure_valid(profile, T)
    if n < 1:
        raise ValueError("n must be >= 1")
    lead = np.asarray(leader_positions, dtype=float)
    xs = np.empty(lead.shape + (n,), dtype=float)
    xs[..., 0] = lead
    for i in range(1, n):
        xs[..., i] = follower_position(xs[..., i - 1], profile, T)
    return xs, profile(xs)


def target_point(
    x1: float, n: int, profile: Profile, T: float
) -> TargetCurvePoint:
    """The unique zero-error platoon state with the leader at ``x1``."""
    xs, ys = target_arrays(float(x1), n, profile, T)
    return TargetCurvePoint(leader_position=float(x1), x_star=xs, y_star=ys)


class TargetDistance(NamedTuple):
    """Distance from a state to the target curve and the minimizing leader
    parameter.  The distance is Euclidean over the stacked (x, y) vector;
    positions and velocities are compared in their native units."""

    distance: float
    leader_position: float


def _stacked_distance(
    state: PlatoonState, xs: np.ndarray, ys: np.ndarray
) -> np.ndarray:
    dx = xs - state.x
    dy = ys - state.y
    return np.sqrt(np.sum(dx * dx, axis=-1) + np.sum(dy * dy, axis=-1))


def distance_to_target(
    state: PlatoonState, profile: Profile, T: float
) -> TargetDistance:
    """Minimum Euclidean distance from ``state`` to the target curve.

    The curve is scanned over the leader parameter s on a grid of step
    ``T * inf(v_d) / 4``, then the best bracket is refined by golden
    section to 1e-9 in s.  The scan window is centered on the state's own
    leader position and wide enough to contain the minimizer: the distance
    at s = x1 bounds how far along the curve the minimizer can sit.
    """
    ensure_valid(profile, T)
    n = state.n
    x1 = float(state.x[0])

    def dist_at(s):
        xs, ys = target_arrays(s, n, profile, T)
        return _stacked_distance(state, xs, ys)

    d_anchor = float(dist_at(x1))
    err = max_error(state, profile, T)
    half_width = max(n * T * profile.supremum() + 2.0 * err, d_anchor)
    step = T * profile.infimum() / 4.0
    m = max(int(math.ceil(half_width / step)), 1)
    grid = x1 + step * np.arange(-m, m + 1)
    dists = dist_at(grid)
    k = int(np.argmin(dists))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]

    # golden-section refinement on [lo, hi]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = float(dist_at(c))
    fd = float(dist_at(d))
    for _ in range(200):
        if b - a <= GOLDEN_TOL:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = float(dist_at(c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = float(dist_at(d))
    else:
        raise ConvergenceError("golden-section refinement did not converge")
    s_best = c if fc < fd else d
    f_best = min(fc, fd)
    # the anchor and raw grid points are valid candidates too
    if dists[k] < f_best:
        s_best, f_best = grid[k], dists[k]
    if d_anchor < f_best:
        s_best, f_best = x1, d_anchor
    return TargetDistance(distance=float(f_best), leader_position=float(s_best))


def spacings(state: PlatoonState) -> np.ndarray:
    """Gaps ``x[i-1] - x[i]`` for followers 2..n (length n - 1)."""
    return state.x[:-1] - state.x[1:]


def headway(state: PlatoonState, i: int) -> float:
    """Time headway of vehicle ``i`` >= 2: gap to predecessor over own speed.

    Undefined (NaN) when the vehicle's speed is not positive; callers
    treat that as a reportable condition, not an abort.
    """
    if not 2 <= i <= state.n:
        raise IndexError(f"headway needs a follower index 2..{state.n}, got {i}")
    v = state.y[i - 1]
    if v <= 0:
        return math.nan
    return float((state.x[i - 2] - state.x[i - 1]) / v)


def headway_arrays(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-vehicle headway with NaN for the leader and non-positive speeds.

    Shapes follow :func:`error_arrays`: (..., n) in, (..., n) out.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.full(x.shape, np.nan)
    gap = x[..., :-1] - x[..., 1:]
    v = y[..., 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[..., 1:] = np.where(v > 0, gap / v, np.nan)
    return out
