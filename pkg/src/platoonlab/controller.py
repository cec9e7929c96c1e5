"""Switched state feedback for constant-time-headway platooning.

Each vehicle picks between two feedback branches at every instant:

* branch 1 (velocity tracking) when its speed-error magnitude is at least
  its spacing-error magnitude: ``u = y * v_d'(x) + g1(eps1)`` with the
  default ``g(e) = -e`` giving ``u = y * v_d'(x) - y + v_d(x)``;
* branch 2 (spacing tracking) otherwise:
  ``u = (y_prev - y - g2(eps2)) / T``, defaulting to
  ``u = (eps2 + y_prev - y) / T``.

On the active branch the corresponding error satisfies ``de/dt = g(e)``
exactly (feedback linearization), which is what drives every decay and
boundedness property checked elsewhere in the package.  The ``g`` hooks
generalize the default ``-e`` dynamics to any scalar law that is globally
asymptotically stable at the origin; the leader always runs branch 1.

The array entry point ``control_arrays`` operates on state arrays of
shape (..., n) so a whole platoon (or a batch of platoons) is evaluated
with a fixed number of numpy operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .platoon import ErrorPair, PlatoonState, error_arrays
from .profile import Profile

_G_VALIDATION_SAMPLES = (-10.0, -1.0, -1e-3, 1e-3, 1.0, 10.0)


def _negate(e):
    return -e


@dataclass(frozen=True)
class ControllerParams:
    """Time headway plus the switching-tie policy and error-dynamics hooks.

    ``tie_policy`` decides the branch when both error magnitudes are equal:
    ``"velocity"`` (default) picks branch 1, ``"spacing"`` picks branch 2.
    ``error_dynamics`` optionally replaces the default ``de/dt = -e`` with
    a pair ``(g1, g2)`` of vectorized scalar maps; each must vanish at 0
    and oppose the sign of its argument (checked on a fixed sample).
    """

    T: float
    tie_policy: str = "velocity"
    error_dynamics: tuple[Callable, Callable] | None = None

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"time headway T must be positive, got {self.T!r}")
        if self.tie_policy not in ("velocity", "spacing"):
            raise ValueError(
                f"tie_policy must be 'velocity' or 'spacing', got {self.tie_policy!r}"
            )
        if self.error_dynamics is not None:
            for name, g in zip(("g1", "g2"), self.error_dynamics):
                if abs(float(g(0.0))) != 0.0:
                    raise ValueError(f"{name}(0) must be 0")
                samples = np.array(_G_VALIDATION_SAMPLES)
                out = np.asarray(g(samples), dtype=float)
                if out.shape != samples.shape or np.any(np.sign(out) != -np.sign(samples)):
                    raise ValueError(
                        f"{name} must be vectorized and satisfy "
                        "sign(g(e)) == -sign(e) for e != 0"
                    )

    @property
    def g1(self) -> Callable:
        return self.error_dynamics[0] if self.error_dynamics else _negate

    @property
    def g2(self) -> Callable:
        return self.error_dynamics[1] if self.error_dynamics else _negate


@dataclass(frozen=True)
class ControlDecision:
    """One vehicle's commanded acceleration with the branch that produced it."""

    u: float
    branch: int
    eps: ErrorPair


def control_arrays(
    x: np.ndarray, y: np.ndarray, profile: Profile, params: ControllerParams
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Accelerations, branches, and both errors for every vehicle.

    ``x`` and ``y`` have shape (..., n); the outputs match.  The branch
    array holds 1 or 2.  The leader (index 0 on the last axis) is always
    on branch 1: its spacing error is identically 0 and the velocity tie
    goes to branch 1 regardless of policy.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    T = params.T
    eps1, eps2 = error_arrays(x, y, profile, T)
    if params.tie_policy == "velocity":
        spacing_branch = np.abs(eps2) > np.abs(eps1)
    else:
        spacing_branch = np.abs(eps2) >= np.abs(eps1)
        spacing_branch[..., 0] = False
    u1 = y * profile.derivative(x) + params.g1(eps1)
    du = np.zeros_like(y)
    du[..., 1:] = y[..., :-1] - y[..., 1:]
    u2 = (du - params.g2(eps2)) / T
    u = np.where(spacing_branch, u2, u1)
    branch = np.where(spacing_branch, 2, 1)
    return u, branch, eps1, eps2


def control(
    state: PlatoonState, i: int, profile: Profile, params: ControllerParams
) -> ControlDecision:
    """Control decision for vehicle ``i`` (1-based)."""
    if not 1 <= i <= state.n:
        raise IndexError(f"vehicle index {i} out of range 1..{state.n}")
    u, branch, eps1, eps2 = control_arrays(state.x, state.y, profile, params)
    k = i - 1
    return ControlDecision(
        u=float(u[k]),
        branch=int(branch[k]),
        eps=ErrorPair(eps1=float(eps1[k]), eps2=float(eps2[k])),
    )


def closed_loop_rhs(
    state: PlatoonState, profile: Profile, params: ControllerParams
) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative (dx/dt, dy/dt) of the closed-loop platoon."""
    u, _, _, _ = control_arrays(state.x, state.y, profile, params)
    return state.y.copy(), u


def control_bound(
    state0: PlatoonState, i: int, profile: Profile, params: ControllerParams
) -> tuple[float, float]:
    """Static per-branch bounds on |u_i| along the closed loop from ``state0``.

    Both bounds are evaluated from the initial error magnitudes and the
    profile suprema, so they are constants valid for the whole trajectory
    as long as each vehicle's max error never exceeds its initial value:

    * branch 1: ``(sup v_d + delta_i(0)) * sup |v_d'| + delta_i(0)``
    * branch 2: ``(2 sup v_d + 2 delta_i(0) + delta_{i-1}(0)) / T``

    The leader's phantom predecessor carries ``delta_0 = 0``, consistent
    with its zero spacing error.
    """
    if not 1 <= i <= state0.n:
        raise IndexError(f"vehicle index {i} out of range 1..{state0.n}")
    eps1, eps2 = error_arrays(state0.x, state0.y, profile, params.T)
    delta = np.maximum(np.abs(eps1), np.abs(eps2))
    d_i = float(delta[i - 1])
    d_prev = float(delta[i - 2]) if i >= 2 else 0.0
    sup_v = profile.supremum()
    sup_slope = profile.lipschitz_constant()
    bound1 = (sup_v + d_i) * sup_slope + d_i
    bound2 = (2.0 * sup_v + 2.0 * d_i + d_prev) / params.T
    return bound1, bound2
