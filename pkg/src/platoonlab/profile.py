"""Desired-velocity profiles over position.

A profile maps road position x (m) to the speed every vehicle should hold
there (m/s).  Two shapes are provided: the canonical single speed drop
(cruise speed falling linearly to a lower plateau) and a general piecewise
linear profile.  Both are defined on all of R by constant extrapolation,
are globally Lipschitz, and have a strictly positive infimum, which is
what the controller's stability argument requires.

Profiles are immutable; evaluation accepts scalars or numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .exceptions import HypothesisError


@dataclass(frozen=True)
class SpeedDropProfile:
    """Cruise at ``v0``, then drop linearly to ``(1 - rho) * v0``.

    The drop starts at ``drop_start`` and is complete ``drop_length``
    metres later.  ``rho`` is the fractional speed loss, so ``rho = 0.5``
    with ``v0 = 20`` is the 20 -> 10 m/s drop used by the shipped
    scenarios.
    """

    v0: float
    rho: float
    drop_start: float
    drop_length: float

    def __post_init__(self):
        if not self.v0 > 0:
            raise ValueError(f"v0 must be positive, got {self.v0!r}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must be in [0, 1), got {self.rho!r}")
        if not self.drop_length > 0:
            raise ValueError(
                f"drop_length must be positive, got {self.drop_length!r}"
            )

    @property
    def drop_end(self) -> float:
        return self.drop_start + self.drop_length

    def __call__(self, x):
        """Desired speed at position x (constant outside the ramp)."""
        ends = np.array([self.drop_start, self.drop_end])
        speeds = np.array([self.v0, (1.0 - self.rho) * self.v0])
        return np.interp(x, ends, speeds)

    def derivative(self, x):
        """Right-hand slope of the profile at x (1/s).

        Inside the ramp the slope is ``-rho * v0 / drop_length``; on the
        plateaus it is zero.  At the two kinks the right-hand value is
        returned, so the ramp slope applies at ``drop_start`` and zero at
        ``drop_end``.
        """
        x = np.asarray(x, dtype=float)
        slope = -self.rho * self.v0 / self.drop_length
        inside = (x >= self.drop_start) & (x < self.drop_end)
        out = np.where(inside, slope, 0.0)
        return out if out.shape else float(out)

    def lipschitz_constant(self) -> float:
        return self.rho * self.v0 / self.drop_length

    def infimum(self) -> float:
        return (1.0 - self.rho) * self.v0

    def supremum(self) -> float:
        return self.v0


@dataclass(frozen=True)
class PiecewiseLinearProfile:
    """Linear interpolation between breakpoints, constant outside them.

    Generalizes the single-drop shape so the controller can be exercised
    on arbitrary Lipschitz profiles (multiple drops, recoveries, ...).
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) != len(vals):
            raise ValueError("breakpoints and values must have equal length")
        if len(bp) < 1:
            raise ValueError("need at least one breakpoint")
        if any(b2 <= b1 for b1, b2 in zip(bp, bp[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        if any(v <= 0 for v in vals):
            raise ValueError("all profile speeds must be positive")

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    def derivative(self, x):
        """Right-hand slope at x: each breakpoint takes its right segment."""
        x = np.asarray(x, dtype=float)
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        if len(bp) == 1:
            out = np.zeros_like(x)
            return out if out.shape else 0.0
        slopes = np.diff(vals) / np.diff(bp)
        # segment index k covers [bp[k], bp[k+1]); outside gets slope 0
        idx = np.searchsorted(bp, x, side="right") - 1
        valid = (idx >= 0) & (idx <= len(slopes) - 1)
        out = np.where(valid, slopes[np.clip(idx, 0, len(slopes) - 1)], 0.0)
        return out if out.shape else float(out)

    def lipschitz_constant(self) -> float:
        if len(self.breakpoints) == 1:
            return 0.0
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        return float(np.max(np.abs(np.diff(vals) / np.diff(bp))))

    def infimum(self) -> float:
        return min(self.values)

    def supremum(self) -> float:
        return max(self.values)


Profile = Union[SpeedDropProfile, PiecewiseLinearProfile]


@dataclass(frozen=True)
class HypothesisCheck:
    """Outcome of checking the stability hypotheses for a (profile, T) pair."""

    lipschitz_constant: float
    infimum: float
    headway: float
    failures: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def contraction_factor(self) -> float:
        """M * T; the target-curve fixed point contracts iff this is < 1."""
        return self.lipschitz_constant * self.headway


def validate(profile: Profile, T: float) -> HypothesisCheck:
    """Check ``M * T < 1`` and ``inf v_d > 0`` for the given headway.

    Returns the measured constants together with the list of violated
    hypotheses (empty when both hold).
    """
    if not T > 0:
        raise ValueError(f"time headway T must be positive, got {T!r}")
    M = profile.lipschitz_constant()
    inf_v = profile.infimum()
    failures = []
    if not M * T < 1.0:
        failures.append(
            f"Lipschitz bound violated: M*T = {M * T:.6g} >= 1 "
            f"(M = {M:.6g} 1/s, T = {T:.6g} s)"
        )
    if not inf_v > 0.0:
        failures.append(f"profile infimum not positive: inf v_d = {inf_v:.6g}")
    return HypothesisCheck(
        lipschitz_constant=M,
        infimum=inf_v,
        headway=float(T),
        failures=tuple(failures),
    )


def ensure_valid(profile: Profile, T: float) -> HypothesisCheck:
    """Like :func:`validate` but raises :class:`HypothesisError` on failure."""
    check = validate(profile, T)
    if not check.ok:
        raise HypothesisError("; ".join(check.failures))
    return check
