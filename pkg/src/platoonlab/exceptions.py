"""Exception types shared across the package."""


class PlatoonLabError(Exception):
    """Base class for all package-specific errors."""


class HypothesisError(PlatoonLabError, ValueError):
    """A controller hypothesis is violated (M*T >= 1 or inf v_d <= 0).

    Raised before any computation that relies on the hypothesis, e.g.
    target-curve construction or scenario validation.
    """


class ConvergenceError(PlatoonLabError, RuntimeError):
    """An iterative solve (fixed point, golden section) failed to converge."""


class BlowUpError(PlatoonLabError, RuntimeError):
    """Integration produced a non-finite state component."""

    def __init__(self, t: float, vehicle: int):
        self.t = t
        self.vehicle = vehicle
        super().__init__(
            f"non-finite state for vehicle {vehicle} at t = {t:.6g} s"
        )


class ConfigError(PlatoonLabError, ValueError):
    """A scenario configuration file could not be parsed or validated."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
