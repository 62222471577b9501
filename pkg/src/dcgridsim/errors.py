"""Exception types shared across the package."""


class DcGridError(Exception):
    """Base class for all errors raised by dcgridsim."""


class ParseError(DcGridError):
    """Scenario file is not valid JSON or not a JSON object."""


class ValidationError(DcGridError):
    """A scenario field violates an invariant. The message names the field."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DanglingReference(DcGridError):
    """A component references a profile, source, or battery that does not exist."""

    def __init__(self, name: str, referrer: str = ""):
        self.name = name
        self.referrer = referrer
        where = f" (referenced by {referrer})" if referrer else ""
        super().__init__(f"unknown reference {name!r}{where}")


class NoConvergence(DcGridError):
    """An iterative solver exhausted its iteration cap."""


class PoleHit(DcGridError):
    """Transfer function evaluated at (numerically) a pole."""


class DegenerateRow(DcGridError):
    """An entire Routh row vanished (symmetric root pattern); verdict withheld."""


class NoStableGain(DcGridError):
    """No proportional gain stabilizes the closed loop, even arbitrarily small."""


class NumericalBlowup(DcGridError):
    """A simulated state exceeded the magnitude guard; reports time and signal."""

    def __init__(self, t: float, signal: str, value: float):
        self.t = t
        self.signal = signal
        self.value = value
        super().__init__(f"state {signal!r} reached {value:.3e} at t={t:.6f} s")
