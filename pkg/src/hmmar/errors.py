"""Exception hierarchy shared by all hmmar modules."""

from __future__ import annotations


class HmMarError(Exception):
    """Base class for every error raised by hmmar."""


class InvalidModel(HmMarError, ValueError):
    """A model violates its structural invariants or cannot be parsed."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class InvalidSeries(HmMarError, ValueError):
    """A series file cannot be parsed."""


class DimensionMismatch(HmMarError, ValueError):
    pass


class NonErgodicChain(HmMarError):
    """The transition matrix has no unique, attracting invariant measure."""


class UnsupportedOrder(HmMarError):
    """Stability analysis is only defined for first-order models."""


class ConditionViolated(HmMarError):
    """A spectral condition needed for a limit or bound does not hold.

    Attributes
    ----------
    condition : str
        Name of the failing condition, e.g. ``"rho(P phi1) < 1"``.
    value : float
        The offending spectral radius (or lambda).
    """

    def __init__(self, condition: str, value: float):
        super().__init__(f"condition {condition} violated (value={value!r})")
        self.condition = condition
        self.value = value


class NumericalUnderflow(HmMarError):
    def __init__(self, t: int, message: str = "all regime densities vanish"):
        super().__init__(f"t={t}: {message}")
        self.t = t


class DegenerateRegime(HmMarError):
    def __init__(self, regime: int, message: str):
        super().__init__(f"regime {regime}: {message}")
        self.regime = regime


class InsufficientData(HmMarError, ValueError):
    pass


class AllRestartsFailed(HmMarError):
    def __init__(self, reasons):
        self.reasons = list(reasons)
        lines = "; ".join(f"restart {i}: {r}" for i, r in enumerate(self.reasons))
        super().__init__(f"every EM restart failed ({lines})")
