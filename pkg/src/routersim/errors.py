"""Exception hierarchy.

The CLI maps these onto its exit-code contract: DomainError -> 1,
InputError -> 2, NumericError -> 3.
"""


class RouterSimError(Exception):
    """Base class for all package errors."""


class InputError(RouterSimError):
    """Unreadable or unparsable input (files, malformed schemas)."""


class DomainError(RouterSimError):
    """A physical or structural invariant is violated."""


class NumericError(RouterSimError):
    """A numerical procedure failed (integration, root finding)."""


class InvariantViolation(DomainError):
    """A validated quantity left its allowed range (named field + reason)."""


class TopologyError(DomainError):
    """Coupling graph is not a SNAIL-rooted tree of waveguide-cavity chains."""


class DegenerateDetuningError(DomainError):
    """|Delta| < 10 g: the dispersive expansion is not trustworthy."""


class NoMinimumError(DomainError):
    """Potential has no stable minimum for the given circuit parameters."""


class NoCrossingError(DomainError):
    """Sign-change search found no zero crossing on the interval."""


class ResonanceError(DomainError):
    """Pump too close to the mode frequency for the displacement transform."""


class UnknownProtocolError(DomainError):
    """Protocol name not in the compiled set."""


class MissingCalibrationError(DomainError):
    """A required gate-time calibration entry is absent from the device."""


class ScheduleError(DomainError):
    """Schedule steps conflict on a physical resource or reference unknown modes."""


class DimensionCapError(DomainError):
    """Tensor-product dimension exceeds the configured cap."""


class StepFailureError(NumericError):
    """Integrator could not meet the requested tolerance."""


class NoRootError(NumericError):
    """Bracketed root search found no root."""
