"""Exception types shared across the package."""


class TomographyError(Exception):
    """Base class for every error raised by this package."""


class ContractError(TomographyError, ValueError):
    """An argument violates a documented precondition."""


class InvalidStateError(ContractError):
    """A matrix fails the density-matrix invariants beyond tolerance."""


class DegenerateParameterError(ContractError):
    """An all-zero factor vector parametrizes no state."""


class NoInformationError(ContractError):
    """A count record with zero total counts cannot be fitted."""


class NotInformationallyCompleteError(ContractError):
    """The projector set does not span the space of Hermitian observables."""


class SingularModelError(TomographyError):
    """A projector has zero predicted rate but a nonzero rate derivative."""

    def __init__(self, channel: int, message: str | None = None):
        self.channel = channel
        super().__init__(message or f"singular model at projector index {channel}")


class IllPosedBoundError(TomographyError):
    """The normalized Fisher matrix is singular along directions the
    quantum Fisher matrix can see, so the error bound is undefined."""


class TrialFailureError(TomographyError):
    """A Monte Carlo trial failed; the message carries the trial seed."""
