"""Exception hierarchy shared by all stages."""


class AugmentError(Exception):
    """Base class for every error raised by this package."""


class InputError(AugmentError, ValueError):
    """Arguments violate a documented precondition."""


class FormatError(AugmentError, ValueError):
    """A file on disk does not follow the expected encoding."""


class EvaluationError(AugmentError):
    """No pixel survived the validity rule, or frames could not be paired."""


class ScoringError(AugmentError):
    """A sub-scene could not be scored (e.g. every holdout frame was excluded)."""


class UnusableSubsceneError(AugmentError):
    """A sub-scene has no training frames to render from."""


class ValidationError(AugmentError, ValueError):
    """Structured input failed validation; ``offenders`` lists what was wrong."""

    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)
