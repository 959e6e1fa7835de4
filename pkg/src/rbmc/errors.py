"""Exception types shared across the package."""


class DegenerateConfigurationError(RuntimeError):
    """A sampler configuration that cannot make progress.

    Raised when a tour never accepts within its safety cap, when a
    regeneration keeps landing outside the support, or when an exact
    oracle hits a singular case (for example a rejection second moment
    of exactly one).
    """


class SpecError(ValueError):
    """Invalid experiment specification.

    Attributes:
        field: dotted path of the offending field, e.g. ``"proposal.grid"``.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message
