"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid scenario file, schema violation, or inconsistent configuration.

    Carries a human-readable message naming the offending field path,
    e.g. ``obstacles[0].x_range``.
    """


class NumericalError(RuntimeError):
    """Degenerate or ill-conditioned numerical situation.

    Raised e.g. for an all-zero codeword envelope or a rank-deficient
    effective channel in the zero-forcing solve.
    """

    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number
