"""Exception hierarchy.

Errors split into input problems (bad files, bad flags) and numerical
problems (singular matrices, degenerate statistics); the CLI maps the two
families to different exit codes.
"""


class EivError(Exception):
    """Base class for every error raised by this package."""


class InputError(EivError):
    """User-supplied data or configuration is unusable."""


class NumericalError(EivError):
    """A computation could not be carried out on otherwise valid input."""


class ParseError(InputError):
    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DimensionMismatch(InputError):
    pass


class NonFiniteValue(ParseError):
    pass


class InvalidConfig(InputError):
    pass


class UnknownModel(InputError):
    pass


class EmptyWindow(NumericalError):
    """No abscissa falls inside the kernel window around the query point."""


class SingularCovariance(NumericalError):
    pass


class DegenerateSpectrum(NumericalError):
    """All candidate-matrix eigenvalues are zero, so the BIC ratio is 0/0."""


class SingularDesign(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class InsufficientVariance(NumericalError):
    """Estimated variance of the statistic is too small to standardize by."""
