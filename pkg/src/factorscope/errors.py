"""Exception hierarchy.

Input problems (bad files, bad shapes, bad arguments) derive from
``InputError``; failures of the numerics on otherwise valid input derive from
``NumericError``. The CLI maps the two families to exit codes 2 and 3.
"""


class FactorscopeError(Exception):
    pass


class InputError(FactorscopeError):
    pass


class ParseError(InputError):
    """Malformed CSV content. Carries the 1-based ``row`` and, when known, ``col``."""

    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class DimensionError(InputError):
    pass


class LagError(InputError):
    pass


class PartitionError(InputError):
    pass


class ConfigError(InputError):
    pass


class NumericError(FactorscopeError):
    """Numerical failure. ``diagnostics`` holds whatever the solver reported."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateSpectrumError(NumericError):
    pass


class ConditioningError(NumericError):
    pass


class NoiseModelError(NumericError):
    pass


class DegenerateFactorError(NumericError):
    pass
