"""Exception hierarchy.

Configuration problems (bad operators, parameters, measurement sets) derive
from :class:`ConfigError`; failures of the linear algebra derive from
:class:`NumericalError`. The CLI maps the two families to exit codes 2 and 3.
"""


class ReconstructionError(Exception):
    pass


class ConfigError(ReconstructionError, ValueError):
    pass


class InvalidOperatorError(ConfigError):
    pass


class InvalidParameterError(ConfigError):
    pass


class InvalidInputError(ConfigError):
    pass


class NotAdmissibleError(ConfigError):
    """Point evaluation requested on a native space that is not an RKHS."""


class UnsupportedOperatorError(ConfigError):
    pass


class NumericalError(ReconstructionError, ArithmeticError):
    pass


class DegenerateSystemError(NumericalError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


class DegenerateMeasurementsError(NumericalError):
    """The measurements do not separate the null space of the operator."""
