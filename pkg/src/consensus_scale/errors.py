"""Exception hierarchy.

Validation problems subclass ``ValueError`` so callers can treat them like any
other bad-argument error; numerical failures subclass ``ArithmeticError``.
The CLI maps the first family to exit code 1 and the second to exit code 2.
"""


class ConsensusScaleError(Exception):
    pass


class ValidationError(ConsensusScaleError, ValueError):
    pass


class NumericalError(ConsensusScaleError, ArithmeticError):
    pass


class GraphError(ValidationError):
    """Malformed graph: self-loop, duplicate edge, bad weight or node id."""


class DisconnectedGraphError(ValidationError):
    pass


class PartitionError(ValidationError):
    pass


class EmptyX3Error(PartitionError):
    """The seed's closed neighbourhood covers the whole graph."""


class InfeasibleSpecError(ValidationError):
    pass


class RetryExhaustedError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnstableSystemError(NumericalError):
    pass


class StepSizeError(NumericalError):
    pass
