"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A constructor or operation received out-of-contract arguments."""


class InfeasibleError(RuntimeError):
    """The requested operating point cannot be met by any admissible policy.

    Carries a `report` attribute (FeasibilityReport or str) describing the
    violated constraint.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnboundedObjectiveError(RuntimeError):
    """Per-state Lagrangian is unbounded (power price below the RF reward)."""


class ConvergenceError(RuntimeError):
    """A solver loop ran out of iterations.

    `diagnostics` holds the final constraint violations or the trajectory of
    the quantity that failed to settle.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics
