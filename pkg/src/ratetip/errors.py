"""Exception hierarchy.

Three families, matching the CLI exit-code contract:

* :class:`UsageError` (exit 1) — bad options, bad config, unsupported orders.
* :class:`MathPreconditionError` (exit 2) — a standing assumption of the
  analysis fails (fold, gap collapse, non-hyperbolic root, ...).
* :class:`ConvergenceError` (exit 3) — iteration/integration did not converge.
"""


class RatetipError(Exception):
    """Base class for all library errors."""

    exit_code = 2


class UsageError(RatetipError):
    """Invalid option, configuration value, or request."""

    exit_code = 1


class OrderTooHigh(UsageError):
    """Requested derivative/series order exceeds the supported maximum."""


class MathPreconditionError(RatetipError):
    """A mathematical precondition of the method is violated."""

    exit_code = 2


class OutOfDomain(MathPreconditionError):
    """Evaluation requested outside the field's trusted bounding box."""


class NonHyperbolicRoot(MathPreconditionError):
    """A frozen-system root has |∂ₓf| below the hyperbolicity tolerance."""


class NoRoots(MathPreconditionError):
    """The frozen system has no equilibria in the trusted domain."""


class BranchFold(MathPreconditionError):
    """Continuation lost hyperbolicity: a fold of quasi-static equilibria."""


class GapCollapse(MathPreconditionError):
    """Two quasi-static branches come closer than the gap tolerance."""


class MarginLoss(MathPreconditionError):
    """|∂ₓf| dropped below the hyperbolicity tolerance along a branch."""


class ConvergenceError(RatetipError):
    """Numerical iteration failed to converge."""

    exit_code = 3


class ToleranceFailure(ConvergenceError):
    """The ODE integrator's step size underflowed before reaching the target."""


class NoConvergence(ConvergenceError):
    """An anchored pullback iteration exhausted its anchor budget."""
