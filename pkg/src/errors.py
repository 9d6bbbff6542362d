"""Exceptions shared across the package.

Two families matter to the command line: configuration problems (exit 1) and
mathematical failures (exit 2). Everything else is left to propagate.
"""

__author__ = "Krylov Torus contributors"
__copyright__ = "Copyright 2026, Krylov Torus contributors"
__license__ = "MIT"


import typing


class ConfigError(ValueError):
    """The run configuration is malformed or out of range."""


class AssumptionViolation(ConfigError):
    """The coefficient functions break a clause of the standing assumption."""

    def __init__(self, clause: str, message: str) -> None:
        """
        Record the failing clause.

        Args:
        ----
            clause: Which clause failed ("i", "ii" or "iii").
            message: Human readable detail.

        """
        super().__init__(f"Assumption ({clause}) violated: {message}")
        self.clause = clause


class MathematicalFailure(RuntimeError):
    """A computation could not produce a mathematically valid answer."""


class ConeViolation(MathematicalFailure, ValueError):
    """A point left the admissible cone or the cone condition failed."""

    def __init__(
        self,
        message: str,
        node: int | None = None,
        eigenvalues: typing.Sequence[float] | None = None,
    ) -> None:
        """
        Record where the cone was left.

        Args:
        ----
            message: Human readable detail.
            node: Flat grid index of the offending node, if known.
            eigenvalues: Eigenvalues at the offending node, if known.

        """
        detail = message
        if node is not None:
            detail += f" (node {node}"
            if eigenvalues is not None:
                detail += f", eigenvalues {[float(x) for x in eigenvalues]}"
            detail += ")"
        super().__init__(detail)
        self.node = node
        self.eigenvalues = None if eigenvalues is None else tuple(eigenvalues)


class ConvergenceFailure(MathematicalFailure):
    """An iteration did not converge."""


class ConeTrapped(ConvergenceFailure):
    """The line search could not keep the iterate inside the cone."""


class HomotopyFailure(ConvergenceFailure):
    """The continuity path could not be followed to its end."""

    def __init__(self, message: str, last_good_state: typing.Any = None) -> None:  # noqa: ANN401 The state type lives in src.solver
        """
        Keep the last state that solved its equation.

        Args:
        ----
            message: Human readable detail.
            last_good_state: The final converged state before the failure.

        """
        super().__init__(message)
        self.last_good_state = last_good_state


class SuiteFailure(MathematicalFailure):
    """At least one verification suite failed."""
