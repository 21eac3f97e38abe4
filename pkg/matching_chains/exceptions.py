"""
Exception hierarchy shared by every module of the package.

Argument validation keeps raising the built-in exceptions (`TypeError`,
`ValueError`); the classes below mark failures of the chains, solvers and
simulator themselves.
"""

from typing import Any, Mapping, Optional

__all__ = (
    "MatchingChainError",
    "PreconditionError",
    "LumpabilityError",
    "SolverError",
    "SingularSystemError",
    "NonConvergenceError",
    "BalanceEquationError",
    "InvariantViolation",
    "MissingUtilityError",
)


class MatchingChainError(Exception):
    """
    Base class of every error raised by `matching_chains`
    """


class PreconditionError(MatchingChainError, ValueError):
    """
    Raised when a state, threshold or probability violates
    the precondition of the operation it was handed to
    """


class LumpabilityError(MatchingChainError):
    """
    Raised when two members of a symmetry class have different
    aggregated transition rows
    """

    def __init__(self, message: str, class_index: int, discrepancy: float):
        super().__init__(message)
        self.class_index = class_index
        self.discrepancy = discrepancy


class SolverError(MatchingChainError):
    """
    Base class of stationary-distribution solver failures
    """


class SingularSystemError(SolverError):
    """
    Raised when the augmented balance system has no unique solution
    """


class NonConvergenceError(SolverError):
    """
    Raised when power iteration exhausts its iteration budget

    Attributes
    ----------
    last_iterate : numpy.ndarray
        The distribution reached by the final iteration
    residual : float
        L1 norm of ``pi P - pi`` for the final iterate
    iterations : int
        Number of iterations carried out
    """

    def __init__(self, message: str, last_iterate, residual: float,
                 iterations: int):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.iterations = iterations


class BalanceEquationError(MatchingChainError):
    """
    Raised when a closed-form balance equation of the k_bar = 2 assortative
    chain is not satisfied by a candidate solution
    """

    def __init__(self, equation: str, residual: float):
        super().__init__(
            "balance equation '{0}' violated (residual {1:.3e})".format(
                equation, residual
            )
        )
        self.equation = equation
        self.residual = residual


class InvariantViolation(MatchingChainError, RuntimeError):
    """
    Raised by the simulator when a market invariant breaks

    Attributes
    ----------
    period : int
        One-based period in which the violation was observed; the first
        simulated period is 1
    trace : Mapping[str, Any]
        Market state before and after the period, the arrival and
        whatever else helps to reproduce the failure
    """

    def __init__(self, message: str, period: int,
                 trace: Optional[Mapping[str, Any]] = None):
        super().__init__(
            "period {0}: {1}".format(period, message)
        )
        self.period = period
        self.trace = dict(trace or {})


class MissingUtilityError(MatchingChainError, KeyError):
    """
    Raised when a team composition with a positive rate has no utility
    """

    def __init__(self, composition: str):
        super().__init__(composition)
        self.composition = composition

    def __str__(self) -> str:
        return "no utility given for team composition {0!r}".format(
            self.composition
        )
