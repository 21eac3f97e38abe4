"""
Stationary distributions: a direct linear solve, power iteration and
the closed forms of the three chains, which serve as independent
oracles for one another.
"""

import logging
import math
import warnings
from typing import Dict, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from matching_chains.chain import (
    LumpedChain,
    build_matrix,
    enumerate_signed_states,
    lump_by_symmetry,
)
from matching_chains.core import (
    AssortativeState,
    ChainKind,
    Method,
    Probability,
    SignedQueueState,
    StationaryDistribution,
    ThresholdConfig,
    TransitionMatrix,
)
from matching_chains.exceptions import (
    BalanceEquationError,
    NonConvergenceError,
    PreconditionError,
    SingularSystemError,
    SolverError,
)

__all__ = (
    "DIRECT_TOLERANCE",
    "CLOSED_FORM_TOLERANCE",
    "K2_CLASSES",
    "K2_MULTIPLICITY",
    "stationary_residual",
    "stationary_direct",
    "stationary_power",
    "closed_form_twoway",
    "closed_form_assortative_k2",
    "closed_form_disassortative",
    "assortative_k2_balance_residuals",
    "verify_assortative_k2_balance",
    "detailed_balance_residual",
    "exact_stationary",
)

logger = logging.getLogger(__name__)

DIRECT_TOLERANCE = 1e-12
CLOSED_FORM_TOLERANCE = 1e-9
NEGATIVE_TOLERANCE = 1e-14

ChainMatrix = Union[TransitionMatrix, LumpedChain]

K2_CLASSES = tuple(
    AssortativeState(a)
    for a in ((0, 0, 0), (1, 0, 0), (1, 1, 0), (2, 0, 0), (2, 1, 0), (2, 2, 0))
)
K2_MULTIPLICITY = (1, 3, 3, 3, 6, 3)

# polynomial coefficients, highest degree first
_A_NUMERATOR = (1, -6, 18, -34, 31, -20)
_A_DENOMINATOR = (1, -6, 17, -30, 28, -18)
_B_NUMERATOR = (1, -9, 38, -97, 159, -173, 116, -42)
_QUADRATIC = (1, -2, 2)
_X3_DENOMINATOR = (19, -163, 670, -1707, 2800, -3079, 2086, -786)


def _multiplicity(m: ChainMatrix):
    if isinstance(m, LumpedChain):
        return m.multiplicity
    return None


def stationary_residual(m: ChainMatrix, probs: Sequence[float]) -> float:
    """
    Sup norm of ``pi P - pi``
    """
    probs = np.asarray(probs, dtype=float)
    return float(np.max(np.abs(m.to_sparse().T @ probs - probs)))


def stationary_direct(m: ChainMatrix) -> StationaryDistribution:
    """
    Solve ``pi (P - I) = 0`` with ``sum(pi) = 1`` replacing the last
    balance equation, by LU factorisation with partial pivoting

    Parameters
    ----------
    m : TransitionMatrix or LumpedChain
        An ergodic chain

    Returns
    -------
    StationaryDistribution
        The stationary law with its residual

    Raises
    ------
    SingularSystemError
        If the chain has no unique stationary distribution
    SolverError
        If the solution misses the residual tolerance
    """
    dense = m.to_dense()
    size = dense.shape[0]
    system = (dense - np.eye(size)).T
    system[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", scipy.linalg.LinAlgWarning)
        try:
            probs = scipy.linalg.solve(system, rhs)
        except (scipy.linalg.LinAlgError, ValueError) as error:
            raise SingularSystemError(
                "balance system is singular: {0}".format(error)
            ) from error
    for warning in caught:
        logger.debug("direct solve: %s", warning.message)
    if not np.all(np.isfinite(probs)) or probs.min() < -NEGATIVE_TOLERANCE:
        raise SingularSystemError(
            "balance system has no probability solution; "
            "is the chain ergodic?"
        )
    probs = np.clip(probs, 0.0, None)
    probs /= math.fsum(probs)
    residual = stationary_residual(m, probs)
    if residual > DIRECT_TOLERANCE:
        raise SolverError(
            "direct solve residual {0:.3e} above {1:.0e}".format(
                residual, DIRECT_TOLERANCE
            )
        )
    return StationaryDistribution(
        probs=probs,
        states=m.states,
        method=Method.DIRECT,
        residual=residual,
        kind=m.kind,
        multiplicity=_multiplicity(m),
    )


def stationary_power(
    m: ChainMatrix,
    tol: float = 1e-12,
    max_iter: int = 1_000_000,
) -> StationaryDistribution:
    """
    Iterate ``pi <- pi P`` from the uniform vector until
    ``||pi P - pi||_1 < tol``

    Raises
    ------
    NonConvergenceError
        If ``max_iter`` iterations do not reach the tolerance
    """
    if not tol > 0.0:
        raise ValueError("tol must be positive")
    transposed = m.to_sparse().T.tocsr()
    size = transposed.shape[0]
    probs = np.full(size, 1.0 / size)
    residual = math.inf
    for iteration in range(1, max_iter + 1):
        following = transposed @ probs
        following /= following.sum()
        residual = float(np.sum(np.abs(following - probs)))
        probs = following
        if residual < tol:
            break
    else:
        raise NonConvergenceError(
            "power iteration stopped at residual {0:.3e} after {1} "
            "iterations".format(residual, max_iter),
            last_iterate=probs,
            residual=residual,
            iterations=max_iter,
        )
    logger.debug("power iteration converged in %d iterations", iteration)
    return StationaryDistribution(
        probs=probs,
        states=m.states,
        method=Method.POWER,
        residual=stationary_residual(m, probs),
        kind=m.kind,
        multiplicity=_multiplicity(m),
        iterations=iteration,
    )


def closed_form_twoway(k_bar: int) -> StationaryDistribution:
    """
    Uniform law over the ``2 k_bar + 1`` signed states; it does not
    depend on ``p``
    """
    thresholds = ThresholdConfig(k_bar=k_bar)
    states = enumerate_signed_states(*thresholds.bounds(ChainKind.TWOWAY))
    return StationaryDistribution(
        probs=np.full(len(states), 1.0 / len(states)),
        states=states,
        method=Method.CLOSED_FORM,
        kind=ChainKind.TWOWAY,
    )


def _k2_coefficients(p: float) -> Tuple[float, float, float]:
    denominator = np.polyval(_A_DENOMINATOR, p)
    quadratic = np.polyval(_QUADRATIC, p)
    a = np.polyval(_A_NUMERATOR, p) / denominator
    b = np.polyval(_B_NUMERATOR, p) / (denominator * quadratic)
    x3 = quadratic * denominator / np.polyval(_X3_DENOMINATOR, p)
    return float(a), float(b), float(x3)


def closed_form_assortative_k2(
    p: Union[Probability, float],
) -> StationaryDistribution:
    """
    Closed-form lumped stationary law of the assortative chain with
    ``k_bar = 2``

    With ``x3`` the common probability of the ``(1,1,0)`` states and the
    rational functions ``A(p)``, ``B(p)``::

        x2 = A x3          x1 = (p A + q) x3
        x5 = B x3          x4 = (q A + 2 B) / (2 - p) x3
                           x6 = (p + 2 q B) / (3 - p) x3

    Returns
    -------
    StationaryDistribution
        Class masses over `K2_CLASSES` with `K2_MULTIPLICITY`;
        ``per_state`` gives ``x1..x6``
    """
    p = Probability.of(p)
    x, q = p.p, p.q
    a, b, x3 = _k2_coefficients(x)
    per_state = np.array([
        (x * a + q) * x3,
        a * x3,
        x3,
        (q * a + 2.0 * b) / (2.0 - x) * x3,
        b * x3,
        (x + 2.0 * q * b) / (3.0 - x) * x3,
    ])
    probs = per_state * np.asarray(K2_MULTIPLICITY, dtype=float)
    lumped = lump_by_symmetry(
        build_matrix(ChainKind.ASSORTATIVE, p, ThresholdConfig(k_bar=2))
    )
    return StationaryDistribution(
        probs=probs,
        states=K2_CLASSES,
        method=Method.CLOSED_FORM,
        residual=stationary_residual(lumped, probs),
        kind=ChainKind.ASSORTATIVE,
        multiplicity=K2_MULTIPLICITY,
    )


def _geometric_tail(ratio: float, terms: int) -> float:
    """
    ``ratio + ratio^2 + ... + ratio^terms``
    """
    if abs(1.0 - ratio) < 1e-8:
        return math.fsum(ratio ** i for i in range(1, terms + 1))
    return ratio * (1.0 - ratio ** terms) / (1.0 - ratio)


def closed_form_disassortative(
    p: Union[Probability, float],
    k_high: int,
    k_low: int,
) -> StationaryDistribution:
    """
    Stationary law of the dis-assortative chain, a mixture of two
    truncated geometric laws glued at ``k = 0``

    ``pi_{-i} = a^i pi_0`` with ``a = q^3 / (p^3 + 3 p^2 q)`` and
    ``pi_{+i} = b^i pi_0`` with ``b = p^3 / (3 p q^2 + q^3)``
    """
    p = Probability.of(p)
    thresholds = ThresholdConfig(k_high=k_high, k_low=k_low)
    x, q = p.p, p.q
    a = q ** 3 / (x ** 3 + 3.0 * x * x * q)
    b = x ** 3 / (3.0 * x * q * q + q ** 3)
    origin = 1.0 / (
        1.0 + _geometric_tail(a, k_low) + _geometric_tail(b, k_high)
    )
    probs = (
        [a ** i * origin for i in range(k_low, 0, -1)]
        + [origin]
        + [b ** i * origin for i in range(1, k_high + 1)]
    )
    matrix = build_matrix(ChainKind.DISASSORTATIVE, p, thresholds)
    return StationaryDistribution(
        probs=probs,
        states=matrix.states,
        method=Method.CLOSED_FORM,
        residual=stationary_residual(matrix, probs),
        kind=ChainKind.DISASSORTATIVE,
    )


def assortative_k2_balance_residuals(
    x: Sequence[float],
    p: Union[Probability, float],
) -> Dict[str, float]:
    """
    Residuals of the seven balance equations of the lumped ``k_bar = 2``
    assortative chain, divided by ``p q``

    Parameters
    ----------
    x : Sequence[float]
        Per-state probabilities of the classes (0,0,0), (1,0,0),
        (1,1,0), (2,0,0), (2,1,0), (2,2,0)
    p : Probability or float
        Proportion of High types

    Returns
    -------
    Dict[str, float]
        Signed residual (left minus right side) per equation, in order
    """
    p = Probability.of(p)
    s, q = p.p, p.q
    x1, x2, x3, x4, x5, x6 = (float(value) for value in x)
    return {
        "origin": x1 - (s * x2 + q * x3),
        "single-high": 3 * x2 - (q * x1 + 2 * s * x3 + s * x4 + 2 * q * x5),
        "double-high": 3 * x3 - (s * x1 + 2 * q * x2 + 2 * s * x5 + q * x6),
        "edge": (2 - s) * x4 - (q * x2 + 2 * x5),
        "edge-interior": (3 - s) * x5 - (s * x2 + q * x3 + q * x4 + x6),
        "corner": (3 - s) * x6 - (s * x3 + 2 * q * x5),
        "normalization": 1 - (x1 + 3 * x2 + 3 * x3 + 3 * x4 + 6 * x5 + 3 * x6),
    }


def verify_assortative_k2_balance(
    x: Sequence[float],
    p: Union[Probability, float],
    tolerance: float = 1e-10,
) -> Dict[str, float]:
    """
    Raise `BalanceEquationError` naming the first balance equation whose
    residual exceeds ``tolerance``; return all residuals otherwise
    """
    residuals = assortative_k2_balance_residuals(x, p)
    for name, residual in residuals.items():
        if abs(residual) > tolerance:
            raise BalanceEquationError(name, residual)
    return residuals


def detailed_balance_residual(
    m: TransitionMatrix,
    dist: StationaryDistribution,
) -> float:
    """
    Largest ``|pi_i P(i, i+1) - pi_{i+1} P(i+1, i)|`` of a birth-death
    chain
    """
    probs = dist.probs
    worst = 0.0
    for i in range(len(m.states) - 1):
        up = m.rows[i].get(i + 1, 0.0)
        down = m.rows[i + 1].get(i, 0.0)
        worst = max(worst, abs(probs[i] * up - probs[i + 1] * down))
    return worst


def _closed_form(kind: ChainKind, p: Probability,
                 thresholds: ThresholdConfig,
                 chain: ChainMatrix) -> StationaryDistribution:
    if kind is ChainKind.TWOWAY:
        return closed_form_twoway(thresholds.k_bar)
    if kind is ChainKind.DISASSORTATIVE:
        return closed_form_disassortative(
            p, thresholds.k_high, thresholds.k_low
        )
    if thresholds.k_bar != 2:
        raise PreconditionError(
            "the assortative closed form exists for k_bar = 2 only"
        )
    dist = closed_form_assortative_k2(p)
    if isinstance(chain, LumpedChain):
        return dist
    return lump_by_symmetry(chain).expand(dist)


def exact_stationary(
    kind: ChainKind,
    p: Union[Probability, float],
    thresholds: ThresholdConfig,
    lumped: bool = False,
    method: Method = Method.DIRECT,
    tol: float = 1e-12,
) -> Tuple[ChainMatrix, StationaryDistribution]:
    """
    Build a chain and compute its stationary law with the given method

    A closed form is checked against the direct solve of the generated
    chain; on a disagreement beyond `CLOSED_FORM_TOLERANCE` the finding is
    logged and the direct law of the generated chain is returned.

    Returns
    -------
    Tuple[TransitionMatrix or LumpedChain, StationaryDistribution]
        The chain that was solved and its stationary law
    """
    kind = ChainKind(kind)
    method = Method(method)
    p = Probability.of(p)
    matrix = build_matrix(kind, p, thresholds)
    if lumped:
        chain = lump_by_symmetry(matrix)
    else:
        chain = matrix
    if method is Method.DIRECT:
        return chain, stationary_direct(chain)
    if method is Method.POWER:
        return chain, stationary_power(chain, tol=tol)
    if method is Method.CLOSED_FORM:
        dist = _closed_form(kind, p, thresholds, chain)
        dist = dist.with_residual(stationary_residual(chain, dist.probs))
        direct = stationary_direct(chain)
        gap = float(np.max(np.abs(direct.probs - dist.probs)))
        if gap > CLOSED_FORM_TOLERANCE:
            logger.warning(
                "closed form of the %s chain (p=%r, %r) differs from the "
                "generated chain by %.3e",
                kind, p.p, thresholds, gap,
            )
            return chain, direct
        return chain, dist
    raise ValueError("an exact method is required, got {0}".format(method))
