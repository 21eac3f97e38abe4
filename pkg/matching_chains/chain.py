"""
State-space enumeration, transition-matrix construction from the
policy step functions, ergodicity certificates and symmetry lumping.
"""

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import reduce
from types import MappingProxyType
from typing import List, Mapping, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from matching_chains._conversions import NumberConversion
from matching_chains.core import (
    ROW_SUM_TOLERANCE,
    AssortativeState,
    ChainKind,
    Probability,
    SignedQueueState,
    State,
    StationaryDistribution,
    ThresholdConfig,
    TransitionMatrix,
    arrival_probability,
    arrivals_for,
)
from matching_chains.exceptions import LumpabilityError, PreconditionError
from matching_chains.policy import transition_function

__all__ = (
    "LUMP_TOLERANCE",
    "POPULATION_PERMUTATIONS",
    "ErgodicityReport",
    "LumpedChain",
    "enumerate_assortative_states",
    "enumerate_signed_states",
    "enumerate_states",
    "build_matrix",
    "check_ergodicity",
    "lump_by_symmetry",
)

logger = logging.getLogger(__name__)

LUMP_TOLERANCE = 1e-15
POPULATION_PERMUTATIONS = tuple(itertools.permutations(range(3)))


def enumerate_assortative_states(k_bar: int) -> List[AssortativeState]:
    """
    States of the assortative chain: triples in ``[0, k_bar]^3`` with a
    zero coordinate, in lexicographic order. There are
    ``3 k_bar^2 + 3 k_bar + 1`` of them

    Raises
    ------
    PreconditionError
        If ``k_bar < 1``
    """
    ThresholdConfig(k_bar=k_bar).require(ChainKind.ASSORTATIVE)
    return [
        AssortativeState(a)
        for a in itertools.product(range(k_bar + 1), repeat=3)
        if min(a) == 0
    ]


def enumerate_signed_states(lower: int, upper: int) -> List[SignedQueueState]:
    if lower > upper:
        raise PreconditionError(
            "empty signed range [{0}, {1}]".format(lower, upper)
        )
    return [SignedQueueState(k) for k in range(lower, upper + 1)]


def enumerate_states(
    kind: ChainKind,
    thresholds: ThresholdConfig,
) -> List[State]:
    kind = ChainKind(kind)
    if kind is ChainKind.ASSORTATIVE:
        return enumerate_assortative_states(thresholds.k_bar)
    return enumerate_signed_states(*thresholds.bounds(kind))


def build_matrix(
    kind: ChainKind,
    p: Union[Probability, float],
    thresholds: ThresholdConfig,
) -> TransitionMatrix:
    """
    Generate the transition matrix of a chain from its step function.

    The row of a state collects, for each reachable target, the
    probabilities of all arrivals that lead there; rows are therefore an
    exact partition of the arrival distribution.

    Parameters
    ----------
    kind : ChainKind
        Which matching process to build
    p : Probability or float
        Proportion of High types
    thresholds : ThresholdConfig
        Thresholds of the policy

    Returns
    -------
    TransitionMatrix
        The generated matrix, already checked for its invariants
    """
    kind = ChainKind(kind)
    p = NumberConversion.as_probability(p)
    thresholds.require(kind)
    states = enumerate_states(kind, thresholds)
    index = {state: i for i, state in enumerate(states)}
    step = transition_function(kind, thresholds)
    weighted = [
        (arrival, arrival_probability(arrival, p))
        for arrival in arrivals_for(kind)
    ]
    rows = []
    for state in states:
        masses = defaultdict(list)
        for arrival, weight in weighted:
            target, _ = step(state, arrival)
            masses[index[target]].append(weight)
        rows.append(
            {target: math.fsum(values) for target, values in masses.items()}
        )
    matrix = TransitionMatrix(kind, states, rows, p, thresholds)
    logger.debug(
        "built %s matrix with %d states (p=%r, %r)",
        kind, len(states), p.p, thresholds,
    )
    return matrix.check_invariants()


@dataclass(frozen=True)
class ErgodicityReport:
    """
    Computational ergodicity certificate

    Attributes
    ----------
    irreducible : bool
        Whether the positive-entry graph is strongly connected
    aperiodic : bool
        Whether the chain is aperiodic (every diagonal entry positive,
        or an irreducible chain of period 1)
    period : int
        Period of an irreducible chain, 0 when the chain is reducible
    witness : tuple
        For an irreducible chain, a closed walk of positive-probability
        transitions starting at the first state and visiting every state;
        otherwise the states outside the communicating class of the
        first state
    """
    irreducible: bool
    aperiodic: bool
    period: int
    witness: Tuple

    @property
    def ergodic(self) -> bool:
        return self.irreducible and self.aperiodic


def _path(predecessors: np.ndarray, source: int, target: int) -> List[int]:
    path = []
    node = target
    while node != source:
        path.append(node)
        node = int(predecessors[source, node])
        if node < 0:
            raise ValueError(
                "no path from {0} to {1}".format(source, target)
            )
    return path[::-1]


def _closed_walk(graph) -> List[int]:
    _, predecessors = csgraph.shortest_path(
        graph, directed=True, unweighted=True, return_predecessors=True
    )
    walk = [0]
    visited = {0}
    current = 0
    for target in range(graph.shape[0]):
        if target in visited:
            continue
        for node in _path(predecessors, current, target):
            walk.append(node)
            visited.add(node)
        current = target
    walk.extend(_path(predecessors, current, 0))
    return walk


def _period(graph) -> int:
    levels = csgraph.shortest_path(
        graph, directed=True, unweighted=True, indices=0
    )
    coo = graph.tocoo()
    gaps = (
        abs(int(levels[u]) + 1 - int(levels[v]))
        for u, v in zip(coo.row, coo.col)
    )
    return reduce(math.gcd, gaps, 0)


def check_ergodicity(
    m: Union[TransitionMatrix, "LumpedChain"],
) -> ErgodicityReport:
    """
    Certify irreducibility with two graph searches from the first state
    (forward and on the reversed graph) and aperiodicity from the
    positive diagonal, falling back to the BFS-level period otherwise
    """
    graph = m.to_sparse()
    graph.eliminate_zeros()
    size = graph.shape[0]
    forward = csgraph.breadth_first_order(
        graph, 0, directed=True, return_predecessors=False
    )
    backward = csgraph.breadth_first_order(
        graph.T.tocsr(), 0, directed=True, return_predecessors=False
    )
    communicating = set(forward.tolist()) & set(backward.tolist())
    irreducible = len(communicating) == size
    positive_diagonal = bool(np.all(graph.diagonal() > 0.0))
    if irreducible:
        period = 1 if positive_diagonal else _period(graph)
        witness = tuple(m.states[i] for i in _closed_walk(graph))
    else:
        period = 0
        witness = tuple(
            state for i, state in enumerate(m.states)
            if i not in communicating
        )
    report = ErgodicityReport(
        irreducible=irreducible,
        aperiodic=positive_diagonal or period == 1,
        period=period,
        witness=witness,
    )
    logger.debug(
        "ergodicity of %d-state chain: irreducible=%s period=%d",
        size, report.irreducible, report.period,
    )
    return report


@dataclass(frozen=True, eq=False)
class LumpedChain:
    """
    Quotient of the assortative chain by the permutations of the
    three populations

    Attributes
    ----------
    classes : Tuple[AssortativeState, ...]
        Sorted-descending representative of each class
    multiplicity : Tuple[int, ...]
        Orbit size of each class (1, 3 or 6)
    matrix : numpy.ndarray
        Row-stochastic matrix over the classes
    class_of : Mapping[AssortativeState, int]
        Class index of every full state
    source : TransitionMatrix
        The full matrix that was lumped
    """
    classes: Tuple[AssortativeState, ...]
    multiplicity: Tuple[int, ...]
    matrix: np.ndarray
    class_of: Mapping[AssortativeState, int]
    source: TransitionMatrix

    def __len__(self) -> int:
        return len(self.classes)

    @property
    def states(self) -> Tuple[AssortativeState, ...]:
        return self.classes

    @property
    def kind(self) -> ChainKind:
        return self.source.kind

    @property
    def probability(self) -> Probability:
        return self.source.probability

    @property
    def thresholds(self) -> ThresholdConfig:
        return self.source.thresholds

    def to_dense(self) -> np.ndarray:
        return self.matrix.copy()

    def to_sparse(self):
        return sparse.csr_matrix(self.matrix)

    def expand(self, dist: StationaryDistribution) -> StationaryDistribution:
        """
        Spread a lumped law evenly over the members of each class
        """
        if len(dist) != len(self.classes):
            raise ValueError("distribution is not aligned to the classes")
        per_state = dist.per_state
        probs = [
            per_state[self.class_of[state]] for state in self.source.states
        ]
        return StationaryDistribution(
            probs=probs,
            states=self.source.states,
            method=dist.method,
            residual=dist.residual,
            kind=self.kind,
            iterations=dist.iterations,
        )


def lump_by_symmetry(m: TransitionMatrix) -> LumpedChain:
    """
    Lump the assortative chain over population permutations and verify
    strong lumpability: the class-aggregated row of every member of a
    class must agree with that of its representative

    Raises
    ------
    PreconditionError
        If ``m`` is not an assortative matrix
    LumpabilityError
        If two members of a class aggregate to different rows
    """
    if m.kind is not ChainKind.ASSORTATIVE:
        raise PreconditionError("only the assortative chain is lumpable")
    classes = sorted({state.canonical() for state in m.states})
    class_index = {state: i for i, state in enumerate(classes)}
    class_of = {state: class_index[state.canonical()] for state in m.states}
    members: List[List[int]] = [[] for _ in classes]
    for i, state in enumerate(m.states):
        members[class_of[state]].append(i)

    def aggregate(source: int) -> np.ndarray:
        masses = defaultdict(list)
        for target, value in m.rows[source].items():
            masses[class_of[m.states[target]]].append(value)
        row = np.zeros(len(classes))
        for target, values in masses.items():
            row[target] = math.fsum(values)
        return row

    matrix = np.zeros((len(classes), len(classes)))
    for c, representative in enumerate(classes):
        reference = aggregate(m.index_of(representative))
        for member in members[c]:
            discrepancy = float(np.max(np.abs(aggregate(member) - reference)))
            if discrepancy > LUMP_TOLERANCE:
                raise LumpabilityError(
                    "class {0} is not lumpable: {1} disagrees by {2:.3e}"
                    .format(representative, m.states[member], discrepancy),
                    class_index=c,
                    discrepancy=discrepancy,
                )
        if abs(math.fsum(reference) - 1.0) > ROW_SUM_TOLERANCE:
            raise LumpabilityError(
                "lumped row of {0} does not sum to 1".format(representative),
                class_index=c,
                discrepancy=abs(math.fsum(reference) - 1.0),
            )
        matrix[c] = reference
    matrix.setflags(write=False)
    logger.debug(
        "lumped %d states into %d classes", len(m.states), len(classes)
    )
    return LumpedChain(
        classes=tuple(classes),
        multiplicity=tuple(len(group) for group in members),
        matrix=matrix,
        class_of=MappingProxyType(class_of),
        source=m,
    )
