"""
Domain types, arrival-event enumeration and probability primitives
shared by all chains.

Every type defined here is an immutable value once constructed, so
instances can be shared freely between threads.
"""

import itertools
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import (
    Dict,
    Iterable,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from scipy import sparse

from matching_chains.exceptions import (
    MissingUtilityError,
    PreconditionError,
)

__all__ = (
    "ROW_SUM_TOLERANCE",
    "SUM_TOLERANCE",
    "TypeLabel",
    "ChainKind",
    "Method",
    "Probability",
    "ArrivalTriplet",
    "ArrivalPair",
    "ThresholdConfig",
    "AssortativeState",
    "SignedQueueState",
    "State",
    "TransitionMatrix",
    "StationaryDistribution",
    "WelfareParams",
    "canonical_composition",
    "enumerate_arrival_triplets",
    "enumerate_arrival_pairs",
    "arrivals_for",
    "arrival_probability",
)


ROW_SUM_TOLERANCE = 1e-12
SUM_TOLERANCE = 1e-12


class TypeLabel(str, Enum):
    """
    Type of an individual agent
    """
    HIGH = "H"
    LOW = "L"

    def __str__(self) -> str:
        return self.value


class ChainKind(str, Enum):
    """
    The three matching processes modelled by the package
    """
    TWOWAY = "twoway"
    ASSORTATIVE = "assortative"
    DISASSORTATIVE = "disassortative"

    def __str__(self) -> str:
        return self.value

    @property
    def populations(self) -> int:
        return 2 if self is ChainKind.TWOWAY else 3


class Method(str, Enum):
    """
    Provenance of a stationary distribution
    """
    DIRECT = "direct-solve"
    POWER = "power-iteration"
    CLOSED_FORM = "closed-form"
    EMPIRICAL = "empirical"

    def __str__(self) -> str:
        return self.value


def _require_int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(
            "{0} must be an integer, got {1!r}".format(name, value)
        )
    return int(value)


@dataclass(frozen=True)
class Probability:
    """
    Proportion ``p`` of High types, identical in every population.
    ``q = 1 - p`` is always derived and never stored.
    """
    p: float

    def __post_init__(self):
        if isinstance(self.p, bool) or not isinstance(
            self.p, (int, float, np.integer, np.floating)
        ):
            raise TypeError(
                "p must be a real number, got {0!r}".format(self.p)
            )
        value = float(self.p)
        if not 0.0 < value < 1.0:
            raise PreconditionError(
                "p must lie strictly between 0 and 1, got {0!r}".format(value)
            )
        object.__setattr__(self, "p", value)

    @classmethod
    def of(cls, value: Union["Probability", float]) -> "Probability":
        if isinstance(value, cls):
            return value
        return cls(value)

    @property
    def q(self) -> float:
        return 1.0 - self.p

    def __float__(self) -> float:
        return self.p


@dataclass(frozen=True)
class ArrivalTriplet:
    """
    One arrival event of the three-way market: the type of the
    individual arriving in each population, population 1 first
    """
    types: Tuple[TypeLabel, TypeLabel, TypeLabel]

    def __post_init__(self):
        types = tuple(TypeLabel(label) for label in self.types)
        if len(types) != 3:
            raise ValueError(
                "an arrival triplet has exactly 3 entries, got {0}".format(
                    len(types)
                )
            )
        object.__setattr__(self, "types", types)

    @property
    def high_count(self) -> int:
        return sum(label is TypeLabel.HIGH for label in self.types)

    @property
    def low_count(self) -> int:
        return len(self.types) - self.high_count

    def permute(self, sigma: Sequence[int]) -> "ArrivalTriplet":
        return ArrivalTriplet(tuple(self.types[j] for j in sigma))

    def __str__(self) -> str:
        return "".join(label.value for label in self.types)


@dataclass(frozen=True)
class ArrivalPair:
    """
    One arrival event of the two-way market. Population 2 labels are
    rendered in lower case (``h``/``l``) but stored as `TypeLabel`
    """
    types: Tuple[TypeLabel, TypeLabel]

    def __post_init__(self):
        types = tuple(TypeLabel(str(label).upper()) for label in self.types)
        if len(types) != 2:
            raise ValueError(
                "an arrival pair has exactly 2 entries, got {0}".format(
                    len(types)
                )
            )
        object.__setattr__(self, "types", types)

    @property
    def high_count(self) -> int:
        return sum(label is TypeLabel.HIGH for label in self.types)

    @property
    def low_count(self) -> int:
        return len(self.types) - self.high_count

    def __str__(self) -> str:
        return self.types[0].value + self.types[1].value.lower()


@dataclass(frozen=True)
class ThresholdConfig:
    """
    Threshold parameters of the matching policies

    Attributes
    ----------
    k_bar : int
        Common High threshold of the two-way and the three-way
        assortative chains
    k_high : int
        High-triplet threshold of the dis-assortative chain
    k_low : int
        Low-triplet threshold of the dis-assortative chain
    """
    k_bar: int = 0
    k_high: int = 0
    k_low: int = 0

    def __post_init__(self):
        for name in ("k_bar", "k_high", "k_low"):
            value = _require_int(name, getattr(self, name))
            if value < 0:
                raise PreconditionError(
                    "{0} must be non-negative, got {1}".format(name, value)
                )
            object.__setattr__(self, name, value)

    def require(self, kind: ChainKind) -> "ThresholdConfig":
        """
        Check the thresholds are usable for the given chain kind

        Returns
        -------
        ThresholdConfig
            ``self``, to allow chaining

        Raises
        ------
        PreconditionError
            If the assortative chain is requested with ``k_bar < 1``
        """
        if ChainKind(kind) is ChainKind.ASSORTATIVE and self.k_bar < 1:
            raise PreconditionError(
                "the assortative chain needs k_bar >= 1, got {0}".format(
                    self.k_bar
                )
            )
        return self

    def bounds(self, kind: ChainKind) -> Tuple[int, int]:
        """
        Range ``(lower, upper)`` of the signed queue for signed chains
        """
        kind = ChainKind(kind)
        if kind is ChainKind.TWOWAY:
            return -self.k_bar, self.k_bar
        if kind is ChainKind.DISASSORTATIVE:
            return -self.k_low, self.k_high
        raise ValueError("the assortative chain has no signed queue")

    def columns(self, kind: ChainKind) -> Dict[str, int]:
        """
        Threshold columns emitted for the given chain kind
        """
        if ChainKind(kind) is ChainKind.DISASSORTATIVE:
            return {"kh": self.k_high, "kl": self.k_low}
        return {"kbar": self.k_bar}


@dataclass(frozen=True, order=True)
class AssortativeState:
    """
    Waiting High counts ``(a1, a2, a3)`` of the three-way assortative
    market. At least one population has no waiting High
    """
    a: Tuple[int, int, int]

    def __post_init__(self):
        values = tuple(_require_int("a", value) for value in self.a)
        if len(values) != 3:
            raise PreconditionError(
                "an assortative state has 3 coordinates, got {0}".format(
                    len(values)
                )
            )
        if min(values) != 0:
            raise PreconditionError(
                "an assortative state has a zero coordinate, got {0}".format(
                    values
                )
            )
        object.__setattr__(self, "a", values)

    def validate(self, k_bar: int) -> "AssortativeState":
        if max(self.a) > k_bar:
            raise PreconditionError(
                "state {0} exceeds the threshold {1}".format(self.a, k_bar)
            )
        return self

    def permute(self, sigma: Sequence[int]) -> "AssortativeState":
        return AssortativeState(tuple(self.a[j] for j in sigma))

    def canonical(self) -> "AssortativeState":
        return AssortativeState(tuple(sorted(self.a, reverse=True)))

    @property
    def implied_lows(self) -> Tuple[int, int, int]:
        """
        Low queue lengths under greedy all-Low matching
        """
        top = max(self.a)
        return tuple(top - value for value in self.a)

    def __str__(self) -> str:
        return "({0},{1},{2})".format(*self.a)


@dataclass(frozen=True, order=True)
class SignedQueueState:
    """
    Signed queue ``k``: waiting High triplets minus waiting Low triplets
    (dis-assortative), or waiting H minus waiting h (two-way)
    """
    k: int

    def __post_init__(self):
        object.__setattr__(self, "k", _require_int("k", self.k))

    def validate(self, lower: int, upper: int) -> "SignedQueueState":
        if not lower <= self.k <= upper:
            raise PreconditionError(
                "signed state {0} outside [{1}, {2}]".format(
                    self.k, lower, upper
                )
            )
        return self

    def __str__(self) -> str:
        return str(self.k)


State = Union[AssortativeState, SignedQueueState]


@dataclass(frozen=True)
class TransitionMatrix:
    """
    Row-stochastic matrix over an indexed list of states, stored as one
    sparse map ``target index -> probability`` per source state
    """
    kind: ChainKind
    states: Tuple[State, ...]
    rows: Tuple[Mapping[int, float], ...]
    probability: Probability
    thresholds: ThresholdConfig
    _index: Dict[State, int] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        states = tuple(self.states)
        rows = tuple(MappingProxyType(dict(row)) for row in self.rows)
        if len(states) != len(rows):
            raise ValueError(
                "{0} states but {1} rows".format(len(states), len(rows))
            )
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(
            self, "_index", {state: i for i, state in enumerate(states)}
        )

    def __len__(self) -> int:
        return len(self.states)

    def index_of(self, state: State) -> int:
        try:
            return self._index[state]
        except KeyError:
            raise KeyError(
                "state {0} is not part of this chain".format(state)
            ) from None

    def row(self, state: State) -> Dict[State, float]:
        return {
            self.states[target]: value
            for target, value in self.rows[self.index_of(state)].items()
        }

    def entry(self, source: State, target: State) -> float:
        return self.rows[self.index_of(source)].get(
            self.index_of(target), 0.0
        )

    def to_dense(self) -> np.ndarray:
        size = len(self.states)
        dense = np.zeros((size, size))
        for source, row in enumerate(self.rows):
            for target, value in row.items():
                dense[source, target] = value
        return dense

    def to_sparse(self) -> sparse.csr_matrix:
        sources, targets, values = [], [], []
        for source, row in enumerate(self.rows):
            for target, value in row.items():
                sources.append(source)
                targets.append(target)
                values.append(value)
        size = len(self.states)
        return sparse.coo_matrix(
            (values, (sources, targets)), shape=(size, size)
        ).tocsr()

    def check_invariants(self) -> "TransitionMatrix":
        """
        Check row sums, entry ranges and the positive diagonal

        Raises
        ------
        ValueError
            On the first violated invariant
        """
        for source, row in enumerate(self.rows):
            total = math.fsum(row.values())
            if abs(total - 1.0) > ROW_SUM_TOLERANCE:
                raise ValueError(
                    "row of {0} sums to {1!r}".format(
                        self.states[source], total
                    )
                )
            if any(value < 0.0 or value > 1.0 for value in row.values()):
                raise ValueError(
                    "row of {0} has entries outside [0, 1]".format(
                        self.states[source]
                    )
                )
            if row.get(source, 0.0) <= 0.0:
                raise ValueError(
                    "diagonal entry of {0} is not positive".format(
                        self.states[source]
                    )
                )
        return self


@dataclass(frozen=True, eq=False)
class StationaryDistribution:
    """
    Probability vector aligned to a list of states

    For lumped chains ``states`` holds the class representatives,
    ``probs`` the class masses and ``multiplicity`` the orbit sizes;
    `per_state` then gives the common probability of each member state.
    """
    probs: np.ndarray
    states: Tuple[State, ...]
    method: Method
    residual: float = 0.0
    kind: Optional[ChainKind] = None
    multiplicity: Optional[Tuple[int, ...]] = None
    iterations: Optional[int] = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        states = tuple(self.states)
        if probs.ndim != 1 or probs.shape[0] != len(states):
            raise ValueError(
                "{0} probabilities for {1} states".format(
                    probs.size, len(states)
                )
            )
        if np.any(probs < 0.0):
            raise ValueError("probabilities must be non-negative")
        if abs(math.fsum(probs) - 1.0) > SUM_TOLERANCE:
            raise ValueError(
                "probabilities sum to {0!r}".format(math.fsum(probs))
            )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "method", Method(self.method))
        if self.kind is not None:
            object.__setattr__(self, "kind", ChainKind(self.kind))
        if self.multiplicity is not None:
            multiplicity = tuple(int(m) for m in self.multiplicity)
            if len(multiplicity) != len(states):
                raise ValueError("one multiplicity per class is required")
            object.__setattr__(self, "multiplicity", multiplicity)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def is_lumped(self) -> bool:
        return self.multiplicity is not None

    @property
    def per_state(self) -> np.ndarray:
        if self.multiplicity is None:
            return self.probs.copy()
        return self.probs / np.asarray(self.multiplicity, dtype=float)

    def probability_of(self, state: State) -> float:
        return float(self.probs[self.states.index(state)])

    def as_dict(self) -> Dict[State, float]:
        return dict(zip(self.states, self.probs.tolist()))

    def with_residual(self, residual: float) -> "StationaryDistribution":
        return replace(self, residual=residual)


def canonical_composition(labels: Union[str, Iterable]) -> str:
    """
    Canonical name of a team composition.

    Three-way teams are multisets, so their labels are sorted (``HHL``);
    two-way pairs keep their population order and write population 2
    in lower case (``Hl``).
    """
    letters = [str(label).upper() for label in labels]
    if len(letters) == 2:
        return letters[0] + letters[1].lower()
    return "".join(sorted(letters))


@dataclass(frozen=True)
class WelfareParams:
    """
    Match utilities per team composition and the per-agent, per-period
    waiting cost
    """
    match_utilities: Mapping[str, float]
    waiting_cost: float

    def __post_init__(self):
        utilities = {}
        for composition, value in dict(self.match_utilities).items():
            value = float(value)
            if not math.isfinite(value) or value < 0.0:
                raise PreconditionError(
                    "utility of {0} must be finite and non-negative".format(
                        composition
                    )
                )
            utilities[canonical_composition(composition)] = value
        cost = float(self.waiting_cost)
        if not math.isfinite(cost) or cost < 0.0:
            raise PreconditionError(
                "waiting cost must be finite and non-negative"
            )
        object.__setattr__(
            self, "match_utilities", MappingProxyType(utilities)
        )
        object.__setattr__(self, "waiting_cost", cost)

    @classmethod
    def example(cls, kind: ChainKind,
                waiting_cost: float = 0.1) -> "WelfareParams":
        """
        Example utilities that respect the ordering assumptions of each
        preference regime. The magnitudes are illustrative only
        """
        kind = ChainKind(kind)
        if kind is ChainKind.TWOWAY:
            utilities = {"Hh": 4.0, "Hl": 2.5, "Lh": 2.5, "Ll": 2.0}
        elif kind is ChainKind.ASSORTATIVE:
            utilities = {"HHH": 3.0, "HHL": 2.0, "HLL": 1.0, "LLL": 0.5}
        else:
            utilities = {"HHH": 1.0, "HHL": 2.0, "HLL": 2.0, "LLL": 1.0}
        return cls(utilities, waiting_cost)

    def with_cost(self, waiting_cost: float) -> "WelfareParams":
        return WelfareParams(dict(self.match_utilities), waiting_cost)

    def utility_of(self, composition: str) -> float:
        key = canonical_composition(composition)
        try:
            return self.match_utilities[key]
        except KeyError:
            raise MissingUtilityError(key) from None

    def validate(self, kind: ChainKind) -> "WelfareParams":
        """
        Check the ordering assumptions of the given preference regime

        Raises
        ------
        PreconditionError
            If the utilities break the regime's ordering
        """
        kind = ChainKind(kind)
        u = self.utility_of
        if kind is ChainKind.TWOWAY:
            surplus = u("Hh") + u("Ll") - u("Hl") - u("Lh")
            if surplus <= 0.0:
                raise PreconditionError(
                    "two-way utilities need U_Hh + U_Ll - U_Hl - U_Lh > 0"
                )
        elif kind is ChainKind.ASSORTATIVE:
            ladder = [u("LLL"), u("HLL"), u("HHL"), u("HHH")]
            if any(low >= high for low, high in zip(ladder, ladder[1:])):
                raise PreconditionError(
                    "assortative utilities must increase with the number "
                    "of High members"
                )
        else:
            mixed = u("HHL")
            if mixed != u("HLL") or not (
                mixed > u("HHH") and mixed > u("LLL")
            ):
                raise PreconditionError(
                    "dis-assortative utilities need U(HHL) = U(HLL) above "
                    "U(HHH) and U(LLL)"
                )
        return self


_TRIPLETS = tuple(
    ArrivalTriplet(types)
    for types in itertools.product((TypeLabel.HIGH, TypeLabel.LOW), repeat=3)
)
_PAIRS = tuple(
    ArrivalPair(types)
    for types in itertools.product((TypeLabel.HIGH, TypeLabel.LOW), repeat=2)
)


def enumerate_arrival_triplets() -> List[ArrivalTriplet]:
    """
    All eight arrival triplets, lexicographic with High before Low,
    so the list starts with ``HHH`` and ends with ``LLL``
    """
    return list(_TRIPLETS)


def enumerate_arrival_pairs() -> List[ArrivalPair]:
    """
    All four arrival pairs ``Hh, Hl, Lh, Ll``
    """
    return list(_PAIRS)


def arrivals_for(kind: ChainKind) -> List[Union[ArrivalTriplet, ArrivalPair]]:
    if ChainKind(kind) is ChainKind.TWOWAY:
        return enumerate_arrival_pairs()
    return enumerate_arrival_triplets()


def arrival_probability(t: Union[ArrivalTriplet, ArrivalPair],
                        p: Union[Probability, float]) -> float:
    """
    Probability ``p^(#High) q^(#Low)`` of an arrival event

    Parameters
    ----------
    t : ArrivalTriplet or ArrivalPair
        The arrival event
    p : Probability or float
        Proportion of High types

    Returns
    -------
    float
        The probability of observing ``t`` in one period
    """
    p = Probability.of(p)
    return p.p ** t.high_count * p.q ** t.low_count
