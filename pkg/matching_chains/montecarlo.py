"""
Full-market simulation. Every population keeps a High and a Low queue;
the reduced chains are checked against the simulated market online,
period by period.

Arrivals come from ``numpy.random.default_rng(seed)`` (PCG64): blocks of
uniform draws, one column per population, a member being High when its
draw is below ``p``.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from matching_chains._conversions import ArrivalConversion, NumberConversion
from matching_chains.chain import enumerate_states
from matching_chains.core import (
    ArrivalPair,
    ArrivalTriplet,
    AssortativeState,
    ChainKind,
    Method,
    Probability,
    SignedQueueState,
    State,
    StationaryDistribution,
    ThresholdConfig,
    TypeLabel,
    canonical_composition,
)
from matching_chains.exceptions import InvariantViolation, PreconditionError
from matching_chains.policy import transition_function

__all__ = (
    "BLOCK_SIZE",
    "MarketState",
    "SimulationReport",
    "simulate",
    "empirical_distribution",
)

logger = logging.getLogger(__name__)

BLOCK_SIZE = 65536

HIGH = TypeLabel.HIGH
LOW = TypeLabel.LOW

Members = Tuple[TypeLabel, ...]


@dataclass(frozen=True)
class MarketState:
    """
    Waiting agents of every population

    Attributes
    ----------
    high : Tuple[int, ...]
        Waiting Highs per population
    low : Tuple[int, ...]
        Waiting Lows per population
    """
    high: Tuple[int, ...]
    low: Tuple[int, ...]

    def __post_init__(self):
        high = tuple(self.high)
        low = tuple(self.low)
        if len(high) != len(low) or len(high) not in (2, 3):
            raise ValueError("one High and one Low queue per population")
        for count in high + low:
            if isinstance(count, bool) or not isinstance(count, int):
                raise TypeError("queue lengths must be integers")
            if count < 0:
                raise ValueError("queue lengths must be non-negative")
        object.__setattr__(self, "high", high)
        object.__setattr__(self, "low", low)

    @classmethod
    def empty(cls, populations: int) -> "MarketState":
        return cls((0,) * populations, (0,) * populations)

    @property
    def totals(self) -> Tuple[int, ...]:
        return tuple(h + l for h, l in zip(self.high, self.low))

    @property
    def balanced(self) -> bool:
        return len(set(self.totals)) == 1

    def reduced(self, kind: ChainKind) -> State:
        """
        Projection onto the Markov state of the reduced chain
        """
        kind = ChainKind(kind)
        if kind is ChainKind.ASSORTATIVE:
            return AssortativeState(self.high)
        if kind is ChainKind.DISASSORTATIVE:
            return SignedQueueState(self.high[0] - self.low[0])
        return SignedQueueState(self.high[0] - self.high[1])


def _assortative_market(high: List[int], low: List[int], arrival: Members,
                        k_bar: int) -> Tuple[List[Members], int]:
    for i, label in enumerate(arrival):
        if label is HIGH:
            high[i] += 1
        else:
            low[i] += 1
    teams = []
    forced = 0
    while min(high) > 0:
        teams.append((HIGH, HIGH, HIGH))
        for i in range(3):
            high[i] -= 1
    if max(high) > k_bar:
        members = []
        for i in range(3):
            if high[i] > 0:
                members.append(HIGH)
                high[i] -= 1
            else:
                members.append(LOW)
                low[i] -= 1
        teams.append(tuple(members))
        forced += 1
    while min(low) > 0:
        teams.append((LOW, LOW, LOW))
        for i in range(3):
            low[i] -= 1
    return teams, forced


def _disassortative_market(high: List[int], low: List[int],
                           arrival: Members, k_high: int,
                           k_low: int) -> Tuple[List[Members], int]:
    if high[0] > 0:
        waiting, queue, limit = HIGH, high, k_high
    elif low[0] > 0:
        waiting, queue, limit = LOW, low, k_low
    else:
        waiting, queue, limit = None, None, None
    minority = [i for i, label in enumerate(arrival) if label is not waiting]

    if waiting is not None and len(minority) >= 2:
        # one waiting triplet and the arrival form two mixed teams
        pivot = minority[0]
        for i in range(3):
            queue[i] -= 1
        first = tuple(arrival[i] if i == pivot else waiting for i in range(3))
        second = tuple(waiting if i == pivot else arrival[i] for i in range(3))
        return [first, second], 0

    if len(set(arrival)) == 2:
        return [tuple(arrival)], 0

    label = arrival[0]
    if waiting is None:
        queue = high if label is HIGH else low
        limit = k_high if label is HIGH else k_low
    for i in range(3):
        queue[i] += 1
    if queue[0] > limit:
        for i in range(3):
            queue[i] -= 1
        return [(label,) * 3], 1
    return [], 0


def _twoway_market(high: List[int], low: List[int], arrival: Members,
                   k_bar: int) -> Tuple[List[Members], int]:
    for i, label in enumerate(arrival):
        if label is HIGH:
            high[i] += 1
        else:
            low[i] += 1
    teams = []
    while high[0] > 0 and high[1] > 0:
        teams.append((HIGH, HIGH))
        high[0] -= 1
        high[1] -= 1
    while low[0] > 0 and low[1] > 0:
        teams.append((LOW, LOW))
        low[0] -= 1
        low[1] -= 1
    forced = 0
    if high[0] > k_bar:
        teams.append((HIGH, LOW))
        high[0] -= 1
        low[1] -= 1
        forced += 1
    if low[0] > k_bar:
        teams.append((LOW, HIGH))
        low[0] -= 1
        high[1] -= 1
        forced += 1
    return teams, forced


def _queue_shape_error(kind: ChainKind, state: MarketState,
                       thresholds: ThresholdConfig) -> Optional[str]:
    """
    Describe the first broken queue-structure invariant, if any
    """
    high, low = state.high, state.low
    if not state.balanced:
        return "unbalanced queues {0}".format(state.totals)
    if kind is ChainKind.ASSORTATIVE:
        if min(high) != 0:
            return "no High queue is empty"
        if max(high) > thresholds.k_bar:
            return "High queue above k_bar"
        if any(l != max(high) - h for h, l in zip(high, low)):
            return "Low queues do not follow max(high) - high"
    elif kind is ChainKind.DISASSORTATIVE:
        if len(set(high)) != 1 or len(set(low)) != 1:
            return "waiting agents do not form complete triplets"
        if high[0] and low[0]:
            return "High and Low triplets wait together"
        if high[0] > thresholds.k_high or low[0] > thresholds.k_low:
            return "triplet queue above its threshold"
    else:
        if high[0] != low[1] or low[0] != high[1]:
            return "waiting agents are not cross-type pairs"
        if high[0] and low[0]:
            return "both cross-type queues are non-empty"
        if max(high[0], low[0]) > thresholds.k_bar:
            return "pair queue above k_bar"
    return None


@dataclass(frozen=True)
class SimulationReport:
    """
    Outcome of one simulation, or of several merged ones

    Attributes
    ----------
    kind : ChainKind
        The simulated market
    probability : float
        Proportion of High types
    thresholds : ThresholdConfig
        Thresholds of the policy
    occupancy : Mapping
        Visits of every reduced state after the burn-in
    team_counts : Mapping[str, int]
        Teams formed after the burn-in, per composition
    steps : int
        Simulated periods
    seed : int, optional
        Generator seed; ``None`` for merged reports
    burn_in : int
        Periods discarded before recording
    forced_teams : int
        Forced teams formed after the burn-in
    empirical : StationaryDistribution
        Normalised occupancy over the states of the chain
    """
    kind: ChainKind
    probability: float
    thresholds: ThresholdConfig
    occupancy: Mapping[State, int]
    team_counts: Mapping[str, int]
    steps: int
    seed: Optional[int]
    burn_in: int
    forced_teams: int = 0
    empirical: Optional[StationaryDistribution] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        recorded = sum(self.occupancy.values())
        if recorded != self.steps - self.burn_in:
            raise ValueError(
                "{0} recorded periods for {1} steps after a burn-in of "
                "{2}".format(recorded, self.steps, self.burn_in)
            )
        object.__setattr__(
            self, "occupancy", MappingProxyType(dict(self.occupancy))
        )
        object.__setattr__(
            self, "team_counts", MappingProxyType(dict(self.team_counts))
        )
        if self.empirical is None:
            object.__setattr__(self, "empirical", empirical_distribution(self))

    @property
    def recorded(self) -> int:
        return self.steps - self.burn_in

    def team_rates(self) -> Dict[str, float]:
        """
        Teams formed per recorded period, per composition
        """
        return {
            composition: count / self.recorded
            for composition, count in sorted(self.team_counts.items())
        }

    def merge(self, other: "SimulationReport") -> "SimulationReport":
        """
        Pool two runs of the same market

        Raises
        ------
        ValueError
            If the kind, probability or thresholds differ
        """
        if (self.kind, self.probability, self.thresholds) != (
                other.kind, other.probability, other.thresholds):
            raise ValueError("only runs of the same market can be merged")
        return replace(
            self,
            occupancy=Counter(self.occupancy) + Counter(other.occupancy),
            team_counts=Counter(self.team_counts) + Counter(other.team_counts),
            steps=self.steps + other.steps,
            seed=None,
            burn_in=self.burn_in + other.burn_in,
            forced_teams=self.forced_teams + other.forced_teams,
            empirical=None,
        )


def empirical_distribution(report: SimulationReport) -> StationaryDistribution:
    """
    Normalised occupancy aligned to the state order of the chain;
    unvisited states get probability 0
    """
    if report.recorded <= 0:
        raise PreconditionError("no recorded periods")
    states = enumerate_states(report.kind, report.thresholds)
    counts = np.array(
        [report.occupancy.get(state, 0) for state in states], dtype=float
    )
    if counts.sum() != report.recorded:
        raise ValueError("occupancy holds states outside the chain")
    return StationaryDistribution(
        probs=counts / report.recorded,
        states=states,
        method=Method.EMPIRICAL,
        kind=report.kind,
    )


def _arrival_table(kind: ChainKind) -> List[Union[ArrivalTriplet, ArrivalPair]]:
    populations = kind.populations
    return [
        ArrivalConversion.as_arrival("".join(
            HIGH.value if code >> i & 1 else LOW.value
            for i in range(populations)
        ))
        for code in range(2 ** populations)
    ]


def _market_step(kind: ChainKind, thresholds: ThresholdConfig):
    if kind is ChainKind.ASSORTATIVE:
        return lambda high, low, members: _assortative_market(
            high, low, members, thresholds.k_bar
        )
    if kind is ChainKind.DISASSORTATIVE:
        return lambda high, low, members: _disassortative_market(
            high, low, members, thresholds.k_high, thresholds.k_low
        )
    return lambda high, low, members: _twoway_market(
        high, low, members, thresholds.k_bar
    )


def simulate(
    kind: ChainKind,
    p: Union[Probability, float],
    thresholds: ThresholdConfig,
    steps: int,
    burn_in: Optional[int] = None,
    seed: int = 0,
) -> SimulationReport:
    """
    Simulate the full market and record the reduced states it visits

    After every period the queues are checked for their structure, every
    team for one member per population, every population for member
    conservation, and the reduced policy stepped from the previous
    reduced state must reproduce both the new reduced state and the
    team profile.

    Parameters
    ----------
    kind : ChainKind
        Which market to simulate
    p : Probability or float
        Proportion of High types
    thresholds : ThresholdConfig
        Thresholds of the policy
    steps : int
        Number of periods
    burn_in : int, optional
        Periods discarded before recording, 10% of ``steps`` by default
    seed : int
        Seed of the PCG64 generator

    Returns
    -------
    SimulationReport

    Raises
    ------
    InvariantViolation
        On the first period that breaks an invariant, with its trace
    """
    kind = ChainKind(kind)
    p = NumberConversion.as_probability(p)
    thresholds.require(kind)
    if burn_in is None:
        burn_in = steps // 10
    if not 0 <= burn_in < steps:
        raise PreconditionError(
            "need steps > burn_in >= 0, got steps={0}, burn_in={1}".format(
                steps, burn_in
            )
        )
    populations = kind.populations
    arrivals = _arrival_table(kind)
    weights = 1 << np.arange(populations)
    market_step = _market_step(kind, thresholds)
    reduced_step = transition_function(kind, thresholds)
    projections = {}
    occupancy = Counter()
    team_counts = Counter()
    forced_teams = 0

    market = MarketState.empty(populations)
    reduced = market.reduced(kind)
    rng = np.random.default_rng(seed)
    period = 0
    logger.debug(
        "simulating %s market for %d steps (p=%r, %r, seed=%d)",
        kind, steps, p.p, thresholds, seed,
    )
    while period < steps:
        block = min(BLOCK_SIZE, steps - period)
        codes = (rng.random((block, populations)) < p.p) @ weights
        for code in codes.tolist():
            period += 1
            arrival = arrivals[code]
            high, low = list(market.high), list(market.low)
            teams, forced = market_step(high, low, arrival.types)
            following = MarketState(tuple(high), tuple(low))
            profile = Counter(canonical_composition(t) for t in teams)

            key = (reduced, code)
            if key not in projections:
                state, report = reduced_step(reduced, arrival)
                projections[key] = (
                    state, report.count_by_composition(), sum(report.forced)
                )
            expected, expected_profile, expected_forced = projections[key]

            problem = _queue_shape_error(kind, following, thresholds)
            if problem is None and any(len(t) != populations for t in teams):
                problem = "a team misses a population"
            if problem is None and any(
                    before + 1 - after != len(teams)
                    for before, after in zip(market.totals, following.totals)):
                problem = "members are not conserved"
            if problem is None and following.reduced(kind) != expected:
                problem = "reduced policy disagrees with the market"
            if problem is None and (
                    profile != expected_profile or forced != expected_forced):
                problem = "reduced policy forms different teams"
            if problem is not None:
                raise InvariantViolation(
                    problem,
                    period=period,
                    trace={
                        "before": market,
                        "arrival": ArrivalConversion.as_str(arrival),
                        "after": following,
                        "teams": [canonical_composition(t) for t in teams],
                        "reduced_before": reduced,
                        "reduced_expected": expected,
                    },
                )

            market = following
            reduced = expected
            if period > burn_in:
                occupancy[reduced] += 1
                team_counts.update(profile)
                forced_teams += forced
    logger.debug("simulation visited %d reduced states", len(occupancy))
    return SimulationReport(
        kind=kind,
        probability=p.p,
        thresholds=thresholds,
        occupancy=occupancy,
        team_counts=team_counts,
        steps=steps,
        seed=seed,
        burn_in=burn_in,
        forced_teams=forced_teams,
    )
