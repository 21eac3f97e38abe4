"""
One-period matching policies written as pure transition functions
``state x arrival -> state``. Every transition matrix of the package is
generated from these functions.
"""

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Sequence, Tuple, Union

from matching_chains.core import (
    ArrivalPair,
    ArrivalTriplet,
    AssortativeState,
    ChainKind,
    SignedQueueState,
    State,
    ThresholdConfig,
    TypeLabel,
    canonical_composition,
)
from matching_chains.exceptions import PreconditionError

__all__ = (
    "Source",
    "Team",
    "TeamReport",
    "assortative_step",
    "disassortative_step",
    "disassortative_transition",
    "twoway_step",
    "twoway_transition",
    "transition_function",
)


HIGH = TypeLabel.HIGH
LOW = TypeLabel.LOW


class Source(str, Enum):
    """
    Where a team member came from: the waiting queue or this
    period's arrival
    """
    QUEUE = "queue"
    ARRIVAL = "arrival"


@dataclass(frozen=True)
class Team:
    """
    A team formed in one period, one member per population
    """
    members: Tuple[TypeLabel, ...]
    sources: Tuple[Source, ...]
    forced: bool = False

    def __post_init__(self):
        members = tuple(TypeLabel(member) for member in self.members)
        sources = tuple(Source(source) for source in self.sources)
        if len(members) != len(sources) or len(members) not in (2, 3):
            raise ValueError(
                "a team has one member and one source per population"
            )
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "sources", sources)

    @property
    def composition(self) -> str:
        return canonical_composition(self.members)

    @property
    def high_count(self) -> int:
        return sum(member is HIGH for member in self.members)


@dataclass(frozen=True)
class TeamReport:
    """
    Profile of the teams formed in one period
    """
    teams: Tuple[Team, ...] = ()

    def __len__(self) -> int:
        return len(self.teams)

    @property
    def forced(self) -> Tuple[bool, ...]:
        return tuple(team.forced for team in self.teams)

    def count_by_composition(self) -> Counter:
        return Counter(team.composition for team in self.teams)


def _check_threshold(name: str, value: int, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise TypeError("{0} must be an integer".format(name))
    if value < minimum:
        raise PreconditionError(
            "{0} must be at least {1}, got {2}".format(name, minimum, value)
        )
    return value


def assortative_step(
    s: AssortativeState,
    t: ArrivalTriplet,
    k_bar: int,
) -> Tuple[AssortativeState, TeamReport]:
    """
    One period of the three-way assortative market

    The arriving Highs join their queues, every complete set of waiting
    Highs is matched into an all-High team, and a High queue that now
    exceeds ``k_bar`` forces one team in which every population
    contributes a waiting High if it has one and a Low otherwise.
    Low queues are not part of the state; they follow
    ``low_i = max(a) - a_i`` because all-Low teams are formed as soon
    as every population has a waiting Low, and those teams are reported.

    Parameters
    ----------
    s : AssortativeState
        Waiting High counts before the period
    t : ArrivalTriplet
        Types arriving in the period
    k_bar : int
        High threshold, at least 1

    Returns
    -------
    Tuple[AssortativeState, TeamReport]
        Waiting High counts after the period and the teams formed

    Raises
    ------
    PreconditionError
        If ``k_bar < 1`` or ``s`` exceeds the threshold
    """
    _check_threshold("k_bar", k_bar, minimum=1)
    if not isinstance(s, AssortativeState):
        raise TypeError("s must be an AssortativeState")
    s.validate(k_bar)
    waiting_highs = s.a
    waiting_lows = s.implied_lows
    high = list(waiting_highs)
    low = list(waiting_lows)
    for i, label in enumerate(t.types):
        if label is HIGH:
            high[i] += 1
        else:
            low[i] += 1

    # queued members leave before arriving ones
    taken_high = [0, 0, 0]
    taken_low = [0, 0, 0]

    def take_high(i: int) -> Source:
        taken_high[i] += 1
        high[i] -= 1
        if taken_high[i] <= waiting_highs[i]:
            return Source.QUEUE
        return Source.ARRIVAL

    def take_low(i: int) -> Source:
        taken_low[i] += 1
        low[i] -= 1
        if taken_low[i] <= waiting_lows[i]:
            return Source.QUEUE
        return Source.ARRIVAL

    teams = []
    for _ in range(min(high)):
        teams.append(
            Team((HIGH, HIGH, HIGH), tuple(take_high(i) for i in range(3)))
        )

    if max(high) > k_bar:
        members, sources = [], []
        for i in range(3):
            if high[i] > 0:
                members.append(HIGH)
                sources.append(take_high(i))
            else:
                members.append(LOW)
                sources.append(take_low(i))
        teams.append(Team(tuple(members), tuple(sources), forced=True))

    for _ in range(min(low)):
        teams.append(
            Team((LOW, LOW, LOW), tuple(take_low(i) for i in range(3)))
        )

    return (
        AssortativeState(tuple(high)).validate(k_bar),
        TeamReport(tuple(teams)),
    )


def _pair_with_waiting(
    arrival: Sequence[TypeLabel],
    waiting: TypeLabel,
    minority: Sequence[int],
) -> List[Team]:
    """
    Split one waiting uniform triplet and the arrival into two mixed
    teams. ``minority`` lists the populations whose arrival differs
    from the waiting type; it needs at least two entries
    """
    pivot = minority[0]
    first = Team(
        tuple(arrival[i] if i == pivot else waiting for i in range(3)),
        tuple(
            Source.ARRIVAL if i == pivot else Source.QUEUE for i in range(3)
        ),
    )
    second = Team(
        tuple(waiting if i == pivot else arrival[i] for i in range(3)),
        tuple(
            Source.QUEUE if i == pivot else Source.ARRIVAL for i in range(3)
        ),
    )
    return [first, second]


def disassortative_transition(
    k: SignedQueueState,
    t: ArrivalTriplet,
    k_high: int,
    k_low: int,
) -> Tuple[SignedQueueState, TeamReport]:
    """
    One period of the three-way dis-assortative market, with the teams

    Mixed teams are formed first. A mixed arrival that meets a waiting
    triplet holding at least two of its minority types is split with
    that triplet into two mixed teams; otherwise the mixed arrival is a
    team on its own. A uniform arrival is split with a waiting triplet of
    the other type, or else joins the queue, where a queue beyond its
    threshold forces one uniform team.

    Parameters
    ----------
    k : SignedQueueState
        Waiting High triplets minus waiting Low triplets
    t : ArrivalTriplet
        Types arriving in the period
    k_high, k_low : int
        High and Low triplet thresholds

    Returns
    -------
    Tuple[SignedQueueState, TeamReport]
        The signed queue after the period and the teams formed
    """
    _check_threshold("k_high", k_high)
    _check_threshold("k_low", k_low)
    if not isinstance(k, SignedQueueState):
        raise TypeError("k must be a SignedQueueState")
    k.validate(-k_low, k_high)
    value = k.k
    if value > 0:
        waiting = HIGH
    elif value < 0:
        waiting = LOW
    else:
        waiting = None
    step = 1 if waiting is HIGH else -1
    arrival = t.types

    if t.high_count in (0, 3) and arrival[0] is not waiting:
        if waiting is not None:
            teams = _pair_with_waiting(arrival, waiting, (0, 1, 2))
            return SignedQueueState(value - step), TeamReport(tuple(teams))
        grown = value + (1 if arrival[0] is HIGH else -1)
        if -k_low <= grown <= k_high:
            return SignedQueueState(grown), TeamReport()
        forced = Team(arrival, (Source.ARRIVAL,) * 3, forced=True)
        return SignedQueueState(value), TeamReport((forced,))

    if t.high_count in (0, 3):
        grown = value + step
        if -k_low <= grown <= k_high:
            return SignedQueueState(grown), TeamReport()
        forced = Team(arrival, (Source.QUEUE,) * 3, forced=True)
        return SignedQueueState(value), TeamReport((forced,))

    minority = [i for i, label in enumerate(arrival) if label is not waiting]
    if waiting is not None and len(minority) >= 2:
        teams = _pair_with_waiting(arrival, waiting, minority)
        return SignedQueueState(value - step), TeamReport(tuple(teams))
    team = Team(arrival, (Source.ARRIVAL,) * 3)
    return SignedQueueState(value), TeamReport((team,))


def disassortative_step(
    k: SignedQueueState,
    t: ArrivalTriplet,
    k_high: int,
    k_low: int,
) -> SignedQueueState:
    """
    Signed-queue update of the dis-assortative market.

    With ``n`` Highs in the arrival: ``n = 3`` moves up (staying put at
    ``k_high``), ``n = 0`` moves down (staying put at ``-k_low``),
    ``n = 2`` moves up only from a negative queue and ``n = 1`` moves
    down only from a positive queue.
    """
    return disassortative_transition(k, t, k_high, k_low)[0]


def twoway_transition(
    k: SignedQueueState,
    pr: ArrivalPair,
    k_bar: int,
) -> Tuple[SignedQueueState, TeamReport]:
    """
    One period of the two-way market, with the pairs formed.

    ``(H,h)`` and ``(L,l)`` arrivals match each other. An ``(H,l)``
    arrival matches a waiting ``h`` and ``L`` when the queue is negative,
    waits otherwise, and at ``k = k_bar`` forms a forced ``(H,l)`` pair.
    ``(L,h)`` mirrors it.
    """
    _check_threshold("k_bar", k_bar)
    if not isinstance(k, SignedQueueState):
        raise TypeError("k must be a SignedQueueState")
    k.validate(-k_bar, k_bar)
    value = k.k
    first, second = pr.types
    arrived = (Source.ARRIVAL, Source.ARRIVAL)
    if first is second:
        return k, TeamReport((Team((first, second), arrived),))

    step = 1 if first is HIGH else -1
    if value * step < 0:
        if first is HIGH:
            teams = (
                Team((HIGH, HIGH), (Source.ARRIVAL, Source.QUEUE)),
                Team((LOW, LOW), (Source.QUEUE, Source.ARRIVAL)),
            )
        else:
            teams = (
                Team((HIGH, HIGH), (Source.QUEUE, Source.ARRIVAL)),
                Team((LOW, LOW), (Source.ARRIVAL, Source.QUEUE)),
            )
        return SignedQueueState(value + step), TeamReport(teams)
    if abs(value + step) <= k_bar:
        return SignedQueueState(value + step), TeamReport()
    source = Source.QUEUE if value != 0 else Source.ARRIVAL
    forced = Team((first, second), (source, source), forced=True)
    return k, TeamReport((forced,))


def twoway_step(
    k: SignedQueueState,
    pr: ArrivalPair,
    k_bar: int,
) -> SignedQueueState:
    """
    Signed ``H - h`` queue update of the two-way market:
    ``(H,l)`` gives ``min(k + 1, k_bar)``, ``(L,h)`` gives
    ``max(k - 1, -k_bar)`` and same-type pairs leave ``k`` unchanged
    """
    return twoway_transition(k, pr, k_bar)[0]


Step = Callable[
    [State,
     Union[ArrivalTriplet, ArrivalPair]],
    Tuple[State, TeamReport],
]


def transition_function(kind: ChainKind,
                        thresholds: ThresholdConfig) -> Step:
    """
    Bind a policy to its thresholds

    Returns
    -------
    Callable
        ``(state, arrival) -> (state, TeamReport)`` for the chain kind
    """
    kind = ChainKind(kind)
    thresholds.require(kind)
    if kind is ChainKind.ASSORTATIVE:
        return lambda state, arrival: assortative_step(
            state, arrival, thresholds.k_bar
        )
    if kind is ChainKind.DISASSORTATIVE:
        return lambda state, arrival: disassortative_transition(
            state, arrival, thresholds.k_high, thresholds.k_low
        )
    return lambda state, arrival: twoway_transition(
        state, arrival, thresholds.k_bar
    )
