"""
Long-run performance of a policy under a stationary law: queue
lengths, team-composition rates and the welfare rate.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from matching_chains.chain import LumpedChain
from matching_chains.core import (
    AssortativeState,
    ChainKind,
    Probability,
    State,
    StationaryDistribution,
    ThresholdConfig,
    TransitionMatrix,
    WelfareParams,
    arrival_probability,
    arrivals_for,
)
from matching_chains.exceptions import PreconditionError
from matching_chains.policy import transition_function
from matching_chains.solve import exact_stationary

__all__ = (
    "WELFARE_TIE_TOLERANCE",
    "QueueStats",
    "SweepRow",
    "expected_queue_stats",
    "team_rates",
    "welfare_rate",
    "threshold_sweep",
)

logger = logging.getLogger(__name__)

WELFARE_TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class QueueStats:
    """
    Stationary queue lengths

    Attributes
    ----------
    mean_high : Tuple[float, ...]
        Expected waiting Highs per population
    mean_low : Tuple[float, ...]
        Expected waiting Lows per population
    mean_total_waiting : float
        Expected number of waiting agents over all populations
    """
    mean_high: Tuple[float, ...]
    mean_low: Tuple[float, ...]
    mean_total_waiting: float


def _kind_of(dist: StationaryDistribution, states: Sequence) -> ChainKind:
    if dist.kind is not None:
        return dist.kind
    if states and isinstance(states[0], AssortativeState):
        return ChainKind.ASSORTATIVE
    # signed queues of the two-way and the dis-assortative market differ
    # in the number of populations
    raise PreconditionError(
        "a law over signed queues needs its chain kind"
    )


def expected_queue_stats(
    dist: StationaryDistribution,
    states: Optional[Sequence[State]] = None,
) -> QueueStats:
    """
    Expected queue lengths under ``dist``

    Low queues of the assortative market follow ``max(a) - a_i``, so
    every population holds ``max(a)`` waiting agents. A signed queue
    ``k`` holds ``|k|`` waiting agents in every population. Lumped laws
    spread each class mass evenly over its orbit.

    Raises
    ------
    ValueError
        If ``states`` is not aligned to ``dist``
    PreconditionError
        If a law over signed queues does not name its chain kind
    """
    states = tuple(dist.states if states is None else states)
    if len(states) != len(dist):
        raise ValueError(
            "{0} states for a distribution over {1}".format(
                len(states), len(dist)
            )
        )
    kind = _kind_of(dist, states)
    probs = dist.probs
    if kind is ChainKind.ASSORTATIVE:
        coordinates = np.array([state.a for state in states], dtype=float)
        longest = coordinates.max(axis=1)
        if dist.is_lumped:
            coordinates = np.repeat(
                coordinates.mean(axis=1, keepdims=True), 3, axis=1
            )
        mean_high = probs @ coordinates
        mean_longest = float(probs @ longest)
        return QueueStats(
            mean_high=tuple(float(value) for value in mean_high),
            mean_low=tuple(float(mean_longest - value) for value in mean_high),
            mean_total_waiting=3.0 * mean_longest,
        )

    signed = np.array([state.k for state in states], dtype=float)
    positive = float(probs @ np.clip(signed, 0.0, None))
    negative = float(probs @ np.clip(-signed, 0.0, None))
    if kind is ChainKind.TWOWAY:
        # H and l wait when k > 0, L and h when k < 0
        mean_high = (positive, negative)
        mean_low = (negative, positive)
    else:
        mean_high = (positive,) * 3
        mean_low = (negative,) * 3
    return QueueStats(
        mean_high=mean_high,
        mean_low=mean_low,
        mean_total_waiting=kind.populations * (positive + negative),
    )


def team_rates(
    chain: Union[TransitionMatrix, LumpedChain],
    dist: StationaryDistribution,
) -> Dict[str, float]:
    """
    Expected teams formed per period, per composition, under ``dist``
    and the arrival law of ``chain``

    Lumped laws use the class representatives; compositions do not
    depend on which population a member comes from.
    """
    if len(dist) != len(chain.states):
        raise ValueError("distribution is not aligned to the chain")
    step = transition_function(chain.kind, chain.thresholds)
    weighted = [
        (arrival, arrival_probability(arrival, chain.probability))
        for arrival in arrivals_for(chain.kind)
    ]
    rates = defaultdict(list)
    for state, mass in zip(chain.states, dist.probs.tolist()):
        if mass == 0.0:
            continue
        for arrival, weight in weighted:
            _, report = step(state, arrival)
            for composition, count in report.count_by_composition().items():
                rates[composition].append(mass * weight * count)
    return {
        composition: math.fsum(values)
        for composition, values in sorted(rates.items())
    }


def welfare_rate(
    dist: StationaryDistribution,
    welfare: WelfareParams,
    rates: Mapping[str, float],
    states: Optional[Sequence] = None,
) -> float:
    """
    Long-run welfare per period: match utility per period minus the
    waiting cost of the expected number of waiting agents

    Parameters
    ----------
    dist : StationaryDistribution
        Stationary law of the policy
    welfare : WelfareParams
        Match utilities and waiting cost
    rates : Mapping[str, float]
        Teams per period and composition, from `team_rates` or
        `SimulationReport.team_rates`
    states : Sequence, optional
        States aligned to ``dist``, ``dist.states`` by default

    Raises
    ------
    MissingUtilityError
        If a composition formed at a positive rate has no utility
    """
    utility = math.fsum(
        rate * welfare.utility_of(composition)
        for composition, rate in rates.items()
        if rate > 0.0
    )
    waiting = expected_queue_stats(dist, states).mean_total_waiting
    return utility - welfare.waiting_cost * waiting


@dataclass(frozen=True)
class SweepRow:
    """
    Welfare of one threshold setting
    """
    thresholds: ThresholdConfig
    welfare_rate: float
    mean_total_waiting: float
    is_best: bool = False


def threshold_sweep(
    kind: ChainKind,
    p: Union[Probability, float],
    thresholds: Sequence[ThresholdConfig],
    welfare: WelfareParams,
) -> List[SweepRow]:
    """
    Welfare rate of every threshold setting from its exact stationary law

    The row with the largest welfare is flagged; settings within
    `WELFARE_TIE_TOLERANCE` of it go to the smallest thresholds.

    Raises
    ------
    PreconditionError
        If ``thresholds`` is empty
    """
    kind = ChainKind(kind)
    if not thresholds:
        raise PreconditionError("at least one threshold setting is required")
    rows = []
    for setting in thresholds:
        chain, dist = exact_stationary(
            kind, p, setting, lumped=kind is ChainKind.ASSORTATIVE
        )
        value = welfare_rate(dist, welfare, team_rates(chain, dist))
        rows.append(SweepRow(
            thresholds=setting,
            welfare_rate=value,
            mean_total_waiting=expected_queue_stats(dist).mean_total_waiting,
        ))
        logger.debug("welfare of %r: %.17g", setting, value)

    top = max(row.welfare_rate for row in rows)
    best = min(
        (
            i for i, row in enumerate(rows)
            if math.isclose(row.welfare_rate, top,
                            rel_tol=WELFARE_TIE_TOLERANCE,
                            abs_tol=WELFARE_TIE_TOLERANCE)
        ),
        key=lambda i: tuple(rows[i].thresholds.columns(kind).values()),
    )
    return [
        SweepRow(row.thresholds, row.welfare_rate, row.mean_total_waiting,
                 is_best=i == best)
        for i, row in enumerate(rows)
    ]
