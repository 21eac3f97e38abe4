from typing import Union

from matching_chains.core import (
    ArrivalPair,
    ArrivalTriplet,
    Probability,
    State,
)

__all__ = (
    "Number",
    "ProbabilityType",
    "State",
    "Arrival",
    "ArrivalType",
)


Number = Union[int, float]
ProbabilityType = Union[Probability, float]
Arrival = Union[ArrivalTriplet, ArrivalPair]
ArrivalType = Union[str, Arrival]
