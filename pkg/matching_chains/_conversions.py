from typing import Dict, Tuple

from matching_chains.core import (
    ArrivalPair,
    ArrivalTriplet,
    AssortativeState,
    Probability,
    SignedQueueState,
)
from matching_chains.type_hints import (
    Arrival,
    ArrivalType,
    Number,
    ProbabilityType,
    State,
)

__all__ = (
    "NumberConversion",
    "ArrivalConversion",
    "StateConversion",
)


class _TypeHintConversion:
    """
    Class for storing information about a type (hint)
    such as:

        * the allowed types (can be accessed by `cls.allowed_types()`)
        * the conversion methods between the allowed types
        (defined by the subclasses not this base class)
    """
    _allowed_types = ()

    @classmethod
    def allowed_types(cls) -> Tuple[type, ...]:
        return cls._allowed_types

    @classmethod
    def is_allowed(cls, obj):
        """
        Raises
        ------
        TypeError
            If the given object is not of the acceptable types
        """
        if isinstance(obj, bool) or not isinstance(obj, cls._allowed_types):
            raise TypeError(
                "only {0} types are accepted".format(cls._allowed_types)
            )


class NumberConversion(_TypeHintConversion):
    """
    Conversions of the `Number` type hint:

        * `as_probability` to a validated `Probability`
        * `as_threshold` to a non-negative integer threshold

    """
    _allowed_types = (int, float, Probability)

    @classmethod
    def as_probability(cls, number: ProbabilityType) -> Probability:
        cls.is_allowed(number)
        return Probability.of(number)

    @classmethod
    def as_threshold(cls, number: Number) -> int:
        """
        Parameters
        ----------
        number : Number
            An integral value, ``2`` or ``2.0``

        Returns
        -------
        int

        Raises
        ------
        ValueError
            If the number is negative or has a fractional part
        """
        cls.is_allowed(number)
        if isinstance(number, Probability) or number != int(number):
            raise ValueError(
                "a threshold must be integral, got {0!r}".format(number)
            )
        if number < 0:
            raise ValueError("a threshold must be non-negative")
        return int(number)


class ArrivalConversion(_TypeHintConversion):
    """
    Conversions of the `ArrivalType` type hint: three letters
    (``"HHL"``) give an `ArrivalTriplet`, two letters (``"Hl"``) an
    `ArrivalPair`
    """
    _allowed_types = (str, ArrivalTriplet, ArrivalPair)

    @classmethod
    def as_arrival(cls, arrival: ArrivalType) -> Arrival:
        cls.is_allowed(arrival)
        if not isinstance(arrival, str):
            return arrival
        letters = tuple(arrival.upper())
        if len(letters) == 2:
            return ArrivalPair(letters)
        return ArrivalTriplet(letters)

    @classmethod
    def as_str(cls, arrival: ArrivalType) -> str:
        return str(cls.as_arrival(arrival))


class StateConversion(_TypeHintConversion):
    """
    Conversions of the `State` type hint to output columns
    """
    _allowed_types = (AssortativeState, SignedQueueState)

    @classmethod
    def as_columns(cls, state: State) -> Dict[str, int]:
        """
        Returns
        -------
        Dict[str, int]
            ``a1, a2, a3`` for an assortative state, ``k`` for a
            signed queue
        """
        cls.is_allowed(state)
        if isinstance(state, AssortativeState):
            return {
                "a{0}".format(i + 1): value for i, value in enumerate(state.a)
            }
        return {"k": state.k}
