import math
from typing import List, Sequence

import numpy as np

__all__ = (
    "format_number",
    "parse_grid",
    "parse_int_list",
    "total_variation",
)


def parse_grid(text: str) -> List[float]:
    """
    Utility function to expand a ``start:stop:step`` grid of
    probabilities

    Parameters
    ----------
    text : str
        Grid written as ``start:stop:step`` with
        ``0 < start <= stop < 1`` and ``step > 0``

    Returns
    -------
    List[float]
        The grid points from start to stop (inclusive),
        rounded to 12 decimals so that ``0.1:0.9:0.1`` gives
        exactly nine clean values

    Raises
    ------
    ValueError
        If the grid is malformed or empty
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(
            "grid must look like start:stop:step, got {0!r}".format(text)
        )
    start, stop, step = (float(part) for part in parts)
    if not step > 0.0:
        raise ValueError("grid step must be positive")
    if not 0.0 < start <= stop < 1.0:
        raise ValueError(
            "grid needs 0 < start <= stop < 1, got {0!r}".format(text)
        )
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 12) for i in range(count)]


def parse_int_list(text: str) -> List[int]:
    """
    Utility function to parse a comma separated list of
    non-negative integers (``"1,2,5"``)

    Raises
    ------
    ValueError
        If an entry is not a non-negative integer or the list is empty
    """
    values = [int(part) for part in text.split(",") if part.strip()]
    if not values:
        raise ValueError("empty integer list")
    if any(value < 0 for value in values):
        raise ValueError("thresholds must be non-negative")
    return values


def format_number(value: float) -> str:
    # 17 significant digits round-trip any double
    return "{0:.17g}".format(value)


def total_variation(first: Sequence[float], second: Sequence[float]) -> float:
    """
    Total-variation distance between two probability vectors
    over the same states
    """
    first = np.asarray(first, dtype=float)
    second = np.asarray(second, dtype=float)
    if first.shape != second.shape:
        raise ValueError("vectors are not aligned")
    return 0.5 * float(np.abs(first - second).sum())
