from ._version import __version__  # NOQA
from .core import (  # NOQA
    ChainKind,
    Method,
    Probability,
    ThresholdConfig,
    WelfareParams,
)
from .chain import build_matrix, check_ergodicity, lump_by_symmetry  # NOQA
from .solve import exact_stationary, stationary_direct  # NOQA
from .montecarlo import simulate  # NOQA
