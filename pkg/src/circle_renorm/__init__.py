"""Renormalization and rigidity diagnostics for bi-critical circle maps."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BudgetExceededError,
    ChiCapError,
    CircleRenormError,
    CombinatoricsMismatchError,
    ConfigError,
    NotADiffeomorphismError,
    PairError,
    PrecisionError,
    RationalRotationError,
    TuningError,
)
from .maps import ArnoldBiCritical, PerturbedArnold, RigidRotation, TranslatedMap, map_from_spec  # noqa: E402
from .rotation import convergents, partial_quotients_by_returns, tune_parameter  # noqa: E402

__all__ = [
    "__version__",
    "ArnoldBiCritical",
    "PerturbedArnold",
    "RigidRotation",
    "TranslatedMap",
    "map_from_spec",
    "convergents",
    "partial_quotients_by_returns",
    "tune_parameter",
    "BudgetExceededError",
    "ChiCapError",
    "CircleRenormError",
    "CombinatoricsMismatchError",
    "ConfigError",
    "NotADiffeomorphismError",
    "PairError",
    "PrecisionError",
    "RationalRotationError",
    "TuningError",
]
