"""Bitcoin next-day close forecasting laboratory.

Dataset assembly, variational mode decomposition, from-scratch recurrent
networks and boosted trees, rolling one-step backtests and baseline
ensembling.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    DecodeError,
    FetchError,
    InsufficientDataError,
    ParseError,
    TrainingError,
    ValidationError,
)
