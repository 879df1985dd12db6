"""Milestone-based earned-value portfolio management.

A portfolio is a three-tier hierarchy (portfolio, SDK groups, products)
whose per-year planning packages refine into budgeted, dated activities.
The engine computes exact CPI/SPI rollups at every level, runs the
change-control and integration-review workflows, and keeps an append-only
command log that deterministically replays into the same model, snapshots,
and reports.
"""

__version__ = "0.1.0"

from .engine import PortfolioEngine
from .errors import (
    DuplicateError,
    EngineError,
    IllegalTransitionError,
    NotFoundError,
    PhaseError,
    RoleError,
    StaleValueError,
    StoreError,
    ValidationError,
)
from .model import Model, Period, PortfolioConfig, validate_hierarchy

__all__ = [
    "PortfolioEngine",
    "Model",
    "Period",
    "PortfolioConfig",
    "validate_hierarchy",
    "EngineError",
    "ValidationError",
    "DuplicateError",
    "NotFoundError",
    "IllegalTransitionError",
    "RoleError",
    "StaleValueError",
    "PhaseError",
    "StoreError",
    "__version__",
]
