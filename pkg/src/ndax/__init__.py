"""Abstraction, strategy synthesis and monitoring for nondeterministic action theories."""

from pathlib import Path

from .errors import (
    AmbiguityError,
    CapacityError,
    CoverageError,
    ExecutionError,
    NdaxError,
    PreconditionError,
    RefinementUnsoundError,
    SpecificationError,
    StrategyIncompleteError,
    UnsupportedConstructError,
)
from .theory import AgentAction, GroundAtom, GroundTheory, State, SystemAction

__version__ = "0.1.0"

FIXTURES = Path(__file__).parent / "fixtures"

__all__ = [
    "AgentAction",
    "AmbiguityError",
    "CapacityError",
    "CoverageError",
    "ExecutionError",
    "FIXTURES",
    "GroundAtom",
    "GroundTheory",
    "NdaxError",
    "PreconditionError",
    "RefinementUnsoundError",
    "SpecificationError",
    "State",
    "StrategyIncompleteError",
    "SystemAction",
    "UnsupportedConstructError",
]
