"""Asymptotic yields of entanglement distillation by breeding and BPM cascades."""
from .bellspace import BellDiagonal, ConditionalPairDist, state_entropy
from .engine import (
    PROTOCOLS,
    YieldReport,
    breeding_yield,
    cascade_yield,
    eta_ordered,
    eta_uniform,
    protocol_report,
    vv_yield,
)
from .gf2core import BitVec, SymplecticMatrix, complete_symplectic, symplectic_product
from .recurrence import optimal_recurrence_schedule, recurrence_step

__version__ = "0.1.0"

__all__ = [
    "BellDiagonal",
    "ConditionalPairDist",
    "state_entropy",
    "PROTOCOLS",
    "YieldReport",
    "breeding_yield",
    "cascade_yield",
    "eta_ordered",
    "eta_uniform",
    "protocol_report",
    "vv_yield",
    "BitVec",
    "SymplecticMatrix",
    "complete_symplectic",
    "symplectic_product",
    "optimal_recurrence_schedule",
    "recurrence_step",
]
