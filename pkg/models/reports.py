"""
Serializable results of pipeline runs and sweeps.
"""

from typing import List, Optional

from pydantic import BaseModel, Field

from models.config import ExperimentConfig


class OverlapRecord(BaseModel):
    """JSON form of an overlap analysis."""

    N: int
    N0: int
    s: int
    k: int
    success_probability: float
    failure: float
    error_norm: float
    degenerate_warning: bool = False


class ResourceSummary(BaseModel):
    """Qubit bookkeeping; None where a size is not a power of two."""

    coarse_qubits: Optional[int] = None
    fine_qubits: Optional[int] = None
    hadamard_gates: int
    ancilla_qubits: int
    total_qubits: Optional[int] = None


class GoodSetWindow(BaseModel):
    """Pr(G) within window_k bins of the target phase, and its lower bound."""

    window_k: int
    probability: float
    bound: float


class RunRecord(OverlapRecord):
    """
    One (N0, s) point of a pipeline run.

    good_set_probability and good_set_bound are the window_k = 1 values; good_set_windows carries
    every window the run checked.
    """

    bound_rhs: float
    triangle_bound: Optional[float] = None
    b: int
    evolution_time: float
    true_phase: float
    good_set_probability: float
    good_set_bound: float
    good_set_windows: List[GoodSetWindow] = Field(default_factory=list)
    modal_outcome: int
    phase_estimate: float
    eigenvalue_estimate: float
    fine_eigenvalue: float
    eigenvalue_error: float
    eigenvalue_tolerance: float
    statevector_deviation: Optional[float] = None
    shots: int = 0
    rng_seed: int
    empirical_success_rate: Optional[float] = None
    success_rate_floor: Optional[float] = None
    resources: ResourceSummary
    duration_seconds: float = 0.0


class FitSummary(BaseModel):
    slope: float
    intercept: float
    residual: float
    points_used: int
    excluded: List[int] = Field(default_factory=list)


class ThresholdPoint(BaseModel):
    N: int
    failure: float


class RunReport(BaseModel):
    config: ExperimentConfig
    records: List[RunRecord]
    fit: Optional[FitSummary] = None
    threshold_n0: Optional[int] = None
    threshold_points: List[ThresholdPoint] = Field(default_factory=list)


class SuccessRateRecord(BaseModel):
    """Finite-shot end-to-end accuracy check for one (N0, s) point."""

    N0: int
    s: int
    N: int
    shots: int
    hits: int
    rate: float
    predicted_floor: float
    sigma: float
    passed: bool
