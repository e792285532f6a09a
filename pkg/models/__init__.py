"""
Pydantic models for experiment configuration and reports.
"""

from .config import ExperimentConfig, PhaseConfig, PotentialSpec
from .reports import (
    FitSummary,
    OverlapRecord,
    ResourceSummary,
    RunRecord,
    RunReport,
    SuccessRateRecord,
    ThresholdPoint,
)

__all__ = [
    'ExperimentConfig', 'PhaseConfig', 'PotentialSpec',
    'FitSummary', 'OverlapRecord', 'ResourceSummary', 'RunRecord', 'RunReport',
    'SuccessRateRecord', 'ThresholdPoint',
]
