"""
Least-squares line fits on log-log axes for convergence orders.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from errors import InvalidArgumentError


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    # sum of squared residuals in log space
    residual: float
    points: int


def loglog_fit(xs: Sequence[float], ys: Sequence[float]) -> LogLogFit:
    """Ordinary least squares of log(y) against log(x), equal weights."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise InvalidArgumentError(f"need matching arrays with >= 2 points, got {x.size} and {y.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgumentError("log-log fit needs strictly positive data")
    coeffs, residuals, _, _, _ = np.polyfit(np.log(x), np.log(y), 1, full=True)
    residual = float(residuals[0]) if residuals.size else 0.0
    return LogLogFit(slope=float(coeffs[0]), intercept=float(coeffs[1]), residual=residual, points=int(x.size))
