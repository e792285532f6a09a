"""
Unit-norm complex amplitude vectors shared by the grid, state-preparation and phase-estimation services.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import InvalidArgumentError

NORM_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes with unit 2-norm. General length; power of two only matters for registers."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1 or amps.size == 0:
            raise InvalidArgumentError(f"State vector must be a non-empty 1-D array, got shape {amps.shape}")
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise InvalidArgumentError(f"State vector is not unit norm (norm={norm:.16g})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, values) -> "StateVector":
        arr = np.asarray(values, dtype=np.complex128)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0:
            raise InvalidArgumentError("Cannot normalize the zero vector")
        return cls(arr / norm)

    @property
    def dimension(self) -> int:
        return int(self.amplitudes.size)

    @property
    def num_qubits(self) -> Optional[int]:
        """Register width when the dimension is a power of two, else None."""
        n = self.dimension
        if n & (n - 1):
            return None
        return n.bit_length() - 1

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        self._check_same_dimension(other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def distance(self, other: "StateVector") -> float:
        self._check_same_dimension(other)
        return float(np.linalg.norm(self.amplitudes - other.amplitudes))

    def _check_same_dimension(self, other: "StateVector") -> None:
        if other.dimension != self.dimension:
            raise InvalidArgumentError(
                f"Dimension mismatch: {self.dimension} vs {other.dimension}"
            )
