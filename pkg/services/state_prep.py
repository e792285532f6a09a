"""
Coarse-to-fine initial-state preparation.

A coarse eigenvector on N0 points is extended to N = 2^s N0 points by appending s qubits
in |0> and applying a Hadamard to each. In the computational basis that is the index map
f(j) = floor(j / 2^s): every coarse amplitude is repeated 2^s times and scaled by 2^(-s/2).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple, Union

import numpy as np

from errors import InvalidArgumentError, InvariantViolationError
from models.reports import OverlapRecord
from services.fitting import loglog_fit
from services.grid_operator import EigenBasis, EigenPair, build_grid, sample_eigenfunction
from services.statevector import StateVector

logger = logging.getLogger(__name__)

COMPLETENESS_TOLERANCE = 1e-10
FAILURE_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class OverlapReport:
    """Expansion d_{k,l} = <U_l|prepared> of a prepared state in the fine eigenbasis."""

    k: int
    coefficients: np.ndarray
    success_probability: float
    error_norm: float

    @property
    def failure(self) -> float:
        return max(0.0, 1.0 - self.success_probability)

    @property
    def complement_success(self) -> float:
        """1 - sum_{l != k} |d_{k,l}|^2; equals success_probability for a complete basis."""
        weights = np.abs(self.coefficients) ** 2
        return float(1.0 - (weights.sum() - weights[self.k]))

    @property
    def dimension(self) -> int:
        return int(self.coefficients.size)

    def check_invariants(self) -> None:
        total = float(np.sum(np.abs(self.coefficients) ** 2))
        if abs(total - 1.0) > COMPLETENESS_TOLERANCE:
            raise InvariantViolationError(
                "eigenexpansion completeness", f"sum |d|^2 = {total:.15g}"
            )
        if self.failure > self.error_norm ** 2 + FAILURE_SLACK:
            raise InvariantViolationError(
                "failure inequality",
                f"1 - |d_kk|^2 = {self.failure:.6e} > ||U - U~||^2 = {self.error_norm ** 2:.6e}",
            )

    def to_record(self, n0: int, s: int, degenerate_warning: bool = False) -> OverlapRecord:
        return OverlapRecord(
            N=self.dimension, N0=n0, s=s, k=self.k,
            success_probability=self.success_probability,
            failure=self.failure,
            error_norm=self.error_norm,
            degenerate_warning=degenerate_warning,
        )


@dataclass(frozen=True)
class FailureFit:
    slope: float
    intercept: float
    residual: float
    points_used: int
    excluded: Tuple[int, ...] = ()


@dataclass(frozen=True)
class TriangleBound:
    """Terms of ||U^N - U~|| <= ||U^N - V^N|| + ||V^N - rep(V^N0)|| + ||U^N0 - V^N0|| (V normalized samples)."""

    fine_discretization: float
    replication: float
    coarse_discretization: float

    @property
    def total(self) -> float:
        return self.fine_discretization + self.replication + self.coarse_discretization


def replicate(coarse_vector: StateVector, s: int) -> StateVector:
    """|U~> = |U^(N0)> (x) H^(x)s |0...0>: amplitude j is u_{floor(j/2^s)} / sqrt(2^s)."""
    if int(s) != s or s < 0:
        raise InvalidArgumentError(f"s must be a non-negative integer, got {s}")
    if s == 0:
        return coarse_vector
    block = 1 << int(s)
    amps = np.repeat(coarse_vector.amplitudes, block) / math.sqrt(block)
    return StateVector(amps)


def overlap_analysis(fine_basis: Union[EigenBasis, Sequence[EigenPair]], k: int,
                     prepared: StateVector) -> OverlapReport:
    """Expand `prepared` in the complete fine eigenbasis and score it against eigenvector k."""
    basis = fine_basis if isinstance(fine_basis, EigenBasis) else EigenBasis.from_pairs(fine_basis)
    if basis.count != basis.dimension:
        raise InvalidArgumentError(
            f"overlap analysis needs a complete basis, got {basis.count} of {basis.dimension} vectors"
        )
    if prepared.dimension != basis.dimension:
        raise InvalidArgumentError(
            f"prepared state has length {prepared.dimension}, basis has N={basis.dimension}"
        )
    if not 0 <= k < basis.count:
        raise InvalidArgumentError(f"k={k} outside [0, {basis.count})")
    basis.verify_orthonormal()

    coefficients = basis.vectors.conj().T @ prepared.amplitudes
    coefficients.setflags(write=False)
    d_kk = coefficients[k]
    success = float(abs(d_kk) ** 2)

    # distance to the phase-aligned target, min over global phase
    phase = d_kk / abs(d_kk) if abs(d_kk) > 0 else 1.0
    error_norm = float(np.linalg.norm(phase * basis.vectors[:, k] - prepared.amplitudes))

    report = OverlapReport(k=k, coefficients=coefficients, success_probability=success, error_norm=error_norm)
    logger.debug("overlap N=%d k=%d: |d_kk|^2=%.12f error=%.3e", basis.dimension, k, success, error_norm)
    return report


def perturbed_coarse_input(coarse: EigenPair, noise_magnitude: float, rng_seed: int) -> StateVector:
    """Unit vector at 2-norm distance noise_magnitude from the coarse eigenvector, seeded direction."""
    if not 0.0 <= noise_magnitude < 1.0:
        raise InvalidArgumentError(f"noise magnitude must be in [0, 1), got {noise_magnitude}")
    u = np.asarray(coarse.vector, dtype=float)
    if noise_magnitude == 0.0:
        return StateVector(u)

    rng = np.random.default_rng(rng_seed)
    direction = rng.standard_normal(u.size)
    direction -= np.dot(u, direction) * u
    direction /= np.linalg.norm(direction)

    # ||cos(t) u + sin(t) r - u||^2 = 2 - 2 cos(t)
    cos_t = 1.0 - noise_magnitude ** 2 / 2.0
    sin_t = math.sqrt(1.0 - cos_t ** 2)
    return StateVector.from_unnormalized(cos_t * u + sin_t * direction)


def failure_scaling_fit(samples: Sequence[Tuple[int, float]]) -> FailureFit:
    """Slope of log(failure) against log(N0); expected near -min(2, 2q)."""
    n0s = [int(n0) for n0, _ in samples]
    if len(set(n0s)) != len(n0s):
        raise InvalidArgumentError(f"coarse sizes must be distinct, got {n0s}")

    used: List[Tuple[int, float]] = []
    excluded: List[int] = []
    for n0, failure in samples:
        if failure > 0:
            used.append((int(n0), float(failure)))
        else:
            excluded.append(int(n0))
    if excluded:
        logger.warning("excluded non-positive failures at N0=%s from the fit", excluded)
    if len(used) < 3:
        raise InvalidArgumentError(f"need >= 3 positive failure samples, got {len(used)}")

    fit = loglog_fit([n for n, _ in used], [f for _, f in used])
    return FailureFit(slope=fit.slope, intercept=fit.intercept, residual=fit.residual,
                      points_used=fit.points, excluded=tuple(excluded))


def replication_error_terms(analytic_fn: Callable, coarse: EigenPair, fine: EigenPair, s: int) -> TriangleBound:
    """Bound the preparation error through normalized samples of the continuous eigenfunction."""
    n0 = coarse.vector.size
    n = fine.vector.size
    if n != n0 << s:
        raise InvalidArgumentError(f"fine size {n} is not 2^{s} * {n0}")
    v_fine = sample_eigenfunction(analytic_fn, build_grid(n)).state.amplitudes.real
    v_coarse = sample_eigenfunction(analytic_fn, build_grid(n0)).state.amplitudes.real

    u_fine = fine.vector if np.dot(fine.vector, v_fine) >= 0 else -fine.vector
    u_coarse = coarse.vector if np.dot(coarse.vector, v_coarse) >= 0 else -coarse.vector
    rep = replicate(StateVector(v_coarse), s).amplitudes.real

    return TriangleBound(
        fine_discretization=float(np.linalg.norm(u_fine - v_fine)),
        replication=float(np.linalg.norm(v_fine - rep)),
        coarse_discretization=float(np.linalg.norm(u_coarse - v_coarse)),
    )
