"""
Discretized Schrodinger-type operators on a uniform interior grid of [0, 1].

H_N = -d^2/dx^2 + V(x) with the 3-point central stencil and homogeneous Dirichlet
boundaries, in units hbar = 2m = 1. Eigenpairs come from LAPACK's symmetric
tridiagonal drivers through scipy.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError
from scipy.linalg import LinAlgError, eigh_tridiagonal

from errors import InvalidArgumentError, NumericFailureError
from models.config import PotentialSpec
from services.fitting import LogLogFit, loglog_fit
from services.statevector import StateVector

logger = logging.getLogger(__name__)

ORTHONORMAL_TOLERANCE = 1e-10
RESIDUAL_TOLERANCE = 1e-8
RESIDUAL_BLOCK = 256
DEGENERACY_TOLERANCE = 1e-9
TABULATED_POSITION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """N interior points x_j = (j+1) h of [0, 1], h = 1/(N+1)."""

    n_points: int

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n_points + 1)

    @property
    def points(self) -> np.ndarray:
        return np.arange(1, self.n_points + 1, dtype=float) * self.spacing


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Real symmetric tridiagonal H_N stored as (diagonal, off_diagonal)."""

    grid: GridSpec
    diagonal: np.ndarray
    off_diagonal: np.ndarray
    potential: np.ndarray

    @property
    def size(self) -> int:
        return self.grid.n_points

    def to_dense(self) -> np.ndarray:
        return (np.diag(self.diagonal)
                + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))

    def matvec(self, vector: np.ndarray) -> np.ndarray:
        """H v for a vector, or column by column for an (N, m) block."""
        v = np.asarray(vector)
        diagonal, off = (self.diagonal, self.off_diagonal) if v.ndim == 1 else \
            (self.diagonal[:, None], self.off_diagonal[:, None])
        out = diagonal * v
        out[:-1] += off * v[1:]
        out[1:] += off * v[:-1]
        return out

    def gershgorin_bounds(self) -> Tuple[float, float]:
        """Interval containing every eigenvalue."""
        radius = np.zeros(self.size)
        radius[:-1] += np.abs(self.off_diagonal)
        radius[1:] += np.abs(self.off_diagonal)
        return float(np.min(self.diagonal - radius)), float(np.max(self.diagonal + radius))


@dataclass(frozen=True, eq=False)
class EigenPair:
    """Eigenvalue, unit eigenvector (largest-magnitude coordinate positive) and ascending index."""

    value: float
    vector: np.ndarray
    index: int

    def state(self) -> StateVector:
        return StateVector(self.vector)

    def residual(self, hamiltonian: DiscreteHamiltonian) -> float:
        return float(np.linalg.norm(hamiltonian.matvec(self.vector) - self.value * self.vector))


@dataclass(eq=False)
class EigenBasis:
    """Eigenvalues and eigenvectors as columns; orthonormality is verified once and remembered."""

    values: np.ndarray
    vectors: np.ndarray
    _verified: bool = field(default=False, repr=False)

    @classmethod
    def from_pairs(cls, pairs: Sequence[EigenPair]) -> "EigenBasis":
        if not pairs:
            raise InvalidArgumentError("eigenbasis needs at least one eigenpair")
        values = np.array([p.value for p in pairs])
        vectors = np.column_stack([p.vector for p in pairs])
        return cls(values=values, vectors=vectors)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def count(self) -> int:
        return int(self.vectors.shape[1])

    def pair(self, k: int) -> EigenPair:
        return EigenPair(value=float(self.values[k]), vector=self.vectors[:, k], index=k)

    def verify_orthonormal(self, tolerance: float = ORTHONORMAL_TOLERANCE) -> None:
        """Raise InvalidArgumentError naming the worst pair if |<U_l|U_m>| exceeds tolerance for l != m."""
        if self._verified:
            return
        gram = self.vectors.conj().T @ self.vectors
        deviation = np.abs(gram - np.eye(self.count))
        worst = np.unravel_index(int(np.argmax(deviation)), deviation.shape)
        if deviation[worst] > tolerance:
            l, m = int(worst[0]), int(worst[1])
            raise InvalidArgumentError(
                f"basis not orthonormal: |<U_{l}|U_{m}> - delta| = {deviation[worst]:.3e}",
                context={"pair": (l, m)},
            )
        self._verified = True


@dataclass(frozen=True, eq=False)
class SampledEigenfunction:
    """Samples v(x_j), their 2-norm before normalization, and the normalized state."""

    coordinates: np.ndarray
    raw_norm: float
    state: StateVector


@dataclass(frozen=True)
class ConvergenceStudy:
    sizes: Tuple[int, ...]
    errors: Tuple[float, ...]
    fit: LogLogFit

    @property
    def order(self) -> float:
        """q in ||U - V/||V|| || = O(h^q)."""
        return self.fit.slope


def build_grid(n_points: int) -> GridSpec:
    if int(n_points) != n_points or n_points < 2:
        raise InvalidArgumentError(f"grid needs n_points >= 2, got {n_points}")
    return GridSpec(int(n_points))


def evaluate_potential(potential: PotentialSpec, grid: GridSpec) -> np.ndarray:
    x = grid.points
    if potential.kind == "zero":
        return np.zeros_like(x)
    if potential.kind == "quadratic":
        return potential.strength * (x - 0.5) ** 2
    values = np.array(potential.values, dtype=float)
    if values.size != grid.n_points:
        raise InvalidArgumentError(
            f"tabulated potential has {values.size} values, grid has N={grid.n_points}; "
            "a table covers one grid size, so coarse and fine grids cannot share it (use s = 0)"
        )
    if potential.positions is not None:
        offset = float(np.max(np.abs(np.asarray(potential.positions) - x)))
        if offset > TABULATED_POSITION_TOLERANCE:
            raise InvalidArgumentError(
                f"tabulated positions do not match the grid (max offset {offset:.3e})"
            )
    return values


def discretize(potential: Union[PotentialSpec, Sequence[float]], grid: GridSpec) -> DiscreteHamiltonian:
    """3-point stencil: diagonal 2/h^2 + V(x_j), off-diagonal -1/h^2."""
    if isinstance(potential, PotentialSpec):
        v = evaluate_potential(potential, grid)
    else:
        v = np.array(potential, dtype=float)
        if v.shape != (grid.n_points,):
            raise InvalidArgumentError(f"potential values have shape {v.shape}, expected ({grid.n_points},)")
    if np.any(v < 0):
        j = int(np.argmin(v))
        raise InvalidArgumentError(f"negative potential V(x_{j}) = {v[j]:g}")
    inv_h2 = 1.0 / grid.spacing ** 2
    diagonal = 2.0 * inv_h2 + v
    off_diagonal = np.full(grid.n_points - 1, -inv_h2)
    for arr in (diagonal, off_diagonal, v):
        arr.setflags(write=False)
    return DiscreteHamiltonian(grid=grid, diagonal=diagonal, off_diagonal=off_diagonal, potential=v)


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    magnitude = np.abs(vector)
    # first coordinate within rounding of the maximum, so mirrored peaks pick consistently
    idx = int(np.argmax(magnitude >= magnitude.max() * (1.0 - 1e-9)))
    return -vector if vector[idx] < 0 else vector


def eigensolve(hamiltonian: DiscreteHamiltonian, count: int) -> List[EigenPair]:
    """
    The `count` lowest eigenpairs in ascending order, sign convention applied.

    Every returned pair is checked for ||H v - lambda v|| <= 1e-8 lambda; misses are logged, not raised.
    """
    n = hamiltonian.size
    if not 1 <= count <= n:
        raise InvalidArgumentError(f"count must be in [1, {n}], got {count}")
    try:
        if count == n:
            values, vectors = eigh_tridiagonal(hamiltonian.diagonal, hamiltonian.off_diagonal)
        else:
            values, vectors = eigh_tridiagonal(
                hamiltonian.diagonal, hamiltonian.off_diagonal,
                select="i", select_range=(0, count - 1),
            )
    except LinAlgError as e:
        raise NumericFailureError(
            f"tridiagonal eigensolver did not converge: {e}",
            diagnostics={"N": n, "count": count, "lapack": str(e)},
        )

    vectors = vectors / np.linalg.norm(vectors, axis=0)
    # ||H v - lambda v|| for every returned pair, in column blocks; warning only
    residuals = np.concatenate([
        np.linalg.norm(hamiltonian.matvec(vectors[:, i:i + RESIDUAL_BLOCK])
                       - vectors[:, i:i + RESIDUAL_BLOCK] * values[i:i + RESIDUAL_BLOCK], axis=0)
        for i in range(0, count, RESIDUAL_BLOCK)
    ])
    ratios = residuals / np.maximum(np.abs(values), np.finfo(float).tiny)
    worst = int(np.argmax(ratios))
    if ratios[worst] > RESIDUAL_TOLERANCE:
        logger.warning("%d eigenpair(s) exceed residual %.0e * lambda (N=%d), worst eigenpair %d: %.3e",
                       int(np.count_nonzero(ratios > RESIDUAL_TOLERANCE)), RESIDUAL_TOLERANCE,
                       n, worst, residuals[worst])

    pairs = []
    for k in range(count):
        vec = _fix_sign(vectors[:, k])
        vec.setflags(write=False)
        pairs.append(EigenPair(value=float(values[k]), vector=vec, index=k))
    logger.debug("eigensolve N=%d count=%d lambda_0=%.10g", n, count, pairs[0].value)
    return pairs


def eigenbasis(hamiltonian: DiscreteHamiltonian) -> EigenBasis:
    """Complete eigenbasis of H_N (all N pairs)."""
    return EigenBasis.from_pairs(eigensolve(hamiltonian, hamiltonian.size))


def degenerate_pairs(values: Sequence[float], rel_tol: float = DEGENERACY_TOLERANCE) -> List[Tuple[int, int]]:
    vals = np.asarray(values, dtype=float)
    gaps = np.diff(vals)
    hits = np.nonzero(gaps < rel_tol * np.abs(vals[:-1]))[0]
    pairs = [(int(k), int(k) + 1) for k in hits]
    if pairs:
        logger.warning("near-degenerate eigenvalues at %s", pairs)
    return pairs


def analytic_eigenvalues(grid: GridSpec, count: int) -> np.ndarray:
    """Zero-potential Toeplitz eigenvalues (4/h^2) sin^2((k+1) pi h / 2), k = 0..count-1."""
    h = grid.spacing
    k = np.arange(1, count + 1)
    return (4.0 / h ** 2) * np.sin(k * math.pi * h / 2.0) ** 2


def analytic_eigenfunction(potential: PotentialSpec, k: int) -> Optional[Callable[[np.ndarray], np.ndarray]]:
    """Unit L2-norm eigenfunction v_k of the continuous operator when known in closed form."""
    if potential.kind != "zero":
        return None
    mode = k + 1

    def v(x):
        return math.sqrt(2.0) * np.sin(mode * math.pi * np.asarray(x, dtype=float))

    return v


def sample_eigenfunction(analytic_fn: Callable, grid: GridSpec) -> SampledEigenfunction:
    """|V> = sum_j v(x_j)|j>, normalized; raw_norm is ||V|| before normalization."""
    x = grid.points
    coords = np.broadcast_to(np.asarray(analytic_fn(x), dtype=float), x.shape).copy()
    raw_norm = float(np.linalg.norm(coords))
    if raw_norm == 0.0:
        raise InvalidArgumentError("sampled function vanishes on every grid point")
    coords.setflags(write=False)
    return SampledEigenfunction(coordinates=coords, raw_norm=raw_norm,
                                state=StateVector(coords / raw_norm))


def norm_deviation_fit(analytic_fn: Callable, sizes: Sequence[int]) -> LogLogFit:
    """Slope of | ||V^(N)|| / sqrt(N) - 1 | against N."""
    deviations = []
    for n in sizes:
        sample = sample_eigenfunction(analytic_fn, build_grid(n))
        deviations.append(abs(sample.raw_norm / math.sqrt(n) - 1.0))
    return loglog_fit(sizes, deviations)


def eigenvector_convergence(potential: PotentialSpec, k: int, sizes: Sequence[int],
                            reference_size: int) -> ConvergenceStudy:
    """
    Pointwise convergence of discrete eigenvectors against a nested fine-grid reference.

    Every N+1 must divide reference_size+1 so that coarse points are reference points.
    """
    ref_grid = build_grid(reference_size)
    reference = eigensolve(discretize(potential, ref_grid), k + 1)[k].vector
    errors = []
    for n in sizes:
        ratio, rem = divmod(reference_size + 1, n + 1)
        if rem:
            raise InvalidArgumentError(f"N+1={n + 1} does not divide reference N+1={reference_size + 1}")
        restricted = reference[np.arange(1, n + 1) * ratio - 1]
        restricted = restricted / np.linalg.norm(restricted)
        u = eigensolve(discretize(potential, build_grid(n)), k + 1)[k].vector
        if np.dot(u, restricted) < 0:
            restricted = -restricted
        errors.append(float(np.linalg.norm(u - restricted)))
    spacings = [1.0 / (n + 1) for n in sizes]
    fit = loglog_fit(spacings, errors)
    logger.info("eigenvector convergence (%s, k=%d): q = %.3f", potential.label, k, fit.slope)
    return ConvergenceStudy(sizes=tuple(sizes), errors=tuple(errors), fit=fit)


def load_potential_csv(path: Union[str, Path]) -> PotentialSpec:
    """Two-column CSV (x, V(x)) with a header row."""
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as e:
        raise InvalidArgumentError(f"cannot read potential file {path}: {e}")
    if table.shape[1] != 2:
        raise InvalidArgumentError(f"potential file {path} must have 2 columns, found {table.shape[1]}")
    try:
        return PotentialSpec(kind="tabulated", positions=tuple(table[:, 0]),
                             values=tuple(table[:, 1]), source=str(path))
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid potential file {path}: {e.errors()[0]['msg']}")
