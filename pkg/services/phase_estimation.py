"""
Exact measurement statistics of quantum phase estimation.

The second register holds sum_u d_u |u> over eigenvectors of G(t) = exp(-iHt) with
eigenphases phi_u in [0, 1). After b Hadamards, controlled powers and the inverse Fourier
transform, outcome j appears with probability p_j = sum_u |d_u|^2 |g(phi_u, j)|^2.
Two independent paths compute that distribution: the closed-form kernel g and a literal
statevector simulation of the register.
"""

import logging
import math
from dataclasses import dataclass
from typing import FrozenSet, Optional, Sequence, Union

import numpy as np

from env import MAX_ANCILLA_BITS, MAX_SYSTEM_DIM
from errors import InvalidArgumentError, InvariantViolationError, ResourceLimitError
from services.grid_operator import DiscreteHamiltonian

logger = logging.getLogger(__name__)

EXACT_PHASE_TOLERANCE = 1e-12
# below this |sin(pi theta)| the ratio form loses digits; sum the geometric series instead
SERIES_THRESHOLD = 1e-8
NORMALIZATION_TOLERANCE = 1e-10
IMPOSSIBLE_OUTCOME = 1e-14
KERNEL_CHUNK_ROWS = 256

RngLike = Union[int, np.random.Generator]


@dataclass(frozen=True, eq=False)
class SpectralInstance:
    """Eigenphases phi_l in [0, 1) and expansion amplitudes d_l of the input state."""

    phases: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        phases = np.array(self.phases, dtype=float)
        amps = np.array(self.amplitudes, dtype=np.complex128)
        if phases.ndim != 1 or phases.shape != amps.shape:
            raise InvalidArgumentError(f"phases {phases.shape} and amplitudes {amps.shape} must be matching 1-D arrays")
        if np.any(phases < 0.0) or np.any(phases >= 1.0):
            raise InvalidArgumentError("phases must lie in [0, 1)")
        total = float(np.sum(np.abs(amps) ** 2))
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidArgumentError(f"amplitudes are not normalized (sum |d|^2 = {total:.15g})")
        phases.setflags(write=False)
        amps.setflags(write=False)
        object.__setattr__(self, "phases", phases)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def size(self) -> int:
        return int(self.phases.size)

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.array(self.probabilities, dtype=float)
        if np.any(p < 0):
            raise InvariantViolationError("outcome distribution", "negative probability")
        total = float(p.sum())
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvariantViolationError("outcome distribution", f"probabilities sum to {total:.15g}")
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    @property
    def bins(self) -> int:
        return int(self.probabilities.size)

    @property
    def modal_outcome(self) -> int:
        return int(np.argmax(self.probabilities))


@dataclass(frozen=True, eq=False)
class CollapseResult:
    """Second-register coefficients over eigenvector index after observing `outcome`."""

    outcome: int
    probability: float
    post_state_coefficients: np.ndarray


@dataclass(frozen=True, eq=False)
class JointState:
    """Pre-measurement state, amplitudes[j, u] over ancilla outcome j and eigenvector u."""

    amplitudes: np.ndarray

    def marginal(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)


def wrap_distance(phi0, phi1):
    """min over integers x of |x + phi1 - phi0|, in [0, 1/2]."""
    d = np.mod(np.asarray(phi1, dtype=float) - np.asarray(phi0, dtype=float), 1.0)
    out = np.minimum(d, 1.0 - d)
    return float(out) if out.ndim == 0 else out


def _series_kernel(theta: float, bins: int) -> complex:
    m = np.arange(bins)
    return complex(np.exp(2j * math.pi * m * theta).sum() / bins)


def _kernel_block(phases: np.ndarray, b: int, outcomes: Optional[np.ndarray] = None) -> np.ndarray:
    """g(phi_u, j) for every phase (rows) and every requested outcome j (columns, default all)."""
    bins = 1 << b
    j = np.arange(bins) if outcomes is None else np.asarray(outcomes)
    theta = phases[:, None] - j[None, :] / bins
    x = bins * phases[:, None] - j[None, :]
    denom_sin = np.sin(math.pi * theta)

    exact = np.abs(x) < EXACT_PHASE_TOLERANCE
    near = ~exact & (np.abs(denom_sin) < SERIES_THRESHOLD)
    regular = ~(exact | near)

    g = np.empty(theta.shape, dtype=np.complex128)
    g[exact] = 1.0
    g[regular] = (np.sin(math.pi * x[regular])
                  * np.exp(1j * math.pi * theta[regular] * (bins - 1))
                  / (bins * denom_sin[regular]))
    for r, c in zip(*np.nonzero(near)):
        g[r, c] = _series_kernel(theta[r, c], bins)
    return g


def g_kernel(phi: float, j: int, b: int) -> complex:
    """Amplitude of outcome j for a single eigenphase phi with b ancilla qubits."""
    if b < 1:
        raise InvalidArgumentError(f"b must be >= 1, got {b}")
    if not 0 <= j < (1 << b):
        raise InvalidArgumentError(f"outcome j={j} outside [0, 2^{b})")
    bins = 1 << b
    x = bins * phi - j
    if abs(x) < EXACT_PHASE_TOLERANCE:
        return 1.0 + 0.0j
    theta = phi - j / bins
    denom_sin = math.sin(math.pi * theta)
    if abs(denom_sin) < SERIES_THRESHOLD:
        return _series_kernel(theta, bins)
    return complex(math.sin(math.pi * x) * np.exp(1j * math.pi * theta * (bins - 1)) / (bins * denom_sin))


def kernel_row(phi: float, b: int) -> np.ndarray:
    """g(phi, j) for j = 0 .. 2^b - 1."""
    return _kernel_block(np.array([float(phi)]), b)[0]


def outcome_distribution(instance: SpectralInstance, b: int) -> OutcomeDistribution:
    """p_j = sum_u |d_u|^2 |g(phi_u, j)|^2."""
    if b < 1:
        raise InvalidArgumentError(f"b must be >= 1, got {b}")
    weights = instance.weights
    active = np.nonzero(weights > 0)[0]
    p = np.zeros(1 << b)
    for start in range(0, active.size, KERNEL_CHUNK_ROWS):
        rows = active[start:start + KERNEL_CHUNK_ROWS]
        g = _kernel_block(instance.phases[rows], b)
        p += weights[rows] @ (np.abs(g) ** 2)
    return OutcomeDistribution(p)


def _check_budget(n: int, b: int) -> None:
    if b > MAX_ANCILLA_BITS or n > MAX_SYSTEM_DIM:
        raise ResourceLimitError(
            f"statevector simulation of b={b}, N={n} exceeds budget b<={MAX_ANCILLA_BITS}, N<={MAX_SYSTEM_DIM}"
        )


def statevector_qpe(instance: SpectralInstance, b: int) -> JointState:
    """Build the pre-measurement state step by step: superposition, phase kicks, inverse DFT."""
    if b < 1:
        raise InvalidArgumentError(f"b must be >= 1, got {b}")
    _check_budget(instance.size, b)
    bins = 1 << b

    # Hadamards on the first register
    state = np.full((bins, 1), 1.0 / math.sqrt(bins), dtype=np.complex128) * instance.amplitudes[None, :]
    # controlled powers Q^j act on |u> as exp(2 pi i j phi_u)
    m = np.arange(bins)[:, None]
    state = state * np.exp(2j * math.pi * m * instance.phases[None, :])
    # inverse Fourier transform: sum_m exp(-2 pi i m j / 2^b) / sqrt(2^b)
    state = np.fft.fft(state, axis=0) / math.sqrt(bins)
    return JointState(amplitudes=state)


def collapse(instance: SpectralInstance, b: int, outcome_j: int) -> CollapseResult:
    """Post-measurement coefficients d_u g(phi_u, j) / sqrt(p_j)."""
    bins = 1 << b
    if not 0 <= outcome_j < bins:
        raise InvalidArgumentError(f"outcome j={outcome_j} outside [0, {bins})")
    g = _kernel_block(instance.phases, b, np.array([outcome_j]))[:, 0]
    amps = instance.amplitudes * g
    p_j = float(np.sum(np.abs(amps) ** 2))
    if p_j < IMPOSSIBLE_OUTCOME:
        raise InvalidArgumentError(f"outcome j={outcome_j} has probability {p_j:.3e}; cannot collapse")
    coeffs = amps / math.sqrt(p_j)
    norm = float(np.linalg.norm(coeffs))
    if abs(norm - 1.0) > NORMALIZATION_TOLERANCE:
        raise InvariantViolationError("collapse normalization", f"norm {norm:.15g}")
    coeffs.setflags(write=False)
    return CollapseResult(outcome=outcome_j, probability=p_j, post_state_coefficients=coeffs)


def good_set(phi_target: float, b: int, window_k: int) -> FrozenSet[int]:
    """{ j : wrap_distance(j / 2^b, phi_target) <= window_k / 2^b }."""
    if window_k < 1:
        raise InvalidArgumentError(f"window_k must be >= 1, got {window_k}")
    bins = 1 << b
    j = np.arange(bins)
    dist = wrap_distance(j / bins, phi_target)
    return frozenset(int(v) for v in j[dist <= window_k / bins + EXACT_PHASE_TOLERANCE])


def good_set_probability(distribution: OutcomeDistribution, phi_target: float, window_k: int) -> float:
    b = distribution.bins.bit_length() - 1
    members = sorted(good_set(phi_target, b, window_k))
    return float(distribution.probabilities[members].sum())


def good_set_probability_bound(d_target_sq: float, window_k: int) -> float:
    """(8/pi^2)|d|^2 for window_k = 1, |d|^2 (1 - 1/(2(k-1))) above."""
    if window_k < 1:
        raise InvalidArgumentError(f"window_k must be >= 1, got {window_k}")
    if not 0.0 <= d_target_sq <= 1.0:
        raise InvalidArgumentError(f"|d|^2 must be in [0, 1], got {d_target_sq}")
    if window_k == 1:
        return 8.0 / math.pi ** 2 * d_target_sq
    return d_target_sq * (1.0 - 1.0 / (2.0 * (window_k - 1)))


def choose_b(n: int, epsilon: float) -> int:
    """b = n + ceil(log2(1 + 1/(2 epsilon)))."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if not 0.0 < epsilon < 1.0:
        raise InvalidArgumentError(f"epsilon must be in (0, 1), got {epsilon}")
    target = 1.0 + 1.0 / (2.0 * epsilon)
    extra = math.ceil(math.log2(target))
    # log2 rounding at exact powers of two
    if 2.0 ** (extra - 1) >= target:
        extra -= 1
    elif 2.0 ** extra < target:
        extra += 1
    return n + extra


def accuracy_window(b: int, n: int) -> int:
    """Good-set radius in bins that corresponds to accuracy 2^-n with b ancillas."""
    if b < n:
        raise InvalidArgumentError(f"b={b} must be >= n={n}")
    return 1 << (b - n)


def _rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_outcomes(distribution: OutcomeDistribution, shots: int, rng_seed: RngLike) -> np.ndarray:
    """Multinomial counts per bin; deterministic for a given seed."""
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    p = distribution.probabilities / distribution.probabilities.sum()
    return _rng(rng_seed).multinomial(shots, p)


def map_eigenvalue_to_phase(lam: float, t: float) -> float:
    """phi = (lambda t / 2 pi) mod 1; warns when the map aliases."""
    if t <= 0:
        raise InvalidArgumentError(f"evolution time must be > 0, got {t}")
    turns = lam * t / (2.0 * math.pi)
    if turns >= 1.0:
        logger.warning("eigenvalue %.6g aliases at t=%.6g (lambda t / 2 pi = %.6g)", lam, t, turns)
    return float(turns % 1.0)


def map_eigenvalues_to_phases(values: Sequence[float], t: float) -> np.ndarray:
    if t <= 0:
        raise InvalidArgumentError(f"evolution time must be > 0, got {t}")
    turns = np.asarray(values, dtype=float) * t / (2.0 * math.pi)
    if np.any(turns >= 1.0):
        logger.warning("%d eigenvalues alias at t=%.6g", int(np.sum(turns >= 1.0)), t)
    return np.mod(turns, 1.0)


def phase_to_eigenvalue(phi: float, t: float) -> float:
    if t <= 0:
        raise InvalidArgumentError(f"evolution time must be > 0, got {t}")
    return 2.0 * math.pi * phi / t


def choose_evolution_time(hamiltonian: DiscreteHamiltonian, b: int) -> float:
    """t = 2 pi (1 - 2^-b) / lambda_upper so every phase lands in [0, 1) without aliasing."""
    _, upper = hamiltonian.gershgorin_bounds()
    return 2.0 * math.pi * (1.0 - 2.0 ** -b) / upper


def random_instance(size: int, rng: RngLike, representable_bits: Optional[int] = None) -> SpectralInstance:
    """Random complex amplitudes; uniform phases, or distinct multiples of 2^-bits when requested."""
    gen = _rng(rng)
    amps = gen.standard_normal(size) + 1j * gen.standard_normal(size)
    amps /= np.linalg.norm(amps)
    if representable_bits is None:
        phases = gen.random(size)
    else:
        bins = 1 << representable_bits
        if size > bins:
            raise InvalidArgumentError(f"{size} distinct phases do not fit in {bins} bins")
        phases = gen.choice(bins, size=size, replace=False) / bins
    return SpectralInstance(phases=phases, amplitudes=amps)
