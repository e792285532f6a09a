"""
End-to-end experiment driver: coarse eigensolve -> replicate -> fine eigenexpansion -> phase estimation.

The fine-grid eigenbasis is the test oracle, obtained classically at desk scale. It is not
part of the method under test.
"""

import logging
import math
import threading
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from env import BASIS_CACHE_SIZE, MAX_ANCILLA_BITS, MAX_SYSTEM_DIM, WORKERS
from errors import InvalidArgumentError, InvariantViolationError, SimulationError
from harness.io import SWEEP_COLUMNS, records_csv, rows_to_csv
from models.config import ExperimentConfig, PhaseConfig, PotentialSpec
from models.reports import (
    FitSummary,
    GoodSetWindow,
    ResourceSummary,
    RunRecord,
    RunReport,
    SuccessRateRecord,
    ThresholdPoint,
)
from services.grid_operator import (
    DiscreteHamiltonian,
    EigenBasis,
    EigenPair,
    analytic_eigenfunction,
    build_grid,
    degenerate_pairs,
    discretize,
    eigenbasis,
    eigensolve,
)
from services.phase_estimation import (
    SpectralInstance,
    choose_b,
    choose_evolution_time,
    good_set,
    good_set_probability,
    good_set_probability_bound,
    map_eigenvalues_to_phases,
    outcome_distribution,
    phase_to_eigenvalue,
    sample_outcomes,
    statevector_qpe,
)
from services.state_prep import (
    FailureFit,
    failure_scaling_fit,
    overlap_analysis,
    perturbed_coarse_input,
    replicate,
    replication_error_terms,
)
from services.statevector import StateVector

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-9
BOUND_SLACK = 1e-12
FAILURE_THRESHOLD = 0.5
MIN_SAMPLING_SHOTS = 1000
# window_k values recorded per run; the first is the one sampled shots are scored against
GOOD_SET_WINDOWS = (1, 2, 4)

FineProblem = Tuple[DiscreteHamiltonian, EigenBasis]


@dataclass(frozen=True)
class SweepResult:
    report: RunReport
    fit: FailureFit
    csv_text: str


def _log2_exact(n: int) -> Optional[int]:
    return None if n & (n - 1) else n.bit_length() - 1


def resolve_b(qpe: PhaseConfig) -> int:
    """Explicit b wins; otherwise choose_b(n, epsilon)."""
    return qpe.b if qpe.b is not None else choose_b(qpe.n, qpe.epsilon)


class ExperimentService:
    """
    Runs coarse-to-fine phase-estimation experiments.
    Thread-safe: fine eigenbases are cached per (potential, N) behind a lock, everything else is per call.
    The cache holds at most `cache_size` bases and evicts the least recently used one.
    """

    def __init__(self, workers: int = WORKERS, cache_size: int = BASIS_CACHE_SIZE):
        if cache_size < 1:
            raise InvalidArgumentError(f"cache_size must be >= 1, got {cache_size}")
        self.workers = max(1, int(workers))
        self.cache_size = int(cache_size)
        self._bases: "OrderedDict[Tuple[PotentialSpec, int], FineProblem]" = OrderedDict()
        self._lock = threading.Lock()

    def fine_problem(self, potential: PotentialSpec, n: int) -> FineProblem:
        """H_N and its complete, orthonormality-checked eigenbasis."""
        key = (potential, n)
        with self._lock:
            if key in self._bases:
                self._bases.move_to_end(key)
                return self._bases[key]
            logger.info("solving fine oracle %s N=%d", potential.label, n)
            hamiltonian = discretize(potential, build_grid(n))
            basis = eigenbasis(hamiltonian)
            basis.verify_orthonormal()
            self._bases[key] = (hamiltonian, basis)
            while len(self._bases) > self.cache_size:
                (evicted, size), _ = self._bases.popitem(last=False)
                logger.debug("evicted fine oracle %s N=%d", evicted.label, size)
            return hamiltonian, basis

    def cached_problems(self) -> List[Tuple[PotentialSpec, int]]:
        """Cache keys, least recently used first."""
        with self._lock:
            return list(self._bases)

    def coarse_input(self, config: ExperimentConfig, n0: int, s: int) -> Tuple[EigenPair, StateVector]:
        """Classically solved coarse eigenpair k, and the (optionally perturbed) state fed to replication."""
        coarse_h = discretize(config.potential, build_grid(n0))
        coarse = eigensolve(coarse_h, config.k + 1)[config.k]
        if config.noise > 0:
            seed = np.random.SeedSequence([config.rng_seed, n0, s, 1]).generate_state(1)[0]
            return coarse, perturbed_coarse_input(coarse, config.noise, int(seed))
        return coarse, coarse.state()

    def run_pipeline(self, config: ExperimentConfig) -> RunReport:
        """Run every (N0, s) point of the config; records are ordered by (N0, s)."""
        b = resolve_b(config.qpe)
        points = config.points()
        logger.info("run %s k=%d b=%d points=%d", config.potential.label, config.k, b, len(points))

        # fine oracles for this run, held here since the cache may evict them
        problems: Dict[int, FineProblem] = {}
        for n0, s, n in points:
            if n in problems:
                continue
            try:
                problems[n] = self.fine_problem(config.potential, n)
            except SimulationError as e:
                raise e.add_context(N0=n0, s=s)

        if self.workers > 1 and len(points) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                records = list(pool.map(lambda p: self._run_point(config, p[0], p[1], b, problems[p[2]]), points))
        else:
            records = [self._run_point(config, n0, s, b, problems[n]) for n0, s, n in points]

        logger.info("run completed (%d records)", len(records))
        return RunReport(config=config, records=records)

    def _run_point(self, config: ExperimentConfig, n0: int, s: int, b: int, problem: FineProblem) -> RunRecord:
        try:
            return self._evaluate_point(config, n0, s, b, problem)
        except SimulationError as e:
            raise e.add_context(N0=n0, s=s)

    def _evaluate_point(self, config: ExperimentConfig, n0: int, s: int, b: int,
                        problem: FineProblem) -> RunRecord:
        start = time.perf_counter()
        k = config.k
        n = n0 << s

        coarse, coarse_state = self.coarse_input(config, n0, s)
        prepared = replicate(coarse_state, s)

        fine_h, basis = problem
        overlap = overlap_analysis(basis, k, prepared)
        overlap.check_invariants()
        nearby = basis.values[max(0, k - 1):k + 2]
        degenerate = bool(degenerate_pairs(nearby))

        triangle_total = None
        analytic_fn = analytic_eigenfunction(config.potential, k)
        if analytic_fn is not None and config.noise == 0:
            terms = replication_error_terms(analytic_fn, coarse, basis.pair(k), s)
            triangle_total = terms.total
            if overlap.error_norm > triangle_total + BOUND_SLACK:
                raise InvariantViolationError(
                    "triangle bound", f"error {overlap.error_norm:.6e} > {triangle_total:.6e}"
                )

        t = config.qpe.evolution_time or choose_evolution_time(fine_h, b)
        phases = map_eigenvalues_to_phases(basis.values, t)
        instance = SpectralInstance(phases=phases, amplitudes=overlap.coefficients)
        distribution = outcome_distribution(instance, b)

        deviation = None
        if n <= MAX_SYSTEM_DIM and b <= MAX_ANCILLA_BITS and _log2_exact(n) is not None:
            joint = statevector_qpe(instance, b)
            deviation = float(np.max(np.abs(joint.marginal() - distribution.probabilities)))
            if deviation > ORACLE_TOLERANCE:
                raise InvariantViolationError(
                    "oracle equivalence", f"statevector marginal differs by {deviation:.3e}"
                )

        phi_k = float(phases[k])
        windows = []
        for window_k in GOOD_SET_WINDOWS:
            probability = good_set_probability(distribution, phi_k, window_k)
            window_bound = good_set_probability_bound(overlap.success_probability, window_k)
            if probability < window_bound - BOUND_SLACK:
                raise InvariantViolationError(
                    "good-set bound",
                    f"window {window_k}: Pr(G) = {probability:.6f} < {window_bound:.6f}",
                )
            windows.append(GoodSetWindow(window_k=window_k, probability=probability, bound=window_bound))
        measured, bound = windows[0].probability, windows[0].bound

        bins = 1 << b
        modal = distribution.modal_outcome
        phase_estimate = modal / bins
        eigenvalue_estimate = phase_to_eigenvalue(phase_estimate, t)
        fine_eigenvalue = float(basis.values[k])

        rate = floor = None
        if config.shots > 0:
            rng = np.random.default_rng([config.rng_seed, n0, s])
            counts = sample_outcomes(distribution, config.shots, rng)
            hits = int(counts[sorted(good_set(phi_k, b, 1))].sum())
            rate = hits / config.shots
            sigma = math.sqrt(bound * (1.0 - bound) / config.shots)
            floor = bound - 3.0 * sigma

        fine_qubits = _log2_exact(n)
        resources = ResourceSummary(
            coarse_qubits=_log2_exact(n0),
            fine_qubits=fine_qubits,
            hadamard_gates=s,
            ancilla_qubits=b,
            total_qubits=None if fine_qubits is None else b + fine_qubits,
        )

        record = RunRecord(
            **overlap.to_record(n0, s, degenerate).model_dump(),
            bound_rhs=overlap.error_norm ** 2,
            triangle_bound=triangle_total,
            b=b,
            evolution_time=t,
            true_phase=phi_k,
            good_set_probability=measured,
            good_set_bound=bound,
            good_set_windows=windows,
            modal_outcome=modal,
            phase_estimate=phase_estimate,
            eigenvalue_estimate=eigenvalue_estimate,
            fine_eigenvalue=fine_eigenvalue,
            eigenvalue_error=abs(eigenvalue_estimate - fine_eigenvalue),
            eigenvalue_tolerance=phase_to_eigenvalue(1.0 / bins, t),
            statevector_deviation=deviation,
            shots=config.shots,
            rng_seed=config.rng_seed,
            empirical_success_rate=rate,
            success_rate_floor=floor,
            resources=resources,
            duration_seconds=time.perf_counter() - start,
        )
        logger.info("N0=%d s=%d N=%d: |d_kk|^2=%.10f failure=%.3e Pr(G)=%.4f",
                    n0, s, n, record.success_probability, record.failure, measured)
        return record

    def threshold_check(self, config: ExperimentConfig, n0: int, doublings: int = 2) -> List[ThresholdPoint]:
        """Failure for one coarse size at N, 2N, ... 2^doublings N, using only fine eigenvector k."""
        s0 = config.doubling_count(n0)
        coarse, coarse_state = self.coarse_input(config, n0, s0)
        points = []
        for extra in range(doublings + 1):
            s = s0 + extra
            n = n0 << s
            fine = eigensolve(discretize(config.potential, build_grid(n)), config.k + 1)[config.k]
            prepared = replicate(coarse_state, s)
            overlap = abs(np.vdot(fine.vector, prepared.amplitudes)) ** 2
            points.append(ThresholdPoint(N=n, failure=max(0.0, 1.0 - float(overlap))))
        return points

    def sweep_and_fit(self, config: ExperimentConfig,
                      injected: Optional[Sequence[Tuple[int, float]]] = None) -> SweepResult:
        """
        Sweep the coarse sizes, fit log(failure) against log(N0) and locate the failure < 1/2 threshold.

        Args:
            config: experiment with at least three coarse sizes
            injected: (N0, failure) pairs that replace the pipeline, for checking the fitter alone

        Returns:
            SweepResult with the report, the fit and the CSV artifact
        """
        if injected is not None:
            fit = failure_scaling_fit(injected)
            csv_text = rows_to_csv(({"N0": n0, "failure": f} for n0, f in injected), SWEEP_COLUMNS)
            report = RunReport(config=config, records=[], fit=_fit_summary(fit))
            return SweepResult(report=report, fit=fit, csv_text=csv_text)

        if len(config.n0_list) < 3:
            raise InvalidArgumentError(f"sweep needs >= 3 coarse sizes, got {len(config.n0_list)}")

        report = self.run_pipeline(config)
        fit = failure_scaling_fit([(r.N0, r.failure) for r in report.records])
        report.fit = _fit_summary(fit)

        below = [r.N0 for r in report.records if r.failure < FAILURE_THRESHOLD]
        if below:
            report.threshold_n0 = min(below)
            report.threshold_points = self.threshold_check(config, report.threshold_n0)
        logger.info("sweep fit slope %.3f, threshold N0=%s", fit.slope, report.threshold_n0)
        return SweepResult(report=report, fit=fit, csv_text=records_csv(report.records, SWEEP_COLUMNS))

    def end_to_end_success_rate(self, config: ExperimentConfig) -> List[SuccessRateRecord]:
        """Fraction of shots within 2^-b of the fine phase, against (8/pi^2)|d_kk|^2 - 3 sigma."""
        if config.shots < MIN_SAMPLING_SHOTS:
            raise InvalidArgumentError(f"need >= {MIN_SAMPLING_SHOTS} shots, got {config.shots}")
        report = self.run_pipeline(config)
        results = []
        for r in report.records:
            sigma = math.sqrt(r.good_set_bound * (1.0 - r.good_set_bound) / r.shots)
            results.append(SuccessRateRecord(
                N0=r.N0, s=r.s, N=r.N, shots=r.shots,
                hits=int(round(r.empirical_success_rate * r.shots)),
                rate=r.empirical_success_rate,
                predicted_floor=r.success_rate_floor,
                sigma=sigma,
                passed=r.empirical_success_rate >= r.success_rate_floor,
            ))
        return results


def _fit_summary(fit: FailureFit) -> FitSummary:
    return FitSummary(slope=fit.slope, intercept=fit.intercept, residual=fit.residual,
                      points_used=fit.points_used, excluded=list(fit.excluded))
