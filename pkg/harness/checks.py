"""
Invariant suites behind `cli.py check` and `GET /check`.

Each check raises InvariantViolationError on the first counterexample; run_all_checks
collects outcomes in a fixed order.
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import InvariantViolationError
from models.config import PotentialSpec
from services.grid_operator import (
    analytic_eigenfunction,
    analytic_eigenvalues,
    build_grid,
    discretize,
    eigenbasis,
    eigensolve,
    sample_eigenfunction,
)
from services.phase_estimation import (
    choose_b,
    collapse,
    good_set_probability,
    good_set_probability_bound,
    kernel_row,
    outcome_distribution,
    random_instance,
    statevector_qpe,
)
from services.state_prep import overlap_analysis, replicate

logger = logging.getLogger(__name__)

# coarse sizes and Hadamard counts swept by the failure inequality check
FAILURE_GRID_N0 = (8, 16, 32, 64, 128)
FAILURE_GRID_S = range(6)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    seconds: float
    detail: str = ""


def check_kernel_completeness(rng: np.random.Generator, samples: int = 100) -> None:
    for b in range(1, 11):
        for phi in rng.random(samples // 10 or 1):
            total = float(np.sum(np.abs(kernel_row(phi, b)) ** 2))
            if abs(total - 1.0) > 1e-10:
                raise InvariantViolationError("kernel completeness", f"b={b} phi={phi!r}: sum |g|^2 = {total!r}")


def check_oracle_equivalence(rng: np.random.Generator, instances: int = 200) -> None:
    for _ in range(instances):
        b = int(rng.integers(1, 9))
        size = int(rng.integers(1, 65))
        instance = random_instance(size, rng)
        analytic = outcome_distribution(instance, b).probabilities
        marginal = statevector_qpe(instance, b).marginal()
        gap = float(np.max(np.abs(analytic - marginal)))
        if gap > 1e-9:
            raise InvariantViolationError("oracle equivalence", f"b={b} N={size}: max gap {gap:.3e}")


def check_exact_phases(rng: np.random.Generator, instances: int = 50) -> None:
    for _ in range(instances):
        b = int(rng.integers(2, 8))
        size = int(rng.integers(1, min(16, 1 << b) + 1))
        instance = random_instance(size, rng, representable_bits=b)
        p = outcome_distribution(instance, b).probabilities
        bins = np.rint(instance.phases * (1 << b)).astype(int)
        gap = float(np.max(np.abs(p[bins] - instance.weights)))
        if gap > 1e-12:
            raise InvariantViolationError("exact-phase distribution", f"b={b}: gap {gap:.3e}")
        u = int(rng.integers(size))
        result = collapse(instance, b, int(bins[u]))
        fidelity = float(abs(result.post_state_coefficients[u]) ** 2)
        if abs(fidelity - 1.0) > 1e-12:
            raise InvariantViolationError("exact-phase collapse", f"fidelity {fidelity!r}")


def check_good_set_bounds(rng: np.random.Generator, instances: int = 1000) -> None:
    for _ in range(instances):
        b = int(rng.integers(4, 9))
        size = int(rng.integers(1, 17))
        instance = random_instance(size, rng)
        distribution = outcome_distribution(instance, b)
        target = int(rng.integers(size))
        weight = float(instance.weights[target])
        for window in range(1, 11):
            measured = good_set_probability(distribution, float(instance.phases[target]), window)
            bound = good_set_probability_bound(weight, window)
            if measured < bound - 1e-12:
                raise InvariantViolationError(
                    "good-set bound", f"b={b} window={window}: Pr(G)={measured:.6f} < {bound:.6f}"
                )


def check_choose_b_table(rng: Optional[np.random.Generator] = None) -> None:
    for n in range(1, 17):
        for eps in (0.01, 0.1, 0.25, 0.5):
            expected = n + math.ceil(math.log2(1.0 + 1.0 / (2.0 * eps)))
            got = choose_b(n, eps)
            if got != expected:
                raise InvariantViolationError("choose_b table", f"n={n} eps={eps}: {got} != {expected}")


def check_failure_inequality(rng: Optional[np.random.Generator] = None) -> None:
    potentials = [PotentialSpec(), PotentialSpec(kind="quadratic", strength=100.0)]
    for potential in potentials:
        coarse = {n0: eigensolve(discretize(potential, build_grid(n0)), 3) for n0 in FAILURE_GRID_N0}
        points: Dict[int, List[Tuple[int, int]]] = {}
        for n0 in FAILURE_GRID_N0:
            for s in FAILURE_GRID_S:
                points.setdefault(n0 << s, []).append((n0, s))
        # one fine basis per N, shared by every (N0, s) that lands on it
        for n in sorted(points):
            basis = eigenbasis(discretize(potential, build_grid(n)))
            for n0, s in points[n]:
                for k in range(3):
                    report = overlap_analysis(basis, k, replicate(coarse[n0][k].state(), s))
                    try:
                        report.check_invariants()
                    except InvariantViolationError as e:
                        raise e.add_context(potential=potential.label, N0=n0, s=s, k=k)



def check_discretization_oracle(rng: Optional[np.random.Generator] = None) -> None:
    potential = PotentialSpec()
    for n in (8, 64, 512):
        grid = build_grid(n)
        count = min(n, 4)
        pairs = eigensolve(discretize(potential, grid), count)
        expected = analytic_eigenvalues(grid, count)
        for pair, lam in zip(pairs, expected):
            rel = abs(pair.value - lam) / lam
            if rel > 1e-10:
                raise InvariantViolationError("discretization oracle", f"N={n} k={pair.index}: rel err {rel:.3e}")
            sampled = sample_eigenfunction(analytic_eigenfunction(potential, pair.index), grid).state
            fidelity = abs(np.dot(sampled.amplitudes.real, pair.vector))
            if fidelity < 1 - 1e-10:
                raise InvariantViolationError("discretization oracle", f"N={n} k={pair.index}: fidelity {fidelity!r}")


CHECKS: List[Callable] = [
    check_kernel_completeness,
    check_oracle_equivalence,
    check_exact_phases,
    check_good_set_bounds,
    check_choose_b_table,
    check_failure_inequality,
    check_discretization_oracle,
]


def run_all_checks(seed: int, stop_on_failure: bool = False) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    results = []
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        start = time.perf_counter()
        try:
            check(rng)
        except InvariantViolationError as e:
            logger.error("check %s failed: %s", name, e)
            results.append(CheckResult(name, False, time.perf_counter() - start, str(e)))
            if stop_on_failure:
                break
            continue
        results.append(CheckResult(name, True, time.perf_counter() - start))
        logger.info("check %s passed", name)
    return results
