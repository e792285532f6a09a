"""Unit tests for coarse-to-fine replication and the overlap analysis."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import InvalidArgumentError
from models.config import PotentialSpec
from services.grid_operator import (
    analytic_eigenfunction,
    build_grid,
    discretize,
    eigenbasis,
    eigensolve,
)
from services.state_prep import (
    failure_scaling_fit,
    overlap_analysis,
    perturbed_coarse_input,
    replicate,
    replication_error_terms,
)
from services.statevector import StateVector


def _problem(potential, n):
    return eigenbasis(discretize(potential, build_grid(n)))


def _coarse(potential, n0, count=3):
    return eigensolve(discretize(potential, build_grid(n0)), count)


class TestReplicate:
    def test_s_zero_is_identity(self):
        v = StateVector(np.array([0.6, 0.8]))
        assert replicate(v, 0) is v

    def test_single_hadamard(self):
        out = replicate(StateVector(np.array([1.0, 0.0])), 1)
        r = 1 / math.sqrt(2)
        np.testing.assert_allclose(out.amplitudes, [r, r, 0, 0])

    def test_two_hadamards(self):
        out = replicate(StateVector(np.array([0.6, 0.8])), 2)
        np.testing.assert_allclose(out.amplitudes, [0.3] * 4 + [0.4] * 4)

    @pytest.mark.parametrize("s", [-1, 1.5])
    def test_bad_s(self, s):
        with pytest.raises(InvalidArgumentError):
            replicate(StateVector(np.array([1.0])), s)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 16), st.integers(0, 10), st.integers(0, 2 ** 32 - 1))
    def test_norm_and_locality(self, dim, s, seed):
        gen = np.random.default_rng(seed)
        v = StateVector.from_unnormalized(gen.standard_normal(dim) + 1j * gen.standard_normal(dim))
        out = replicate(v, s)
        assert out.dimension == dim << s
        assert abs(out.norm - 1.0) <= 1e-14
        blocks = out.amplitudes.reshape(dim, 1 << s)
        np.testing.assert_array_equal(blocks, blocks[:, :1].repeat(1 << s, axis=1))
        np.testing.assert_allclose(blocks[:, 0] * math.sqrt(1 << s), v.amplitudes, rtol=1e-14)


class TestOverlapAnalysis:
    def test_exact_eigenvector(self, quadratic_well):
        basis = _problem(quadratic_well, 32)
        report = overlap_analysis(basis, 1, basis.pair(1).state())
        assert report.success_probability == pytest.approx(1.0, abs=1e-12)
        assert report.error_norm <= 1e-12
        report.check_invariants()

    def test_orthogonal_input(self, quadratic_well):
        basis = _problem(quadratic_well, 32)
        report = overlap_analysis(basis, 0, basis.pair(3).state())
        assert report.success_probability < 1e-20
        assert report.failure == pytest.approx(1.0)

    def test_global_phase_does_not_count_as_error(self, zero_potential):
        basis = _problem(zero_potential, 16)
        rotated = StateVector(1j * basis.pair(0).vector)
        report = overlap_analysis(basis, 0, rotated)
        assert report.error_norm <= 1e-12

    def test_zero_potential_against_dense_solver(self, zero_potential):
        basis = _problem(zero_potential, 64)
        prepared = replicate(_coarse(zero_potential, 8)[0].state(), 3)
        report = overlap_analysis(basis, 0, prepared)
        assert report.success_probability == pytest.approx(report.complement_success, abs=1e-10)
        _, vectors = np.linalg.eigh(discretize(zero_potential, build_grid(64)).to_dense())
        dense = abs(np.dot(vectors[:, 0], prepared.amplitudes.real)) ** 2
        assert report.success_probability == pytest.approx(dense, abs=1e-10)
        assert 0.95 < report.success_probability < 1.0

    @pytest.mark.parametrize("potential", [PotentialSpec(), PotentialSpec(kind="quadratic", strength=100.0)])
    @pytest.mark.parametrize("n0", [8, 16])
    def test_failure_inequality(self, potential, n0):
        coarse = _coarse(potential, n0)
        for s in range(4):
            basis = _problem(potential, n0 << s)
            for k in range(3):
                report = overlap_analysis(basis, k, replicate(coarse[k].state(), s))
                report.check_invariants()
                assert report.failure <= report.error_norm ** 2 + 1e-12

    @pytest.mark.slow
    @pytest.mark.parametrize("potential", [PotentialSpec(), PotentialSpec(kind="quadratic", strength=100.0)])
    def test_failure_inequality_full_grid(self, potential):
        coarse = {n0: _coarse(potential, n0) for n0 in (8, 16, 32, 64, 128)}
        by_fine_size = {}
        for n0 in coarse:
            for s in range(6):
                by_fine_size.setdefault(n0 << s, []).append((n0, s))
        gaps = []
        for n, points in sorted(by_fine_size.items()):
            basis = _problem(potential, n)
            for n0, s in points:
                for k in range(3):
                    report = overlap_analysis(basis, k, replicate(coarse[n0][k].state(), s))
                    gaps.append(report.failure - report.error_norm ** 2)
        assert len(gaps) == 5 * 6 * 3
        assert max(gaps) <= 1e-12

    def test_refining_the_coarse_grid_helps(self, zero_potential):
        n = 1024
        basis = _problem(zero_potential, n)
        failures = []
        for n0 in (8, 16, 32, 64, 128):
            s = int(math.log2(n // n0))
            report = overlap_analysis(basis, 0, replicate(_coarse(zero_potential, n0, 1)[0].state(), s))
            failures.append(report.failure)
        assert all(a > b for a, b in zip(failures, failures[1:]))

    def test_s_zero_is_plain_projection(self, quadratic_well, rng):
        basis = _problem(quadratic_well, 16)
        v = StateVector.from_unnormalized(rng.standard_normal(16))
        report = overlap_analysis(basis, 2, replicate(v, 0))
        expected = abs(np.dot(basis.pair(2).vector, v.amplitudes.real)) ** 2
        assert report.success_probability == pytest.approx(expected, abs=1e-12)

    def test_incomplete_basis_rejected(self, zero_potential):
        pairs = _coarse(zero_potential, 16, count=4)
        with pytest.raises(InvalidArgumentError, match="complete basis"):
            overlap_analysis(pairs, 0, pairs[0].state())

    def test_dimension_mismatch(self, zero_potential):
        basis = _problem(zero_potential, 16)
        with pytest.raises(InvalidArgumentError, match="length 8"):
            overlap_analysis(basis, 0, _coarse(zero_potential, 8)[0].state())

    def test_record(self, zero_potential):
        basis = _problem(zero_potential, 32)
        report = overlap_analysis(basis, 0, replicate(_coarse(zero_potential, 16)[0].state(), 1))
        record = report.to_record(16, 1)
        assert (record.N, record.N0, record.s, record.k) == (32, 16, 1, 0)
        assert record.failure == pytest.approx(1 - record.success_probability)


class TestPerturbedInput:
    def test_zero_noise(self, zero_potential):
        coarse = _coarse(zero_potential, 16)[0]
        np.testing.assert_array_equal(perturbed_coarse_input(coarse, 0.0, 1).amplitudes.real, coarse.vector)

    def test_distance_and_determinism(self, zero_potential):
        coarse = _coarse(zero_potential, 16)[0]
        a = perturbed_coarse_input(coarse, 0.3, 7)
        b = perturbed_coarse_input(coarse, 0.3, 7)
        c = perturbed_coarse_input(coarse, 0.3, 8)
        assert a.distance(coarse.state()) == pytest.approx(0.3, abs=1e-12)
        np.testing.assert_array_equal(a.amplitudes, b.amplitudes)
        assert not np.array_equal(a.amplitudes, c.amplitudes)

    def test_success_degrades_gracefully(self, zero_potential):
        coarse = _coarse(zero_potential, 16)[0]
        basis = _problem(zero_potential, 128)
        clean = overlap_analysis(basis, 0, replicate(coarse.state(), 3)).success_probability
        noisy = overlap_analysis(basis, 0, replicate(perturbed_coarse_input(coarse, 0.01, 3), 3))
        assert abs(clean - noisy.success_probability) <= 3 * 0.01

    @pytest.mark.parametrize("noise", [-0.1, 1.0])
    def test_bad_noise(self, zero_potential, noise):
        with pytest.raises(InvalidArgumentError):
            perturbed_coarse_input(_coarse(zero_potential, 8)[0], noise, 1)


class TestFailureScalingFit:
    def test_inverse_square(self):
        fit = failure_scaling_fit([(n, 3.0 / n ** 2) for n in (8, 16, 32, 64)])
        assert fit.slope == pytest.approx(-2.0, abs=1e-9)
        assert fit.points_used == 4

    def test_inverse_linear(self):
        fit = failure_scaling_fit([(n, 0.5 / n) for n in (8, 16, 32)])
        assert fit.slope == pytest.approx(-1.0, abs=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.5, 3.0), st.floats(0.01, 10.0))
    def test_recovers_power_law(self, p, c):
        fit = failure_scaling_fit([(n, c * n ** -p) for n in (8, 16, 32, 64, 128)])
        assert fit.slope == pytest.approx(-p, abs=1e-9)

    def test_zero_failures_excluded(self, caplog):
        samples = [(8, 1e-2), (16, 2.5e-3), (32, 6.25e-4), (64, 0.0)]
        fit = failure_scaling_fit(samples)
        assert fit.excluded == (64,)
        assert fit.points_used == 3
        assert "excluded" in caplog.text

    def test_too_few_points(self):
        with pytest.raises(InvalidArgumentError, match=">= 3"):
            failure_scaling_fit([(8, 1e-2), (16, 0.0), (32, 1e-3)])

    def test_duplicate_sizes(self):
        with pytest.raises(InvalidArgumentError, match="distinct"):
            failure_scaling_fit([(8, 1e-2), (8, 2e-2), (16, 1e-3)])


class TestReplicationErrorTerms:
    def test_zero_potential_terms(self, zero_potential):
        n0, s = 16, 3
        coarse = _coarse(zero_potential, n0)[0]
        basis = _problem(zero_potential, n0 << s)
        terms = replication_error_terms(analytic_eigenfunction(zero_potential, 0), coarse, basis.pair(0), s)
        assert terms.fine_discretization <= 1e-10
        assert terms.coarse_discretization <= 1e-10
        assert terms.replication > 0
        report = overlap_analysis(basis, 0, replicate(coarse.state(), s))
        assert report.error_norm <= terms.total + 1e-12

    def test_size_mismatch(self, zero_potential):
        coarse = _coarse(zero_potential, 8)[0]
        fine = _coarse(zero_potential, 32)[0]
        with pytest.raises(InvalidArgumentError):
            replication_error_terms(analytic_eigenfunction(zero_potential, 0), coarse, fine, 1)
