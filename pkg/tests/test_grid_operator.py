"""Unit tests for grid construction, the 3-point operator and its eigenpairs."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from errors import InvalidArgumentError
from models.config import PotentialSpec
from services import grid_operator
from services.grid_operator import (
    EigenBasis,
    analytic_eigenfunction,
    analytic_eigenvalues,
    build_grid,
    degenerate_pairs,
    discretize,
    eigenbasis,
    eigensolve,
    eigenvector_convergence,
    load_potential_csv,
    norm_deviation_fit,
    sample_eigenfunction,
)


class TestBuildGrid:
    """Interior grids of [0, 1]."""

    def test_three_points(self):
        grid = build_grid(3)
        assert grid.spacing == 0.25
        np.testing.assert_allclose(grid.points, [0.25, 0.5, 0.75])

    def test_fifteen_points(self):
        grid = build_grid(15)
        assert grid.spacing == pytest.approx(1 / 16)
        assert grid.points[0] == pytest.approx(1 / 16)
        assert grid.points[-1] == pytest.approx(15 / 16)

    @pytest.mark.parametrize("n", [0, 1, -4])
    def test_too_small(self, n):
        with pytest.raises(InvalidArgumentError):
            build_grid(n)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=2000))
    def test_uniform_strict_interior(self, n):
        grid = build_grid(n)
        x = grid.points
        assert x.size == n
        assert 0.0 < x[0] and x[-1] < 1.0
        np.testing.assert_allclose(np.diff(x), grid.spacing, rtol=0, atol=1e-14)


class TestDiscretize:
    """Diagonal 2/h^2 + V, off-diagonal -1/h^2."""

    def test_zero_potential_three_points(self, zero_potential):
        h = discretize(zero_potential, build_grid(3))
        np.testing.assert_array_equal(h.diagonal, [32.0, 32.0, 32.0])
        np.testing.assert_array_equal(h.off_diagonal, [-16.0, -16.0])

    def test_quadratic_with_zero_strength_matches_zero(self, zero_potential):
        grid = build_grid(17)
        a = discretize(zero_potential, grid)
        b = discretize(PotentialSpec(kind="quadratic", strength=0.0), grid)
        np.testing.assert_array_equal(a.to_dense(), b.to_dense())

    def test_quadratic_well_diagonal(self, quadratic_well):
        grid = build_grid(31)
        h = discretize(quadratic_well, grid)
        for j in range(31):
            x = (j + 1) / 32
            expected = 2 * 32 ** 2 + 100 * (x - 0.5) ** 2
            assert h.diagonal[j] == pytest.approx(expected, rel=1e-14)

    def test_dense_is_symmetric_tridiagonal(self, quadratic_well):
        dense = discretize(quadratic_well, build_grid(9)).to_dense()
        np.testing.assert_array_equal(dense, dense.T)
        assert np.count_nonzero(np.triu(dense, 2)) == 0

    def test_negative_values_rejected(self):
        values = np.ones(5)
        values[2] = -0.1
        with pytest.raises(InvalidArgumentError, match="negative potential"):
            discretize(values, build_grid(5))

    def test_caller_array_untouched(self):
        values = np.ones(4)
        discretize(values, build_grid(4))
        values[0] = 3.0  # still writable

    def test_tabulated_size_mismatch(self):
        spec = PotentialSpec(kind="tabulated", values=(0.0,) * 8)
        with pytest.raises(InvalidArgumentError, match="grid has N=16"):
            discretize(spec, build_grid(16))

    def test_negative_tabulated_spec_rejected(self):
        with pytest.raises(ValueError):
            PotentialSpec(kind="tabulated", values=(1.0, -1.0))


class TestEigensolve:
    """Ascending, normalized, sign-fixed eigenpairs."""

    def test_two_point_zero_potential(self, zero_potential):
        pairs = eigensolve(discretize(zero_potential, build_grid(2)), 2)
        assert pairs[0].value == pytest.approx(9.0, rel=1e-12)
        assert pairs[1].value == pytest.approx(27.0, rel=1e-12)

    @pytest.mark.parametrize("n", [8, 64, 512])
    def test_toeplitz_oracle(self, zero_potential, n):
        grid = build_grid(n)
        count = min(n, 6)
        pairs = eigensolve(discretize(zero_potential, grid), count)
        expected = analytic_eigenvalues(grid, count)
        for pair, lam in zip(pairs, expected):
            assert abs(pair.value - lam) / lam <= 1e-10
            sampled = sample_eigenfunction(analytic_eigenfunction(zero_potential, pair.index), grid)
            fidelity = abs(np.dot(sampled.state.amplitudes.real, pair.vector))
            assert fidelity >= 1 - 1e-10

    @pytest.mark.parametrize("potential", [PotentialSpec(), PotentialSpec(kind="quadratic", strength=100.0)])
    def test_matches_dense_solver(self, potential):
        h = discretize(potential, build_grid(48))
        expected_values, expected_vectors = np.linalg.eigh(h.to_dense())
        pairs = eigensolve(h, 48)
        np.testing.assert_allclose([p.value for p in pairs], expected_values, rtol=1e-10)
        for pair in pairs[:5]:
            overlap = abs(np.dot(expected_vectors[:, pair.index], pair.vector))
            assert overlap == pytest.approx(1.0, abs=1e-10)

    def test_pair_properties(self, quadratic_well):
        h = discretize(quadratic_well, build_grid(64))
        pairs = eigensolve(h, 10)
        values = [p.value for p in pairs]
        assert all(a < b for a, b in zip(values, values[1:]))
        assert all(v > 0 for v in values)
        for pair in pairs:
            assert np.linalg.norm(pair.vector) == pytest.approx(1.0, abs=1e-12)
            assert pair.residual(h) <= 1e-8 * pair.value
            magnitude = np.abs(pair.vector)
            first_peak = int(np.argmax(magnitude >= magnitude.max() * (1 - 1e-9)))
            assert pair.vector[first_peak] > 0

    def test_residual_checked_on_every_pair(self, zero_potential, monkeypatch, caplog):
        real = grid_operator.eigh_tridiagonal

        def shifted(*args, **kwargs):
            values, vectors = real(*args, **kwargs)
            values = values.copy()
            values[3] += 1.0
            return values, vectors

        h = discretize(zero_potential, build_grid(16))
        eigensolve(h, 8)
        assert "residual" not in caplog.text
        monkeypatch.setattr(grid_operator, "eigh_tridiagonal", shifted)
        eigensolve(h, 8)
        assert "worst eigenpair 3" in caplog.text

    def test_block_matvec_matches_columns(self, quadratic_well, rng):
        h = discretize(quadratic_well, build_grid(12))
        block = rng.standard_normal((12, 3))
        expected = np.column_stack([h.matvec(block[:, j]) for j in range(3)])
        np.testing.assert_allclose(h.matvec(block), expected, rtol=1e-14)

    def test_ground_state_matches_sampled_sine(self, zero_potential):
        grid = build_grid(64)
        pairs = eigensolve(discretize(zero_potential, grid), 2)
        for pair in pairs:
            v = sample_eigenfunction(analytic_eigenfunction(zero_potential, pair.index), grid).state.amplitudes.real
            if np.dot(v, pair.vector) < 0:
                v = -v
            assert np.linalg.norm(pair.vector - v) <= 1e-10

    def test_gershgorin_contains_spectrum(self, quadratic_well):
        h = discretize(quadratic_well, build_grid(64))
        lower, upper = h.gershgorin_bounds()
        basis = eigenbasis(h)
        assert lower <= basis.values.min()
        assert basis.values.max() <= upper

    @pytest.mark.parametrize("count", [0, 9])
    def test_bad_count(self, zero_potential, count):
        with pytest.raises(InvalidArgumentError):
            eigensolve(discretize(zero_potential, build_grid(8)), count)

    def test_complete_basis_is_orthonormal(self, quadratic_well):
        basis = eigenbasis(discretize(quadratic_well, build_grid(128)))
        basis.verify_orthonormal()
        assert basis.count == basis.dimension == 128

    def test_non_orthonormal_basis_names_pair(self):
        r = 1 / math.sqrt(2)
        basis = EigenBasis(values=np.array([1.0, 2.0]), vectors=np.array([[1.0, r], [0.0, r]]))
        with pytest.raises(InvalidArgumentError) as excinfo:
            basis.verify_orthonormal()
        assert excinfo.value.context["pair"] == (0, 1)


class TestConvergence:
    """Grid refinement behaviour of discrete eigenvectors and samples."""

    def test_quadratic_well_second_order(self, quadratic_well):
        study = eigenvector_convergence(quadratic_well, 0, [7, 15, 31, 63], reference_size=1023)
        assert study.order >= 1.7
        assert all(a > b for a, b in zip(study.errors, study.errors[1:]))

    def test_non_nested_reference_rejected(self, zero_potential):
        with pytest.raises(InvalidArgumentError, match="does not divide"):
            eigenvector_convergence(zero_potential, 0, [8], reference_size=1023)

    def test_norm_deviation_first_order(self, zero_potential):
        fit = norm_deviation_fit(analytic_eigenfunction(zero_potential, 0), [8, 16, 32, 64, 128, 256, 512, 1024])
        assert fit.slope == pytest.approx(-1.0, abs=0.05)

    def test_sampled_sine(self, zero_potential):
        sample = sample_eigenfunction(analytic_eigenfunction(zero_potential, 0), build_grid(3))
        expected = math.sqrt(2) * np.array([math.sin(math.pi / 4), 1.0, math.sin(3 * math.pi / 4)])
        np.testing.assert_allclose(sample.coordinates, expected, rtol=1e-14)

    def test_sampled_constant(self):
        sample = sample_eigenfunction(lambda x: 1.0, build_grid(4))
        assert sample.raw_norm == pytest.approx(2.0)
        np.testing.assert_allclose(sample.state.amplitudes, 0.5)

    def test_vanishing_function_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sample_eigenfunction(lambda x: 0.0 * x, build_grid(4))


class TestHelpers:
    def test_degenerate_pairs(self):
        assert degenerate_pairs([1.0, 1.0 + 1e-12, 2.0]) == [(0, 1)]
        assert degenerate_pairs([1.0, 2.0, 3.0]) == []

    def test_only_zero_potential_has_closed_form(self, quadratic_well):
        assert analytic_eigenfunction(quadratic_well, 0) is None


class TestLoadPotentialCsv:
    def test_round_trip_on_matching_grid(self, tmp_path):
        path = tmp_path / "well.csv"
        path.write_text("x,V\n0.25,1.0\n0.5,0.0\n0.75,1.0\n")
        spec = load_potential_csv(path)
        assert spec.kind == "tabulated"
        assert spec.label == f"file:{path}"
        h = discretize(spec, build_grid(3))
        np.testing.assert_allclose(h.diagonal, [33.0, 32.0, 33.0])

    def test_negative_value(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,V\n0.25,1.0\n0.5,-2.0\n0.75,1.0\n")
        with pytest.raises(InvalidArgumentError, match="non-negative"):
            load_potential_csv(path)

    def test_positions_must_match_grid(self, tmp_path):
        path = tmp_path / "shifted.csv"
        path.write_text("x,V\n0.1,1.0\n0.3,0.0\n0.5,1.0\n0.7,1.0\n")
        spec = load_potential_csv(path)
        with pytest.raises(InvalidArgumentError, match="positions do not match"):
            discretize(spec, build_grid(4))

    def test_missing_file(self, tmp_path):
        with pytest.raises(InvalidArgumentError):
            load_potential_csv(tmp_path / "absent.csv")
