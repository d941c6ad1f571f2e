import time

import numpy as np
import pytest
from scipy.linalg import expm

from memno_lab.errors import ConfigError, IllPosedEvolutionError, ZeroEnergyError
from memno_lab.modules import mori_zwanzig as mz
from memno_lab.types import FourierSymbol, SpectralField

A0 = (1.0, 1.0)


class TestMixingOperator:
    """Tridiagonal truncation of the mixing operator."""

    def test_small_matrix(self):
        op = mz.build_mixing_operator(2.0, 3)
        expected = [
            [0, 4, 0, 0],
            [2, -1, 2, 0],
            [0, 2, -4, 2],
            [0, 0, 2, -9],
        ]
        np.testing.assert_array_equal(op.matrix, expected)
        assert op.sign == mz.DIFFUSIVE

    def test_anti_diffusive_diagonal(self):
        op = mz.build_mixing_operator(1.0, 2, sign=mz.ANTI_DIFFUSIVE)
        np.testing.assert_array_equal(np.diag(op.matrix), [0, 1, 4])

    @pytest.mark.parametrize("B, N, sign", [(-1.0, 3, -1), (1.0, 0, -1), (1.0, 3, 0)])
    def test_rejections(self, B, N, sign):
        with pytest.raises(ConfigError):
            mz.build_mixing_operator(B, N, sign)

    def test_dominant_eigenvalue_grows_with_B(self):
        assert mz.dominant_eigenvalue(mz.build_mixing_operator(0.0, 16)) == pytest.approx(0.0, abs=1e-12)
        assert mz.dominant_eigenvalue(mz.build_mixing_operator(20.0, 64)) >= 34

    def test_toeplitz_reference(self):
        assert mz.toeplitz_reference(1.0, 0) == pytest.approx(0.0, abs=1e-15)
        assert mz.toeplitz_reference(3.0, 4) == pytest.approx(6 * np.cos(np.pi / 6))

    def test_series_expm_matches_scipy(self, rng):
        A = rng.standard_normal((4, 4)) * 3
        np.testing.assert_allclose(mz.series_expm(A), expm(A), rtol=1e-10)


class TestEvolutions:
    """Memoryless and memory-augmented evolutions of the observed pair."""

    @pytest.mark.parametrize("sign", [mz.DIFFUSIVE, mz.ANTI_DIFFUSIVE])
    def test_closed_form(self, sign):
        B, t = 1.7, 0.6
        expected = expm(t * np.array([[0.0, 2 * B], [B, float(sign)]]))
        np.testing.assert_allclose(mz.markovian_closed_form(B, t, sign), expected, rtol=1e-12)

    def test_no_mixing(self):
        out = mz.markovian_evolve(0.0, A0, 2.0)
        np.testing.assert_allclose(out, [1.0, np.exp(-2.0)], rtol=1e-12)

    def test_negative_time(self):
        with pytest.raises(ConfigError):
            mz.markovian_evolve(1.0, A0, -0.1)

    def test_memory_pair(self):
        u2 = mz.memory_evolve_projection(5.0, A0, 0.5)
        np.testing.assert_allclose(u2, [50.6323497, 39.4835393], rtol=1e-6)

    def test_memory_exceeds_markovian(self):
        u1 = mz.markovian_evolve(5.0, A0, 0.5)
        u2 = mz.memory_evolve_projection(5.0, A0, 0.5)
        assert np.all(u2 > u1)

    def test_truncation_converged(self):
        assert mz.truncation_refinement(10.0, A0, 1.0) <= 1e-8

    def test_quadrature_agrees_with_projection(self):
        projection = mz.memory_evolve_projection(10.0, A0, 1.0)
        quadrature = mz.memory_evolve_quadrature(10.0, A0, 1.0)
        assert np.max(np.abs(projection - quadrature)) / np.max(np.abs(projection)) <= 1e-6

    def test_quadrature_edges(self):
        np.testing.assert_array_equal(mz.memory_evolve_quadrature(3.0, (0.2, 0.7), 0.0), [0.2, 0.7])
        with pytest.raises(ConfigError):
            mz.memory_evolve_quadrature(3.0, A0, 1.0, quad_steps=8)

    def test_anti_diffusive_truncation_overflows(self):
        with pytest.raises(IllPosedEvolutionError):
            mz.full_evolve(1.0, A0, 1.0, n_oracle=64, sign=mz.ANTI_DIFFUSIVE)

    def test_cross_oracle_suite(self):
        rows = mz.cross_oracle_suite([2.0], [0.5], seed=1, cases_per_pair=2, n_oracle=32, quad_steps=128)
        assert len(rows) == 2
        assert all(row["rel_deviation"] <= 1e-6 for row in rows)
        assert all(0.1 <= row["a0_0"] <= 1.0 for row in rows)

    def test_cross_oracle_grid(self):
        started = time.perf_counter()
        rows = mz.cross_oracle_suite([2.0, 5.0, 10.0], [0.25, 0.5, 1.0], seed=0, cases_per_pair=3)
        elapsed = time.perf_counter() - started
        assert len(rows) == 27
        assert {(row["B"], row["t"]) for row in rows} == {
            (B, t) for B in (2.0, 5.0, 10.0) for t in (0.25, 0.5, 1.0)
        }
        assert max(row["rel_deviation"] for row in rows) <= 1e-6
        assert elapsed < 10.0


class TestTheoremReport:
    """Gap between the memoryless and memory-augmented pairs."""

    def test_gap_values(self):
        report = mz.theorem_gap_report(5.0, A0, [0.25, 0.5, 1.0])
        np.testing.assert_allclose(report.norm_gap, [1.60, 24.5, 2135], rtol=2e-2)
        np.testing.assert_allclose(report.r1, [0.166, 0.245, 0.395], rtol=2e-2)
        assert report.passed

    @pytest.mark.parametrize("B", [2.0, 10.0, 20.0])
    def test_flags_hold(self, B):
        report = mz.theorem_gap_report(B, A0, [0.25, 0.5, 1.0])
        assert report.passed
        assert np.all(np.diff(report.r1) > 0)
        assert np.all(report.norm_gap >= report.floor)

    def test_no_mixing(self):
        report = mz.theorem_gap_report(0.0, A0, [0.5, 1.0])
        assert np.all(report.r1 == 0) and np.all(report.r2 == 0)
        assert report.norm_gap.max() <= 1e-12
        assert report.passed

    def test_floor_constant(self):
        report = mz.theorem_gap_report(5.0, A0, [0.25], floor_c1=1.0)
        assert not report.passed

    def test_nonpositive_times_dropped(self):
        report = mz.theorem_gap_report(2.0, A0, [0.0, -1.0, 0.5])
        np.testing.assert_array_equal(report.times, [0.5])

    @pytest.mark.parametrize("a0", [(0.0, 1.0), (1.0, -1.0), (1.0, 1.0, 1.0)])
    def test_rejects_a0(self, a0):
        with pytest.raises(ConfigError):
            mz.theorem_gap_report(2.0, a0, [0.5])

    def test_l2_norm_weights(self):
        euclid = mz.theorem_gap_report(2.0, A0, [0.5])
        l2 = mz.theorem_gap_report(2.0, A0, [0.5], norm="l2")
        assert l2.norm_gap[0] >= np.sqrt(2 * np.pi) * euclid.norm_gap[0]
        assert l2.norm_gap[0] <= np.sqrt(4 * np.pi) * euclid.norm_gap[0]
        with pytest.raises(ConfigError):
            mz.coefficient_norm(np.ones(2), "sup")

    def test_floors(self):
        assert mz.explicit_floor(1.0, 1.0, A0) == pytest.approx(np.sqrt(2) / 100 * np.exp(np.sqrt(2)))
        x = np.sqrt(2)
        assert mz.proof_bound(1.0, 1.0, A0) == pytest.approx(np.exp(x) * (x + 10 * x - 1) / 100)

    def test_report_rows(self):
        rows = mz.theorem_gap_report(2.0, A0, [0.5, 1.0]).report_rows()
        assert len(rows) == 2
        assert {"r1", "r2", "floor", "proof_bound"} <= set(rows[0])


class TestLemmas:
    """Closed-form matrix exponentials and their growth bounds."""

    def test_scan_b_min(self):
        grid = [1.0, 2.0, 3.0, 4.0]
        assert mz.scan_b_min(lambda b: b >= 3, grid) == 3.0
        assert mz.scan_b_min(lambda b: False, grid) is None
        assert mz.scan_b_min(lambda b: b != 4, grid) is None

    @pytest.mark.parametrize("B", [5.0, 10.0, 20.0])
    @pytest.mark.parametrize("t", [0.25, 0.5, 1.0])
    def test_l1(self, B, t):
        report = mz.lemma_l1_check(B, t)
        assert report.max_rel_diff <= mz.CLOSED_FORM_TOL
        assert report.entries_ok.all()
        assert report.passed

    def test_l1_rejections(self):
        with pytest.raises(ConfigError):
            mz.lemma_l1_check(0.0, 1.0)
        with pytest.raises(ConfigError):
            mz.lemma_l1_check(1.0, 0.0)

    @pytest.mark.parametrize("B", [0.05, 0.5, 2.0, 8.0])
    def test_l2_closed_form(self, B):
        matrix = np.array([[0.0, B, 0.0], [B, 0.0, B], [0.0, B, 0.0]])
        np.testing.assert_allclose(mz.lemma_l2_closed_form(B), expm(matrix), rtol=1e-10)

    def test_l2_threshold(self):
        report = mz.lemma_l2_check(2.0)
        assert report.b_min == pytest.approx(0.71, abs=0.02)
        assert report.entries_ok.all()
        assert report.passed

    @pytest.mark.parametrize("B", [1.0, 3.0, 10.0])
    def test_l2_above_threshold(self, B):
        report = mz.lemma_l2_check(B)
        assert report.max_rel_diff <= mz.CLOSED_FORM_TOL
        assert report.entries_ok.all()
        assert report.passed

    @pytest.mark.parametrize("B", [0.3, 0.5])
    def test_l2_below_threshold(self, B):
        report = mz.lemma_l2_check(B)
        assert B < report.b_min
        assert not report.entries_ok[0, 2]
        assert report.entries_ok[1, 1]
        assert report.passed

    def test_l2_rejects_zero(self):
        with pytest.raises(ConfigError):
            mz.lemma_l2_check(0.0)


class TestDiscreteGle:
    """Block GLE of an aliased linear PDE against the aliasing oracle."""

    def test_single_case(self, rng):
        symbol = FourierSymbol.diffusion(1.0, 6)
        g = mz.random_real_field(rng, 6)
        system = mz.build_discrete_gle(symbol, g, 4, 6)
        assert system.a11.shape == (5, 5)
        assert system.a22.shape == (13, 13)
        solution = mz.gle_solve(system, symbol, g, 0.2)
        assert solution.max_rel_deviation <= 1e-6

    def test_suite(self):
        rows = mz.gle_suite(seed=3, n_cases=8)
        assert len(rows) == 8
        assert {row["f"] for row in rows} == {4, 8}
        assert all(row["rel_deviation"] <= 1e-6 for row in rows)

    def test_band_limited(self):
        rows = mz.gle_suite(seed=5, n_cases=6, band_limited=True)
        for row in rows:
            assert row["abs_beta0"] <= 1e-12
            assert row["eta0_abs"] <= 1e-12
            assert row["rel_deviation"] <= 1e-6

    def test_eta_curve_starts_at_eta0(self, rng):
        symbol = FourierSymbol.drift_diffusion(0.5, 1.0, 9)
        g = mz.random_real_field(rng, 9)
        system = mz.build_discrete_gle(symbol, g, 8, 9)
        curve = mz.eta_curve(symbol, g, 8, 9, [0.0, 0.1])
        assert curve[0] == pytest.approx(system.eta0, abs=1e-12)
        assert curve.shape == (2,)

    def test_band_below_observed(self, rng):
        with pytest.raises(ConfigError):
            mz.build_discrete_gle(FourierSymbol.diffusion(1.0, 4), mz.random_real_field(rng, 1), 8, 3)

    def test_field_beyond_band(self, rng):
        with pytest.raises(ConfigError):
            mz.build_discrete_gle(FourierSymbol.diffusion(1.0, 4), mz.random_real_field(rng, 6), 4, 4)

    def test_invisible_initial_field(self):
        g = SpectralField.from_modes({3: 1.0, -1: -1.0, -3: 1.0, 1: -1.0})
        with pytest.raises(ZeroEnergyError):
            mz.build_discrete_gle(FourierSymbol.diffusion(1.0, 3), g, 4, 3)

    def test_random_real_field(self, rng):
        g = mz.random_real_field(rng, 5, support=2)
        assert g.is_real
        assert g.band == 5
        assert np.all(g.coeffs[np.abs(g.modes) > 2] == 0)
