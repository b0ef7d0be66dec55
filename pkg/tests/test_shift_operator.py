import numpy as np
import pytest

import shift_operator
from conftest import make_pair
from errors import DomainError
from sequences import ZERO, ExtendedReal
from shift_operator import (BoundednessVerdict, apply_forward_coeffs, apply_shift_coeffs, band_limit,
                            band_series_converges, boundedness_report, build_matrix,
                            compactness_check, decompose)
from space import TridiagonalSpace, forward_substitution


@pytest.fixture
def alternating_pair():
    """a_n = 1, b_n = (-1)ⁿ/2: |c_n| = 1 and |b_n/a_{n+1}| = 1/2"""
    return make_pair(a=(1.0, 1.0, 0.0), b=(0.5, -1.0, 0.0))


@pytest.fixture
def band_series_pair():
    """a_n = b_n = (n+1)²: limsup |b_n/a_{n+1}| = 1 with c_n = 0"""
    return make_pair(a=(1.0, 1.0, 2.0), b=(1.0, 1.0, 2.0))


class TestMatrix:
    def test_constant_space_entries(self, constant_space):
        matrix = build_matrix(constant_space, 8)
        expected = 0.5 * (-0.5) ** np.arange(8)
        np.testing.assert_allclose(matrix.column(0), expected, rtol=0, atol=1e-12)
        np.testing.assert_allclose(np.diagonal(matrix.entries, 1), np.ones(7), rtol=0, atol=1e-12)
        # c_n = 0 leaves every other column with its superdiagonal entry only
        np.testing.assert_allclose(np.tril(matrix.entries)[:, 1:], 0.0, atol=1e-12)

    def test_lower_hessenberg(self, random_pairs):
        for pair in random_pairs[:3]:
            entries = build_matrix(TridiagonalSpace(pair), 32).entries
            assert np.all(np.triu(entries, 2) == 0)

    def test_weights_are_ratios(self, linear_space):
        entries = build_matrix(linear_space, 10).entries
        np.testing.assert_allclose(np.diagonal(entries, 1), np.arange(2, 11) / np.arange(1, 10))

    def test_matrix_acts_as_backward_shift(self, linear_space, rng):
        N = 40
        x = np.zeros(N, dtype=complex)
        x[:12] = rng.normal(size=12) + 1j * rng.normal(size=12)
        a = linear_space.pair.a.terms(13)
        b = linear_space.pair.b.terms(13)
        coeffs = np.zeros(13, dtype=complex)
        coeffs[:12] += x[:12] * a[:12]
        coeffs[1:] += x[:12] * b[:12]
        shifted = np.zeros(N, dtype=complex)
        shifted[:12] = coeffs[1:]
        expected = forward_substitution(linear_space.pair, shifted)
        image = build_matrix(linear_space, N).entries @ x
        np.testing.assert_allclose(image, expected, rtol=1e-10, atol=1e-13)

    @pytest.mark.parametrize("N", [1, 5000])
    def test_dimension_limits(self, constant_space, N):
        with pytest.raises(DomainError):
            build_matrix(constant_space, N)

    def test_csv_cells(self, constant_space):
        rows = build_matrix(constant_space, 3).to_csv_rows()
        cells = [[tuple(float(part) for part in cell.split(",")) for cell in row] for row in rows]
        assert cells[0] == [(0.5, 0.0), (1.0, 0.0), (0.0, 0.0)]
        assert cells[1][0] == (-0.25, 0.0)

    def test_to_dict(self, constant_space):
        data = build_matrix(constant_space, 2).to_dict()
        assert data['N'] == 2
        assert data['entries'][0][1] == [1.0, 0.0]


class TestCoefficientShifts:
    def test_backward_after_forward_is_identity(self, rng):
        coeffs = rng.normal(size=6) + 1j * rng.normal(size=6)
        np.testing.assert_array_equal(apply_shift_coeffs(apply_forward_coeffs(coeffs)), coeffs)

    def test_backward_drops_constant(self):
        np.testing.assert_array_equal(apply_shift_coeffs([3.0, 1.0, 2.0]), [1.0, 2.0])


class TestBoundedness:
    def test_strong(self, constant_pair):
        report = boundedness_report(constant_pair)
        assert report.verdict is BoundednessVerdict.BOUNDED
        assert report.label() == "bounded[strong]"
        assert report.strong_ok and report.necessary_ok and report.sufficient_ok
        assert report.tridiag_limsup == ExtendedReal.finite(0.5)

    def test_necessary_violated(self, unbounded_pair):
        report = boundedness_report(unbounded_pair)
        assert not report.bounded
        assert report.label() == "not_proven_bounded[necessary-violated]"

    def test_boundary_band_series_diverges(self):
        pair = make_pair(a=(1.0, 1.0, 0.0), b=(1.0, 1.0, 0.0))
        report = boundedness_report(pair)
        assert report.necessary_ok
        assert not band_series_converges(pair)
        assert report.label() == "not_proven_bounded[band-series-diverges]"

    def test_boundary_band_series_converges(self, band_series_pair):
        report = boundedness_report(band_series_pair)
        assert report.label() == "bounded[band-series]"
        assert not report.strong_ok

    def test_partial_sums_are_advisory(self, constant_pair):
        report = boundedness_report(constant_pair, horizon=32)
        assert len(report.band_partial_sums) == 31
        assert np.all(np.diff(report.band_partial_sums) >= 0)
        assert report.to_dict()['verdict'] == "bounded[strong]"

    def test_strong_implies_sufficient(self, rng):
        strong_seen = 0
        for _ in range(100):
            a_base = rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            b_base = rng.uniform(0.2, 2.0) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            pair = make_pair(a=(complex(*rng.uniform(0.5, 2.0, 2)), a_base, float(rng.uniform(-2.0, 2.0))),
                             b=(complex(*rng.uniform(0.5, 2.0, 2)), b_base, float(rng.uniform(-2.0, 2.0))))
            report = boundedness_report(pair, horizon=16)
            if report.strong_ok:
                strong_seen += 1
                assert report.sufficient_ok
                assert report.label() == "bounded[strong]"
            if report.sufficient_ok:
                assert report.necessary_ok
        assert strong_seen > 0

    def test_horizon_too_small(self, constant_pair):
        with pytest.raises(DomainError):
            boundedness_report(constant_pair, horizon=4)


class TestDecomposition:
    @pytest.mark.parametrize("N", [8, 32])
    def test_full_band_count_is_exact(self, linear_space, N):
        decomposition = decompose(linear_space, N, N - 1)
        assert decomposition.residual == pytest.approx(0.0, abs=1e-14)
        assert decomposition.dropped_max == 0.0
        np.testing.assert_allclose(decomposition.reconstruct(), build_matrix(linear_space, N).entries,
                                   rtol=1e-14, atol=1e-15)

    def test_covered_columns_and_dropped_entries(self, constant_space):
        decomposition = decompose(constant_space, 16, 3)
        assert decomposition.residual == 0.0
        assert decomposition.first_covered_column == 12
        assert decomposition.dropped_max == pytest.approx(1.0 / 32.0)

    def test_corrupted_matrix_shows_in_residual(self, linear_space, monkeypatch):
        original = shift_operator.matrix_entries

        def corrupted(pair, N):
            entries = original(pair, N)
            entries[5, 2] += 1.0
            entries[3, 4] += 7.0
            return entries

        monkeypatch.setattr(shift_operator, "matrix_entries", corrupted)
        decomposition = decompose(linear_space, 16, 15)
        assert decomposition.residual == pytest.approx(7.0)
        np.testing.assert_allclose(decomposition.weights, np.arange(2, 17) / np.arange(1, 16))

    def test_band_norm_is_largest_singular_value(self, bergman_pair):
        N = 24
        decomposition = decompose(TridiagonalSpace(bergman_pair), N, 5)
        for m in range(1, 6):
            band = decomposition.band_matrix(m)
            assert band.shape == (N, N)
            largest = np.linalg.svd(band, compute_uv=False)[0]
            assert largest == pytest.approx(decomposition.band_max[m - 1], rel=1e-12)
            assert decomposition.band_norms[m - 1] >= ExtendedReal.finite(largest * (1 - 1e-12))

    def test_band_norms(self, alternating_pair):
        decomposition = decompose(TridiagonalSpace(alternating_pair), 24, 4)
        for m in range(1, 5):
            assert band_limit(alternating_pair, m).value == pytest.approx(0.5 ** m)
            assert decomposition.band_max[m - 1] == pytest.approx(0.5 ** m)
            assert decomposition.band_norms[m - 1].value == pytest.approx(0.5 ** m)

    def test_band_limit_vanishes_when_c_does(self, linear_pair, constant_pair):
        assert band_limit(linear_pair, 3) == ZERO
        assert band_limit(constant_pair, 2) == ZERO

    @pytest.mark.parametrize("M", [0, 8])
    def test_band_count_range(self, constant_space, M):
        with pytest.raises(DomainError):
            decompose(constant_space, 8, M)


class TestCompactness:
    def test_certified_with_decay_index(self, linear_space):
        diagnostic = compactness_check(linear_space, N=128, tol=1e-8)
        assert diagnostic.certified
        assert diagnostic.decay_index is not None
        entries = np.tril(build_matrix(linear_space, 128).entries)
        assert np.max(np.abs(entries[diagnostic.decay_index:])) < 1e-8
        assert np.max(np.abs(entries[diagnostic.decay_index - 1])) >= 1e-8

    def test_not_certified_when_c_stays_large(self, alternating_pair):
        diagnostic = compactness_check(TridiagonalSpace(alternating_pair), N=32)
        assert not diagnostic.certified
        assert not diagnostic.c_limit_zero
        assert diagnostic.decay_index is None
