import cmath
import math

import numpy as np
import pytest

from conftest import make_pair
from dynamics import (ChaosVerdict, DynamicsQuery, Verdict, classify, gethner_shapiro_witness, orbit,
                      periodic_vector, unconditional_series_check)
from errors import DomainError
from sequences import divergence_tests
from space import TridiagonalSpace, monomial_norm_sq


@pytest.fixture
def bergman_space(bergman_pair):
    return TridiagonalSpace(bergman_pair)


class TestDynamicsQuery:
    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            DynamicsQuery(0)

    def test_modulus(self):
        assert DynamicsQuery(3 + 4j).lambda_abs == pytest.approx(5.0)


class TestClassify:
    def test_bergman_backward_shift_is_mixing_not_chaotic(self, bergman_pair):
        report = classify(bergman_pair, 1.0)
        assert report.bounded
        assert report.hypercyclic.label() == "yes[hc-iff-sup]"
        assert report.mixing.label() == "yes[mix-iff-lim]"
        assert report.chaotic.label() == "no[chaos-iff-series]"
        assert report.mixing.verdict is Verdict.YES_IFF
        assert report.chaotic.verdict is ChaosVerdict.NO

    def test_linear_family_is_chaotic(self, linear_pair):
        report = classify(linear_pair, 1.0)
        assert report.chaotic.verdict is ChaosVerdict.YES
        assert report.hypercyclic_subspace.value is True

    @pytest.mark.parametrize("lambda_abs", [0.5 + 0.125 * k for k in range(13)])
    def test_constant_space_chaos_boundary(self, constant_pair, lambda_abs):
        report = classify(constant_pair, DynamicsQuery(lambda_abs))
        assert (report.chaotic.verdict is ChaosVerdict.YES) is (lambda_abs > 1.0)
        assert report.hypercyclic.is_yes is (lambda_abs > 1.0)
        assert report.mixing.is_yes is (lambda_abs > 1.0)

    def test_rotation_invariance(self, random_pairs, rng):
        for pair in random_pairs:
            lambda_abs = float(rng.uniform(0.5, 2.0))
            base = classify(pair, lambda_abs)
            for angle in rng.uniform(0.0, 2.0 * math.pi, 3):
                assert classify(pair, lambda_abs * cmath.exp(1j * angle)) == base

    def test_implication_chains(self, random_pairs, rng):
        for pair in random_pairs:
            for lambda_abs in rng.uniform(0.5, 2.0, 4):
                report = classify(pair, lambda_abs)
                if report.mixing.is_yes:
                    assert report.hypercyclic.is_yes
                if report.chaotic.verdict is ChaosVerdict.YES:
                    assert report.hypercyclic.is_yes
                if report.hypercyclic_subspace.value:
                    assert report.hypercyclic.is_yes
                if report.hypercyclic.is_no:
                    assert not report.mixing.is_yes

    def test_iff_verdicts_imply_diverging_kernel_diagonal(self, random_pairs, rng):
        seen = 0
        for pair in random_pairs:
            for lambda_abs in rng.uniform(0.5, 2.0, 4):
                report = classify(pair, lambda_abs)
                if Verdict.YES_IFF in (report.hypercyclic.verdict, report.mixing.verdict):
                    seen += 1
                    assert divergence_tests(pair, lambda_abs).sup_kernel_diag_infinite
        assert seen > 0

    def test_unbounded_operator_is_indeterminate(self, unbounded_pair):
        report = classify(unbounded_pair, 1.0)
        assert not report.bounded
        assert report.boundedness == "not_proven_bounded[necessary-violated]"
        for verdict in (report.hypercyclic, report.mixing, report.chaotic):
            assert verdict.label() == "indeterminate"

    def test_outside_iff_regime(self):
        # bounded through the band series with limsup |b_n/a_{n+1}| = 1 and c_n = 0
        pair = make_pair(a=(1.0, 1.0, 2.0), b=(1.0, 1.0, 2.0))
        at_one = classify(pair, 1.0)
        assert at_one.bounded and not at_one.iff_regime
        assert not at_one.c_nonvanishing
        assert at_one.hypercyclic.label() == "indeterminate"
        assert at_one.chaotic.label() == "indeterminate"

        small = classify(pair, 0.5)
        assert small.hypercyclic.label() == "no[hc-necessary-kernel]"
        assert small.mixing.label() == "no[mix-necessary-kernel]"
        assert small.hypercyclic.verdict is Verdict.NO_NECESSARY

    def test_report_dict(self, bergman_pair):
        data = classify(bergman_pair, 1.0, witness_steps=5).to_dict()
        assert data['boundedness'] == "bounded[strong]"
        assert data['hypercyclic_subspace'] == "yes[subspace-essential-spectrum]"
        assert len(data['witness']) == 6


class TestWitness:
    def test_constant_space_vanishing_at_large_lambda(self, constant_space):
        trace = gethner_shapiro_witness(constant_space, DynamicsQuery(2.0), 0, 20)
        assert trace.certified
        assert trace.vanishing
        np.testing.assert_allclose(trace.values, math.sqrt(4.0 / 3.0) * 0.5 ** np.arange(21), rtol=1e-10)

    @pytest.mark.parametrize("space_name, lambda_abs", [
        ("constant_space", 2.0), ("linear_space", 1.0), ("bergman_space", 1.0), ("linear_space", 1.3)])
    def test_trace_eventually_decreasing_when_mixing(self, request, space_name, lambda_abs):
        space = request.getfixturevalue(space_name)
        query = DynamicsQuery(lambda_abs)
        assert classify(space.pair, query).mixing.verdict is Verdict.YES_IFF
        trace = gethner_shapiro_witness(space, query, 0, 60)
        assert trace.vanishing
        assert np.all(np.diff(trace.values[20:]) < 0)

    def test_not_vanishing_at_small_lambda(self, constant_space):
        trace = gethner_shapiro_witness(constant_space, DynamicsQuery(0.5), 2, 30)
        assert not trace.vanishing
        assert trace.to_dict()['m'] == 2


class TestPeriodicVector:
    def test_telescoping_identity(self, linear_space):
        result = periodic_vector(linear_space, DynamicsQuery(1.0), 3, (1.0,), K=100, N=512)
        assert not result.experimental
        assert result.identity_error <= 1e-9
        expected = np.zeros(301)
        expected[300] = 1.0
        np.testing.assert_allclose(result.difference, expected, atol=1e-9)
        assert result.residual_certified
        assert result.residual_norm == pytest.approx(monomial_norm_sq(linear_space, 300).norm, abs=1e-9)

    def test_matrix_path_agrees(self, linear_space):
        result = periodic_vector(linear_space, DynamicsQuery(1.0), 2, (1.0, 0.5), K=20, N=128)
        assert result.identity_error <= 1e-12
        assert result.matrix_residual_norm == pytest.approx(result.residual_norm, rel=1e-6, abs=1e-12)

    def test_experimental_when_not_chaotic(self, bergman_pair):
        result = periodic_vector(TridiagonalSpace(bergman_pair), DynamicsQuery(1.0), 2, K=10, N=64)
        assert result.experimental

    def test_complex_lambda(self, constant_space):
        lam = 1.5 * cmath.exp(0.7j)
        result = periodic_vector(constant_space, DynamicsQuery(lam), 2, (1.0, 0.25, -0.5), K=30, N=128)
        assert result.identity_error <= 1e-12

    @pytest.mark.parametrize("kwargs", [
        {"period": 0},
        {"period": 3, "K": 200, "N": 128},
        {"period": 2, "f": (0.0,)},
    ])
    def test_invalid_arguments(self, linear_space, kwargs):
        with pytest.raises(DomainError):
            periodic_vector(linear_space, DynamicsQuery(1.0), **kwargs)


class TestUnconditionalSeries:
    def test_constant_space_converges(self, constant_space):
        report = unconditional_series_check(constant_space, DynamicsQuery(2.0), 200)
        assert report.converges
        assert report.bound_respected
        assert report.certified
        np.testing.assert_allclose(report.increments, math.sqrt(4.0 / 3.0) * 0.5 ** np.arange(201), rtol=1e-10)
        assert np.all(np.diff(report.partial_norms) >= -1e-15)

    def test_divergent_series_flagged(self, bergman_pair, caplog):
        report = unconditional_series_check(TridiagonalSpace(bergman_pair), DynamicsQuery(1.0), 100)
        assert not report.converges
        assert report.bound_respected
        assert "diverges" in caplog.text

    def test_random_pairs_respect_bound(self, random_pairs):
        for pair in random_pairs[:5]:
            report = unconditional_series_check(TridiagonalSpace(pair), DynamicsQuery(1.3 + 0.2j), 150)
            assert report.bound_respected


class TestOrbit:
    def test_constant_space_basis_vector(self, constant_space):
        trace = orbit(constant_space, DynamicsQuery(1.0), [1.0], 3, N=128)
        np.testing.assert_allclose(trace.norms, [1.0, 0.5 * math.sqrt(4.0 / 3.0), 0.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(trace.matrix_norms, trace.norms, atol=1e-12)
        assert trace.certified

    def test_linearity(self, linear_space, rng):
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        single = orbit(linear_space, DynamicsQuery(1.5), x, 8, N=64)
        double = orbit(linear_space, DynamicsQuery(1.5), 2 * x, 8, N=64)
        np.testing.assert_allclose(double.norms, 2 * single.norms, rtol=1e-12)

    def test_paths_agree(self, linear_space, rng):
        x = rng.normal(size=4)
        trace = orbit(linear_space, DynamicsQuery(1.2), x, 3, N=128)
        np.testing.assert_allclose(trace.matrix_norms, trace.norms, rtol=1e-9, atol=1e-13)

    def test_truncation_too_small(self, linear_space):
        with pytest.raises(DomainError):
            orbit(linear_space, DynamicsQuery(1.0), [1.0, 2.0], 10, N=12)
