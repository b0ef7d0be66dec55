import math

import numpy as np
import pytest
from scipy.stats import unitary_group

import matrixkernel
from dynamics import classify
from errors import DomainError, ParseError
from matrixkernel import (MatrixKernelSpace, diagonalization_check, direct_sum_classify,
                          direct_sum_kernel_check, mk_kernel_eval, mk_kernel_eval_direct,
                          raw_tables_from_channels, slowest_channel)
from space import TridiagonalSpace, kernel_eval


@pytest.fixture
def unitary():
    return unitary_group.rvs(2, random_state=11)


@pytest.fixture
def mixed_space(linear_pair, bergman_pair, unitary):
    """Channels a_n = n+1 and a_n = sqrt(n+1) rotated by a random unitary"""
    return MatrixKernelSpace(d=2, Q=unitary, channels=(linear_pair, bergman_pair), truncation=64)


@pytest.fixture
def tabled_space(mixed_space):
    raw_a, raw_b = raw_tables_from_channels(mixed_space, 64)
    return MatrixKernelSpace(d=2, Q=mixed_space.Q, channels=mixed_space.channels, raw_a=raw_a,
                             raw_b=raw_b, truncation=64)


@pytest.fixture
def samples(rng):
    radii = rng.uniform(0.0, 0.7, (50, 2))
    angles = rng.uniform(0.0, 2.0 * math.pi, (50, 2))
    points = radii * np.exp(1j * angles)
    return [(complex(z), complex(w)) for z, w in points]


class TestMatrixKernelSpace:
    def test_non_unitary_rejected(self, linear_pair, bergman_pair):
        with pytest.raises(ParseError, match="not unitary"):
            MatrixKernelSpace(d=2, Q=[[1.0, 0.1], [0.0, 1.0]], channels=(linear_pair, bergman_pair))

    def test_channel_count_must_match(self, linear_pair):
        with pytest.raises(ParseError):
            MatrixKernelSpace(d=2, Q=np.eye(2), channels=(linear_pair,))

    def test_table_shape_checked(self, linear_pair):
        with pytest.raises(ParseError, match="A_0"):
            MatrixKernelSpace(d=1, Q=[[1.0]], channels=(linear_pair,), raw_a=(np.eye(2),), raw_b=(np.eye(1),))

    def test_raw_tables_flag(self, mixed_space, tabled_space):
        assert not mixed_space.has_raw_tables
        assert tabled_space.has_raw_tables


class TestKernel:
    def test_single_channel_is_scalar_kernel(self, constant_pair):
        mspace = MatrixKernelSpace(d=1, Q=[[1.0]], channels=(constant_pair,))
        z, w = 0.3 + 0.2j, -0.1 + 0.4j
        expected = kernel_eval(TridiagonalSpace(constant_pair), z, w, 128)
        assert mk_kernel_eval(mspace, z, w, 128)[0, 0] == pytest.approx(expected, rel=1e-13)

    def test_hermitian_on_the_diagonal(self, mixed_space):
        value = mk_kernel_eval(mixed_space, 0.4 - 0.3j, 0.4 - 0.3j)
        np.testing.assert_allclose(value, value.conj().T, atol=1e-12)
        assert np.linalg.eigvalsh(value).min() > 0

    def test_block_gram_positive(self, mixed_space, samples, rng):
        points = [z for z, _ in samples[:5]]
        blocks = [[mk_kernel_eval(mixed_space, z, w) for w in points] for z in points]
        for _ in range(20):
            u = rng.normal(size=(5, 2)) + 1j * rng.normal(size=(5, 2))
            form = sum(u[i].conj() @ blocks[i][j] @ u[j] for i in range(5) for j in range(5))
            assert abs(form.imag) <= 1e-10 * max(1.0, abs(form))
            assert form.real >= -1e-10

    def test_direct_form_agrees(self, tabled_space, samples):
        for z, w in samples[:5]:
            np.testing.assert_allclose(mk_kernel_eval_direct(tabled_space, z, w),
                                       mk_kernel_eval(tabled_space, z, w), rtol=1e-10, atol=1e-12)

    def test_short_tables_rejected(self, mixed_space):
        raw_a, raw_b = raw_tables_from_channels(mixed_space, 8)
        short = MatrixKernelSpace(d=2, Q=mixed_space.Q, channels=mixed_space.channels, raw_a=raw_a,
                                  raw_b=raw_b)
        with pytest.raises(DomainError):
            mk_kernel_eval_direct(short, 0.1, 0.1, 16)


class TestDiagnostics:
    def test_diagonalization_and_kernel_checks(self, tabled_space, samples):
        diagonal = diagonalization_check(tabled_space)
        assert diagonal.passed
        assert diagonal.deviation <= 1e-10

        kernel = direct_sum_kernel_check(tabled_space, samples, tol=1e-10)
        assert kernel.passed
        assert kernel.to_dict()['tol'] == 1e-10

    def test_corrupted_table_is_located(self, tabled_space):
        raw_a = list(tabled_space.raw_a)
        raw_a[5] = raw_a[5] + np.array([[0.0, 1e-3], [0.0, 0.0]])
        corrupted = MatrixKernelSpace(d=2, Q=tabled_space.Q, channels=tabled_space.channels,
                                      raw_a=tuple(raw_a), raw_b=tabled_space.raw_b, truncation=64)
        diagnostic = diagonalization_check(corrupted)
        assert not diagnostic.passed
        assert diagnostic.worst_index == 5
        assert diagnostic.worst_matrix == "A"

    def test_missing_adjoint_conjugation_detected(self, tabled_space, samples, monkeypatch):
        monkeypatch.setattr(matrixkernel, "_adjoint", lambda matrix: matrix.T)
        diagnostic = direct_sum_kernel_check(tabled_space, samples[:10], tol=1e-10)
        assert not diagnostic.passed
        assert diagnostic.worst_matrix == "K"

    def test_needs_raw_tables(self, mixed_space):
        with pytest.raises(DomainError):
            diagonalization_check(mixed_space)

    def test_index_outside_tables(self, tabled_space):
        with pytest.raises(DomainError):
            diagonalization_check(tabled_space, indices=[64])


class TestDirectSum:
    def test_slowest_channel(self, mixed_space):
        assert slowest_channel(mixed_space) == 1

    def test_mixing_not_chaotic(self, mixed_space):
        result = direct_sum_classify(mixed_space, 1.0)
        assert not result.experimental
        assert result.slowest_channel == 1
        assert result.report.hypercyclic.label() == "yes[ds-hc-min]"
        assert result.report.mixing.label() == "yes[ds-mix-all]"
        assert result.report.chaotic.label() == "no[ds-chaos-all]"

    def test_chaotic_when_every_channel_is(self, linear_pair, unitary):
        mspace = MatrixKernelSpace(d=2, Q=unitary, channels=(linear_pair, linear_pair))
        assert direct_sum_classify(mspace).report.chaotic.label() == "yes[ds-chaos-all]"

    def test_experimental_lambda(self, mixed_space, caplog):
        result = direct_sum_classify(mixed_space, 2.0)
        assert result.experimental
        assert result.to_dict()['experimental'] is True
        assert "experimental" in caplog.text

    def test_subspace_from_channels(self, mixed_space):
        assert direct_sum_classify(mixed_space, 1.0).report.hypercyclic_subspace.label() == "yes[ds-subspace-channel]"
        # at |λ| = 2 both channel annuli sit outside the closed unit disc
        assert direct_sum_classify(mixed_space, 2.0).report.hypercyclic_subspace.label() == "no[ds-subspace-channel]"

    def test_subspace_indeterminate_outside_strong_regime(self, linear_pair, unbounded_pair):
        mspace = MatrixKernelSpace(d=2, Q=np.eye(2), channels=(linear_pair, unbounded_pair))
        report = direct_sum_classify(mspace).report
        assert not report.bounded
        assert report.hypercyclic_subspace.label() == "indeterminate"

    @pytest.mark.parametrize("pair_name", ["constant_pair", "linear_pair", "bergman_pair"])
    @pytest.mark.parametrize("lambda_abs", [0.5, 1.0, 2.0])
    def test_single_channel_matches_scalar_classify(self, request, pair_name, lambda_abs):
        pair = request.getfixturevalue(pair_name)
        direct = direct_sum_classify(MatrixKernelSpace(d=1, Q=[[1.0]], channels=(pair,)), lambda_abs).report
        scalar = classify(pair, lambda_abs)
        assert direct.bounded is scalar.bounded
        assert direct.hypercyclic.verdict is scalar.hypercyclic.verdict
        assert direct.mixing.verdict is scalar.mixing.verdict
        assert direct.chaotic.verdict is scalar.chaotic.verdict
        assert direct.hypercyclic_subspace.value is scalar.hypercyclic_subspace.value

    def test_invariant_under_right_unitary(self, mixed_space, rng):
        base = direct_sum_classify(mixed_space, 1.0)
        for seed in range(5):
            diagonal = np.diag(np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, 2)))
            for v in (diagonal, unitary_group.rvs(2, random_state=seed)):
                rotated = MatrixKernelSpace(d=2, Q=mixed_space.Q @ v, channels=mixed_space.channels,
                                            truncation=mixed_space.truncation)
                assert direct_sum_classify(rotated, 1.0) == base

    def test_zero_lambda(self, mixed_space):
        with pytest.raises(DomainError):
            direct_sum_classify(mixed_space, 0)
