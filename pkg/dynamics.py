import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from errors import DomainError
from sequences import asymptotics, divergence_tests, tail_ratios
from shift_operator import boundedness_report, build_matrix
from space import (TridiagonalSpace, basis_to_coeffs, forward_substitution, monomial_norm_sq,
                   polynomial_norm_sq)
from spectrum import SubspaceResult, hc_subspace_check

logger = logging.getLogger(__name__)

HC_IFF = "hc-iff-sup"
HC_SUFFICIENT = "hc-sufficient-c"
HC_NECESSARY = "hc-necessary-kernel"
MIX_IFF = "mix-iff-lim"
MIX_SUFFICIENT = "mix-sufficient-c"
MIX_NECESSARY = "mix-necessary-kernel"
CHAOS_IFF = "chaos-iff-series"

# Extra terms of the backward norm recurrence past the last reported index
RECURRENCE_PADDING = 256
BOUND_RTOL = 1e-12


class Verdict(Enum):
    YES_IFF = "yes_iff"
    YES_SUFFICIENT = "yes_sufficient"
    NO_IFF = "no_iff"
    NO_NECESSARY = "no_necessary"
    INDETERMINATE = "indeterminate"


class ChaosVerdict(Enum):
    YES = "yes"
    NO = "no"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class ClauseVerdict:
    verdict: Enum
    clause: str | None

    @property
    def is_yes(self):
        return self.verdict.value.startswith("yes")

    @property
    def is_no(self):
        return self.verdict.value.startswith("no")

    def label(self):
        if self.clause is None:
            return "indeterminate"
        return f'{"yes" if self.is_yes else "no"}[{self.clause}]'


INDETERMINATE = ClauseVerdict(Verdict.INDETERMINATE, None)
CHAOS_INDETERMINATE = ClauseVerdict(ChaosVerdict.INDETERMINATE, None)


@dataclass(frozen=True)
class DynamicsQuery:
    lambda_: complex

    def __post_init__(self):
        value = complex(self.lambda_)
        if value == 0:
            raise DomainError("λ must be nonzero")
        object.__setattr__(self, "lambda_", value)

    @property
    def lambda_abs(self):
        return abs(self.lambda_)


@dataclass(frozen=True)
class DynamicsReport:
    boundedness: str
    bounded: bool
    iff_regime: bool  # limsup |b_n/a_{n+1}| < 1
    c_nonvanishing: bool
    hypercyclic: ClauseVerdict
    mixing: ClauseVerdict
    chaotic: ClauseVerdict
    hypercyclic_subspace: SubspaceResult
    lambda_abs: float = field(compare=False)
    witness: tuple | None = field(default=None, compare=False)

    def to_dict(self):
        data = {
            'lambda_abs': self.lambda_abs,
            'boundedness': self.boundedness,
            'iff_regime': self.iff_regime,
            'c_nonvanishing': self.c_nonvanishing,
            'hypercyclic': self.hypercyclic.label(),
            'mixing': self.mixing.label(),
            'chaotic': self.chaotic.label(),
            'hypercyclic_subspace': self.hypercyclic_subspace.label(),
        }
        if self.witness is not None:
            data['witness'] = list(self.witness)
        return data


def _outside_iff_regime(sufficient, necessary, c_nonvanishing, sufficient_clause, necessary_clause):
    # the c_n clause needs c_n != 0 for every n
    if c_nonvanishing and sufficient:
        return ClauseVerdict(Verdict.YES_SUFFICIENT, sufficient_clause)
    if not necessary:
        return ClauseVerdict(Verdict.NO_NECESSARY, necessary_clause)
    return INDETERMINATE


def classify(pair, query, witness_steps=0):
    """Hypercyclicity, mixing and chaos of λB, each with the clause that decided it."""
    if not isinstance(query, DynamicsQuery):
        query = DynamicsQuery(query)
    lambda_abs = query.lambda_abs
    bound = boundedness_report(pair)
    report = asymptotics(pair)
    subspace = hc_subspace_check(pair, lambda_abs)

    if not bound.bounded:
        logger.info(f'B not proven bounded ({bound.provenance}); dynamics left indeterminate')
        return DynamicsReport(
            boundedness=bound.label(), bounded=False, iff_regime=report.tridiag_less_than_one,
            c_nonvanishing=report.c_nonvanishing, hypercyclic=INDETERMINATE, mixing=INDETERMINATE,
            chaotic=CHAOS_INDETERMINATE, hypercyclic_subspace=subspace, lambda_abs=lambda_abs,
        )

    tests = divergence_tests(pair, lambda_abs)
    if report.tridiag_less_than_one:
        hypercyclic = ClauseVerdict(Verdict.YES_IFF if tests.sup_infinite else Verdict.NO_IFF, HC_IFF)
        mixing = ClauseVerdict(Verdict.YES_IFF if tests.lim_infinite else Verdict.NO_IFF, MIX_IFF)
        chaotic = ClauseVerdict(ChaosVerdict.YES if tests.inverse_square_summable else ChaosVerdict.NO,
                                CHAOS_IFF)
    else:
        hypercyclic = _outside_iff_regime(tests.sup_ca_infinite, tests.sup_kernel_diag_infinite,
                                          report.c_nonvanishing, HC_SUFFICIENT, HC_NECESSARY)
        mixing = _outside_iff_regime(tests.lim_ca_infinite, tests.lim_kernel_diag_infinite,
                                     report.c_nonvanishing, MIX_SUFFICIENT, MIX_NECESSARY)
        chaotic = CHAOS_INDETERMINATE

    witness = None
    if witness_steps and report.tridiag_less_than_one:
        trace = gethner_shapiro_witness(TridiagonalSpace(pair), query, 0, witness_steps)
        witness = tuple(float(v) for v in trace.values)

    logger.debug(f'|lambda| = {lambda_abs:g}: hypercyclic {hypercyclic.label()}, '
                 f'mixing {mixing.label()}, chaotic {chaotic.label()}')
    return DynamicsReport(
        boundedness=bound.label(), bounded=True, iff_regime=report.tridiag_less_than_one,
        c_nonvanishing=report.c_nonvanishing, hypercyclic=hypercyclic, mixing=mixing,
        chaotic=chaotic, hypercyclic_subspace=subspace, lambda_abs=lambda_abs, witness=witness,
    )


@dataclass(frozen=True, eq=False)
class WitnessTrace:
    m: int
    values: np.ndarray  # |λ|^-n·‖z^{n+m}‖, n = 0..n_max
    certified: bool

    @property
    def vanishing(self):
        return bool(self.values[-1] < self.values[0])

    def to_dict(self):
        return {'m': self.m, 'values': [float(v) for v in self.values], 'certified': self.certified}


def gethner_shapiro_witness(space, query, m=0, n_max=100):
    """Norms of (λ⁻¹S)ⁿ zᵐ with S(zⁿ) = zⁿ⁺¹."""
    lambda_abs = query.lambda_abs
    norms = [monomial_norm_sq(space, n + m) for n in range(n_max + 1)]
    n = np.arange(n_max + 1)
    values = np.sqrt([v.value for v in norms]) * np.power(lambda_abs, -n.astype(float))
    certified = all(v.certified for v in norms)
    if not certified:
        logger.warning('Gethner-Shapiro trace uses uncertified norms')
    return WitnessTrace(m=m, values=values, certified=certified)


@dataclass(frozen=True, eq=False)
class PeriodicVectorResult:
    period: int
    K: int
    N: int
    coeffs: np.ndarray  # power coefficients of y = Σ_{k<=K} S^{kp} f
    basis_coords: np.ndarray  # first N basis coordinates of y
    difference: np.ndarray  # y - (λB)^p y, power coefficients
    expected: np.ndarray  # S^{Kp} f - (λB)^p f, power coefficients
    identity_error: float
    residual_norm: float  # certified ‖y - (λB)^p y‖
    residual_certified: bool
    matrix_residual_norm: float  # same from the truncated matrix, rows < N - p
    experimental: bool

    def to_dict(self):
        return {
            'period': self.period,
            'K': self.K,
            'N': self.N,
            'identity_error': self.identity_error,
            'residual_norm': self.residual_norm,
            'residual_certified': self.residual_certified,
            'matrix_residual_norm': self.matrix_residual_norm,
            'experimental': self.experimental,
        }


def _pad(coeffs, length):
    padded = np.zeros(length, dtype=complex)
    padded[:len(coeffs)] = coeffs
    return padded


def periodic_vector(space, query, period, f=(1.0,), K=100, N=512):
    """Approximate periodic point y = Σ_{k<=K} S^{kp} f of λB, S(zⁿ) = λ⁻¹zⁿ⁺¹.

    Telescoping gives y - (λB)^p y = S^{Kp} f - (λB)^p f exactly; for f = 1 the
    right side is the single term λ^{-Kp} z^{Kp}.
    """
    if period < 1 or K < 0:
        raise DomainError(f"period must be positive and K nonnegative, got {period}, {K}")
    lam = query.lambda_
    f = np.trim_zeros(np.asarray(f, dtype=complex), "b")
    if f.size == 0:
        raise DomainError("periodic seed polynomial must be nonzero")
    degree = len(f) - 1
    length = degree + K * period + 1
    if length + period >= N:
        raise DomainError(f"matrix truncation {N} too small for degree {length - 1} and period {period}")

    chaotic = classify(space.pair, query).chaotic
    experimental = chaotic.verdict is not ChaosVerdict.YES
    if experimental:
        logger.warning(f'lambda B is not known to be chaotic here ({chaotic.label()}); periodic vector is experimental')

    y = np.zeros(length, dtype=complex)
    for k in range(K + 1):
        y[k * period:k * period + len(f)] += lam ** (-k * period) * f

    shifted = _pad(lam ** period * y[period:], length)
    difference = y - shifted
    expected = _pad(lam ** (-K * period) * np.concatenate((np.zeros(K * period), f)), length)
    expected -= _pad(lam ** period * f[period:], length)
    identity_error = float(np.max(np.abs(difference - expected)))

    residual = polynomial_norm_sq(space, difference)

    coords = np.zeros(N, dtype=complex)
    coords[:length] = forward_substitution(space.pair, y)
    tail = coords[length - 1] * np.cumprod(-tail_ratios(space.pair, length - 1, N - 1))
    coords[length:] = tail
    matrix = lam * build_matrix(space, N).entries
    image = coords
    for _ in range(period):
        image = matrix @ image
    matrix_residual = float(np.linalg.norm((coords - image)[:N - period]))

    logger.info(f'Periodic vector p={period} K={K}: identity error {identity_error:g}, '
                f'residual {residual.norm:g}')
    return PeriodicVectorResult(
        period=period, K=K, N=N, coeffs=y, basis_coords=coords, difference=difference,
        expected=expected, identity_error=identity_error, residual_norm=residual.norm,
        residual_certified=residual.certified, matrix_residual_norm=matrix_residual,
        experimental=experimental,
    )


@dataclass(frozen=True, eq=False)
class UnconditionalSeriesReport:
    n_max: int
    coords: np.ndarray  # basis coordinates Y_n of Σ λ⁻ⁿzⁿ
    partial_norms: np.ndarray  # ‖(Y_0, ..., Y_n)‖
    increments: np.ndarray  # ‖λ⁻ⁿzⁿ‖
    convolution_bound: np.ndarray  # Σ_{k<=n} |λ|^-k |a_k|^-1 Π_{i=k}^{n-1} |b_i/a_{i+1}|
    bound_respected: bool
    converges: bool  # Σ |λⁿ a_n|^-2 < ∞
    certified: bool

    def to_dict(self):
        return {
            'n_max': self.n_max,
            'partial_norms': [float(v) for v in self.partial_norms],
            'increments': [float(v) for v in self.increments],
            'bound_respected': self.bound_respected,
            'converges': self.converges,
            'certified': self.certified,
        }


def _monomial_norms_by_recurrence(space, n_max):
    """‖zⁿ‖² = |a_n|⁻²(1 + T_n) with T_n = |b_n/a_{n+1}|²(1 + T_{n+1}), run backwards."""
    end = n_max + RECURRENCE_PADDING
    r_sq = np.abs(tail_ratios(space.pair, 0, end)) ** 2
    report = asymptotics(space.pair)
    certified = report.tridiag_less_than_one and end >= report.geometric_index
    t_end = 0.0
    if certified:
        r = report.tail_ratio
        t_end = space.tail_safety_factor * r * r / (1.0 - r * r)

    lower = np.zeros(end + 1)
    upper = np.zeros(end + 1)
    upper[end] = t_end
    for n in range(end - 1, -1, -1):
        lower[n] = r_sq[n] * (1.0 + lower[n + 1])
        upper[n] = r_sq[n] * (1.0 + upper[n + 1])
    log_a = space.pair.a.log_abs_term(np.arange(n_max + 1))
    with np.errstate(over="ignore"):
        values = (1.0 + lower[:n_max + 1]) * np.exp(-2.0 * log_a)
    gap = (upper[:n_max + 1] - lower[:n_max + 1]) / (1.0 + lower[:n_max + 1])
    return values, certified and bool(np.max(gap) <= BOUND_RTOL)


def unconditional_series_check(space, query, n_max=1000):
    """Coordinates and partial-sum norms of Σ λ⁻ⁿzⁿ against the ℓ¹-convolution bound."""
    lam = query.lambda_
    n = np.arange(n_max + 1)
    with np.errstate(over="ignore"):
        coeffs = np.power(lam, -n.astype(float))
    coords = forward_substitution(space.pair, coeffs)

    lambda_abs = query.lambda_abs
    with np.errstate(over="ignore"):
        inverse_a = np.exp(-n * np.log(lambda_abs) - space.pair.a.log_abs_term(n))
    r_abs = np.abs(tail_ratios(space.pair, 0, n_max))
    bound = np.empty(n_max + 1)
    bound[0] = inverse_a[0]
    for k in range(1, n_max + 1):
        bound[k] = inverse_a[k] + r_abs[k - 1] * bound[k - 1]
    respected = bool(np.all(np.abs(coords) <= bound * (1.0 + BOUND_RTOL)))

    norms_sq, certified = _monomial_norms_by_recurrence(space, n_max)
    increments = np.sqrt(norms_sq) * np.power(lambda_abs, -n.astype(float))
    converges = divergence_tests(space.pair, lambda_abs).inverse_square_summable
    if not converges:
        logger.warning(f'Series sum lambda^-n z^n diverges at |lambda| = {lambda_abs:g}')

    return UnconditionalSeriesReport(
        n_max=n_max,
        coords=coords,
        partial_norms=np.sqrt(np.cumsum(np.abs(coords) ** 2)),
        increments=increments,
        convolution_bound=bound,
        bound_respected=respected,
        converges=converges,
        certified=certified,
    )


@dataclass(frozen=True, eq=False)
class OrbitTrace:
    steps: int
    norms: np.ndarray  # certified ‖(λB)^k x‖, k = 0..steps
    matrix_norms: np.ndarray  # same from the N×N truncation
    certified: bool

    def to_dict(self):
        return {
            'steps': self.steps,
            'norms': [float(v) for v in self.norms],
            'matrix_norms': [float(v) for v in self.matrix_norms],
            'certified': self.certified,
        }


def orbit(space, query, x, steps, N=256):
    """Norms of (λB)^k x for a finitely supported basis vector x."""
    x = np.asarray(x, dtype=complex)
    if steps < 0:
        raise DomainError(f"steps must be nonnegative, got {steps}")
    if steps + len(x) >= N:
        raise DomainError(f"truncation {N} too small for {len(x)} coordinates and {steps} steps")
    lam = query.lambda_

    coeffs = basis_to_coeffs(space, x)
    values = []
    for _ in range(steps + 1):
        values.append(polynomial_norm_sq(space, coeffs))
        coeffs = lam * coeffs[1:]

    matrix = lam * build_matrix(space, N).entries
    vector = _pad(x, N)
    matrix_norms = []
    for _ in range(steps + 1):
        matrix_norms.append(float(np.linalg.norm(vector)))
        vector = matrix @ vector

    return OrbitTrace(
        steps=steps,
        norms=np.array([v.norm for v in values]),
        matrix_norms=np.array(matrix_norms),
        certified=all(v.certified for v in values),
    )

