import cmath
import logging
import math
import sys
from dataclasses import dataclass, field
from functools import cached_property, lru_cache, total_ordering

import numpy as np

from errors import DomainError, ParseError

logger = logging.getLogger(__name__)

# Absolute tolerance for unit-modulus and equal-power comparisons in the decision table
UNIT_TOL = 1e-12
# Relative size below which a computed c_n counts as zero
C_ZERO_RTOL = 1e-12
# Hard stop for the forward scan that locates the geometric tail index
TAIL_SCAN_LIMIT = 1 << 26
# log of the largest and of the smallest normal double
MAX_LOG = math.log(sys.float_info.max)
MIN_LOG = math.log(sys.float_info.min)


def _as_complex(value, what):
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ParseError(f"{what}: expected [re, im], got {value!r}")
        value = complex(value[0], value[1]) if all(isinstance(v, (int, float)) for v in value) else value
    try:
        number = complex(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what}: not a number: {value!r}")
    if not (math.isfinite(number.real) and math.isfinite(number.imag)):
        raise ParseError(f"{what}: not finite: {value!r}")
    return number


def _as_index(value, what):
    if isinstance(value, bool):
        raise ParseError(f"{what}: index must be an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ParseError(f"{what}: index must be an integer, got {value!r}")
    try:
        index = int(value)
    except (TypeError, ValueError):
        raise ParseError(f"{what}: index must be an integer, got {value!r}")
    if index < 0:
        raise ParseError(f"{what}: index must be nonnegative, got {index}")
    return index


def is_unit(x):
    return abs(x - 1.0) <= UNIT_TOL


@dataclass(frozen=True)
class SequenceFamily:
    """Nonzero sequence C·ρⁿ·(n+1)^p with finitely many overridden terms."""

    coefficient: complex = 1.0
    base: complex = 1.0
    power: float = 0.0
    overrides: tuple = ()  # sorted (index, value) pairs

    def __post_init__(self):
        coefficient = _as_complex(self.coefficient, "coefficient")
        base = _as_complex(self.base, "base")
        if coefficient == 0:
            raise ParseError("coefficient must be nonzero")
        if base == 0:
            raise ParseError("base must be nonzero")
        try:
            power = float(self.power)
        except (TypeError, ValueError):
            raise ParseError(f"power: not a real number: {self.power!r}")
        if not math.isfinite(power):
            raise ParseError(f"power: not finite: {self.power!r}")

        items = self.overrides.items() if isinstance(self.overrides, dict) else self.overrides
        cleaned = {}
        for key, value in items:
            index = _as_index(key, "override")
            number = _as_complex(value, f"override at index {index}")
            if number == 0:
                raise ParseError(f"override at index {index} is zero")
            cleaned[index] = number

        object.__setattr__(self, "coefficient", coefficient)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "overrides", tuple(sorted(cleaned.items())))

    def __repr__(self):
        return f'<SequenceFamily C={self.coefficient} rho={self.base} p={self.power} overrides={len(self.overrides)}>'

    @cached_property
    def _override_map(self):
        return dict(self.overrides)

    @cached_property
    def _log_base(self):
        return cmath.log(self.base)

    @property
    def last_override(self):
        """Largest overridden index, -1 when there are none"""
        return self.overrides[-1][0] if self.overrides else -1

    def term(self, n):
        if n < 0:
            raise DomainError(f"sequence index must be nonnegative, got {n}")
        value = self._override_map.get(n)
        if value is not None:
            return value
        self._check_range(n, self.log_abs_term(n))
        try:
            value = self.coefficient * self.base ** n * (n + 1) ** self.power
        except OverflowError:
            value = 0j
        # the factors can leave double range while their product stays inside it
        if value == 0 or not cmath.isfinite(value):
            value = self.coefficient * cmath.exp(complex(self.log_scale(n)))
        return value

    def terms(self, count):
        """First `count` terms as a complex array"""
        n = np.arange(count)
        if count:
            logs = np.atleast_1d(self.log_abs_term(n))
            worst = int(np.argmax(np.abs(logs - 0.5 * (MAX_LOG + MIN_LOG))))
            self._check_range(worst, logs[worst])
        with np.errstate(over="ignore", under="ignore", invalid="ignore"):
            values = self.coefficient * np.power(self.base, n) * np.power(n + 1.0, self.power)
            values = values.astype(complex)
            broken = (values == 0) | ~np.isfinite(values)
            if np.any(broken):
                values[broken] = self.coefficient * np.exp(self.log_scale(n[broken]))
        for index, value in self.overrides:
            if index < count:
                values[index] = value
        return values

    @staticmethod
    def _check_range(n, log_abs):
        if log_abs > MAX_LOG:
            raise DomainError(f"term {n} overflows double precision")
        if log_abs < MIN_LOG:
            raise DomainError(f"term {n} underflows double precision")

    def log_scale(self, n):
        """Complex log of ρⁿ·(n+1)^p, so that a formula term equals C·exp(log_scale)."""
        n = np.asarray(n, dtype=float)
        return n * self._log_base + self.power * np.log1p(n)

    def prefactor(self, n):
        """C, or override·exp(-log_scale) at overridden indices."""
        n = np.asarray(n)
        result = np.full(n.shape, self.coefficient, dtype=complex)
        for index, value in self.overrides:
            result = np.where(n == index, value * cmath.exp(-complex(self.log_scale(index))), result)
        return result

    def log_abs_term(self, n):
        """log|term(n)|, finite where the term itself would overflow"""
        value = self.log_abs_prefactor(n) + np.real(self.log_scale(n))
        return float(value) if np.ndim(value) == 0 else value

    def log_abs_prefactor(self, n):
        n = np.asarray(n)
        result = np.full(n.shape, math.log(abs(self.coefficient)), dtype=float)
        for index, value in self.overrides:
            result = np.where(n == index, math.log(abs(value)) - float(np.real(self.log_scale(index))), result)
        return result


@dataclass(frozen=True)
class SequencePair:
    a: SequenceFamily
    b: SequenceFamily

    def __post_init__(self):
        if not isinstance(self.a, SequenceFamily) or not isinstance(self.b, SequenceFamily):
            raise ParseError("a sequence pair needs two SequenceFamily instances")

    @property
    def last_override(self):
        return max(self.a.last_override, self.b.last_override)


@total_ordering
@dataclass(frozen=True)
class ExtendedReal:
    """Nonnegative extended real: a finite float or an explicit infinity tag."""

    value: float = 0.0
    infinite: bool = False

    @classmethod
    def finite(cls, value):
        return cls(float(value), False)

    @classmethod
    def infinity(cls):
        return cls(0.0, True)

    def _key(self):
        return (1, 0.0) if self.infinite else (0, self.value)

    def __lt__(self, other):
        if not isinstance(other, ExtendedReal):
            other = ExtendedReal.finite(other)
        return self._key() < other._key()

    def __str__(self):
        return "inf" if self.infinite else f"{self.value:g}"

    def to_json(self):
        return "inf" if self.infinite else self.value


ZERO = ExtendedReal.finite(0.0)
INFINITY = ExtendedReal.infinity()


@dataclass(frozen=True)
class AsymptoticForm:
    """Magnitude model coeff·modulusⁿ·(n+1)^power of a sequence's eventual size."""

    coeff_abs: float
    modulus: float
    power: float

    def limit(self):
        if self.modulus > 1.0 + UNIT_TOL:
            return INFINITY
        if self.modulus < 1.0 - UNIT_TOL:
            return ZERO
        if self.power > UNIT_TOL:
            return INFINITY
        if self.power < -UNIT_TOL:
            return ZERO
        return ExtendedReal.finite(self.coeff_abs)

    def diverges(self):
        return self.limit().infinite

    def inverse_square_summable(self):
        """Whether Σ (coeff·modulusⁿ·(n+1)^power)^-2 converges"""
        if self.modulus > 1.0 + UNIT_TOL:
            return True
        if self.modulus < 1.0 - UNIT_TOL:
            return False
        return 2.0 * self.power > 1.0 + UNIT_TOL

    def times(self, other):
        return AsymptoticForm(self.coeff_abs * other.coeff_abs, self.modulus * other.modulus,
                              self.power + other.power)

    def scaled(self, lambda_abs):
        """Form of |λ|ⁿ times this sequence"""
        return AsymptoticForm(self.coeff_abs, self.modulus * lambda_abs, self.power)


def evaluate(family, n):
    """Term n of the family: the override if set, else C·ρⁿ·(n+1)^p"""
    return family.term(n)


def ratio(num, i, den, j):
    """num_i / den_j computed from prefactors and a log-scale difference."""
    i = np.asarray(i)
    j = np.asarray(j)
    fi = i.astype(float)
    fj = j.astype(float)
    scale = ((fi - fj) * den._log_base + fi * (num._log_base - den._log_base)
             + den.power * (np.log1p(fi) - np.log1p(fj)) + (num.power - den.power) * np.log1p(fi))
    with np.errstate(over="ignore", under="ignore"):
        result = num.prefactor(i) / den.prefactor(j) * np.exp(scale)
    if result.ndim == 0:
        return complex(result)
    return result


def log_abs_ratio(num, i, den, j):
    """log|num_i / den_j| without forming either term"""
    i = np.asarray(i)
    j = np.asarray(j)
    fi = i.astype(float)
    fj = j.astype(float)
    log_den = math.log(abs(den.base))
    log_num = math.log(abs(num.base))
    scale = ((fi - fj) * log_den + fi * (log_num - log_den)
             + den.power * (np.log1p(fi) - np.log1p(fj)) + (num.power - den.power) * np.log1p(fi))
    result = scale + num.log_abs_prefactor(i) - den.log_abs_prefactor(j)
    if np.ndim(result) == 0:
        return float(result)
    return result


def tail_ratios(pair, start, stop):
    """b_n / a_{n+1} for start <= n < stop"""
    n = np.arange(start, stop)
    return np.atleast_1d(ratio(pair.b, n, pair.a, n + 1))


def c_seq(pair, n):
    """c_n = b_n/a_n - b_{n-1}/a_{n-1} from evaluated terms"""
    if n < 1:
        raise DomainError(f"c_n is defined for n >= 1, got {n}")
    return pair.b.term(n) / pair.a.term(n) - pair.b.term(n - 1) / pair.a.term(n - 1)


def diagonal_values(pair, count):
    """(b_0/a_0, c_1, c_2, ...) of length `count`, vectorised"""
    n = np.arange(count)
    quotients = np.atleast_1d(ratio(pair.b, n, pair.a, n))
    diagonal = quotients.copy()
    diagonal[1:] = quotients[1:] - quotients[:-1]
    return diagonal


def tridiag_form(pair):
    """Eventual size of |b_n / a_{n+1}|"""
    a, b = pair.a, pair.b
    return AsymptoticForm(abs(b.coefficient / (a.coefficient * a.base)),
                          abs(b.base / a.base), b.power - a.power)


def c_form(pair):
    """Eventual size of |c_n|, or None when c_n vanishes identically past the overrides."""
    a, b = pair.a, pair.b
    k = b.coefficient / a.coefficient
    sigma = b.base / a.base
    q = b.power - a.power
    if abs(sigma - 1.0) <= UNIT_TOL:
        if abs(q) <= UNIT_TOL:
            return None
        return AsymptoticForm(abs(k * q), 1.0, q - 1.0)
    return AsymptoticForm(abs(k) * abs(sigma - 1.0) / abs(sigma), abs(sigma), q)


def _c_is_zero(pair, n):
    current = pair.b.term(n) / pair.a.term(n)
    previous = pair.b.term(n - 1) / pair.a.term(n - 1)
    return abs(current - previous) <= C_ZERO_RTOL * max(abs(current), abs(previous))


def vanishing_c_indices(pair):
    """Indices n >= 1 with c_n = 0, and whether c_n vanishes for every n past the overrides."""
    end = pair.last_override + 1
    zeros = [n for n in range(1, end + 1) if _c_is_zero(pair, n)]
    form = c_form(pair)
    if form is None:
        return tuple(zeros), True

    # Past the overrides c_n = 0 iff σ = (n/(n+1))^q, which has at most one root
    sigma = pair.b.base / pair.a.base
    q = pair.b.power - pair.a.power
    if abs(q) > UNIT_TOL and abs(sigma.imag) <= UNIT_TOL and sigma.real > 0:
        x = sigma.real ** (1.0 / q)
        if 0.0 < x < 1.0:
            root = x / (1.0 - x)
            for n in {math.floor(root), math.ceil(root)}:
                if n > end and _c_is_zero(pair, n):
                    zeros.append(n)
    return tuple(sorted(set(zeros))), False


def _monotone_onset(pair):
    """Index past which log|b_n/a_{n+1}| is monotone in n"""
    a, b = pair.a, pair.b
    log_sigma = math.log(abs(b.base / a.base))
    if abs(log_sigma) > UNIT_TOL:
        return (abs(a.power) + abs(b.power)) / abs(log_sigma)
    q = b.power - a.power
    if abs(q) > UNIT_TOL:
        return max(0.0, abs(2.0 * b.power - a.power) / abs(q))
    return 0.0


def geometric_tail_index(pair, r):
    """Smallest N with |b_n/a_{n+1}| <= r for every n >= N."""
    start = max(pair.b.last_override, pair.a.last_override - 1) + 1
    start = max(start, int(math.ceil(_monotone_onset(pair))) + 1)

    head = np.abs(tail_ratios(pair, 0, start + 1))
    violations = np.nonzero(head > r)[0]
    index = int(violations[-1]) + 1 if violations.size else 0
    if head[-1] <= r:
        return index

    # Past the onset the ratio decreases monotonically towards its limit < r
    position = start + 1
    chunk = 1024
    while position < TAIL_SCAN_LIMIT:
        values = np.abs(tail_ratios(pair, position, position + chunk))
        below = np.nonzero(values <= r)[0]
        if below.size:
            return position + int(below[0])
        position += chunk
        chunk *= 2
    raise DomainError(f"geometric tail index exceeds {TAIL_SCAN_LIMIT}")


@dataclass(frozen=True)
class AsymptoticsReport:
    ratio_limit_a: float  # lim |a_{n+1}/a_n| = |ρ_a|
    tridiag_limsup: ExtendedReal  # limsup |b_n/a_{n+1}|
    tridiag_less_than_one: bool
    c_limit_zero: bool
    ratio_bounded: bool
    c_bounded: bool
    c_eventually_zero: bool
    c_limit: ExtendedReal | None  # None when c_n is eventually zero
    tail_ratio: float | None  # r, set when the limsup is below one
    geometric_index: int | None = field(default=None, compare=False)
    c_vanishing_indices: tuple = field(default=(), compare=False)

    @property
    def c_nonvanishing(self):
        """c_n != 0 for every n >= 1"""
        return not self.c_eventually_zero and not self.c_vanishing_indices

    def to_dict(self):
        return {
            'ratio_limit_a': self.ratio_limit_a,
            'tridiag_limsup': self.tridiag_limsup.to_json(),
            'tridiag_less_than_one': self.tridiag_less_than_one,
            'c_limit_zero': self.c_limit_zero,
            'ratio_bounded': self.ratio_bounded,
            'c_bounded': self.c_bounded,
            'c_eventually_zero': self.c_eventually_zero,
            'c_limit': self.c_limit.to_json() if self.c_limit is not None else 0.0,
            'tail_ratio': self.tail_ratio,
            'geometric_index': self.geometric_index,
            'c_vanishing_indices': list(self.c_vanishing_indices),
        }


@lru_cache(maxsize=256)
def asymptotics(pair):
    """Exact limits of the pair from the family parameters; overrides only move the tail index."""
    limsup = tridiag_form(pair).limit()
    less_than_one = limsup < 1.0
    form = c_form(pair)
    c_limit = form.limit() if form is not None else None
    vanishing, eventually_zero = vanishing_c_indices(pair)

    tail_ratio = None
    index = None
    if less_than_one:
        tail_ratio = (1.0 + limsup.value) / 2.0
        index = geometric_tail_index(pair, tail_ratio)
        logger.debug(f'Geometric tail |b_n/a_(n+1)| <= {tail_ratio} from n = {index}')

    return AsymptoticsReport(
        ratio_limit_a=abs(pair.a.base),
        tridiag_limsup=limsup,
        tridiag_less_than_one=less_than_one,
        c_limit_zero=c_limit is None or c_limit == ZERO,
        ratio_bounded=True,
        c_bounded=c_limit is None or not c_limit.infinite,
        c_eventually_zero=eventually_zero,
        c_limit=c_limit,
        tail_ratio=tail_ratio,
        geometric_index=index,
        c_vanishing_indices=vanishing,
    )


@dataclass(frozen=True)
class DivergenceTests:
    lambda_abs: float
    sup_infinite: bool  # sup |λⁿ a_n| = ∞
    lim_infinite: bool  # lim |λⁿ a_n| = ∞
    inverse_square_summable: bool  # Σ |λⁿ a_n|^-2 < ∞
    sup_ca_infinite: bool | None  # None when c_n is eventually zero
    lim_ca_infinite: bool | None
    sup_kernel_diag_infinite: bool  # sup |λ|ⁿ(|a_n| + |b_{n-1}|) = ∞
    lim_kernel_diag_infinite: bool

    def to_dict(self):
        return {
            'lambda_abs': self.lambda_abs,
            'sup_infinite': self.sup_infinite,
            'lim_infinite': self.lim_infinite,
            'inverse_square_summable': self.inverse_square_summable,
            'sup_ca_infinite': self.sup_ca_infinite,
            'lim_ca_infinite': self.lim_ca_infinite,
            'sup_kernel_diag_infinite': self.sup_kernel_diag_infinite,
            'lim_kernel_diag_infinite': self.lim_kernel_diag_infinite,
        }


def a_form(family):
    return AsymptoticForm(abs(family.coefficient), abs(family.base), family.power)


def divergence_tests(pair, lambda_abs):
    """Sup/lim/series divergence tests at |λ|; a complex λ is reduced to its modulus."""
    lambda_abs = abs(lambda_abs)
    if lambda_abs == 0:
        raise DomainError("λ must be nonzero")
    a, b = pair.a, pair.b

    scaled_a = a_form(a).scaled(lambda_abs)
    a_diverges = scaled_a.diverges()

    form = c_form(pair)
    ca_diverges = None
    if form is not None:
        ca_diverges = form.times(a_form(a)).scaled(lambda_abs).diverges()

    # |b_{n-1}| = |C_b|·|ρ_b|^(n-1)·n^p_b
    shifted_b = AsymptoticForm(abs(b.coefficient) / abs(b.base), abs(b.base), b.power).scaled(lambda_abs)
    kernel_diverges = a_diverges or shifted_b.diverges()

    # The family terms are eventually monotone, so sup = ∞ and lim = ∞ coincide
    return DivergenceTests(
        lambda_abs=lambda_abs,
        sup_infinite=a_diverges,
        lim_infinite=a_diverges,
        inverse_square_summable=scaled_a.inverse_square_summable(),
        sup_ca_infinite=ca_diverges,
        lim_ca_infinite=ca_diverges,
        sup_kernel_diag_infinite=kernel_diverges,
        lim_kernel_diag_infinite=kernel_diverges,
    )
