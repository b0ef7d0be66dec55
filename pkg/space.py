import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from errors import DomainError
from sequences import MAX_LOG, UNIT_TOL, SequencePair, asymptotics, diagonal_values, tail_ratios

logger = logging.getLogger(__name__)

# Certified tail must fall below this fraction of the partial sum
NORM_RTOL = 1e-12
INITIAL_DEPTH = 64
MAX_DEPTH = 1 << 20


@dataclass(frozen=True)
class TridiagonalSpace:
    """The space with orthonormal basis f_n(z) = (a_n + b_n z)zⁿ."""

    pair: SequencePair
    truncation: int = 256
    tail_safety_factor: float = 2.0

    def __post_init__(self):
        if int(self.truncation) < 1:
            raise DomainError(f"truncation must be positive, got {self.truncation}")
        if not self.tail_safety_factor >= 1.0:
            raise DomainError(f"tail safety factor must be >= 1, got {self.tail_safety_factor}")
        if not self.standing_assumption:
            radius = max(abs(self.pair.a.base), abs(self.pair.b.base))
            logger.warning(f'Kernel series radius is not 1 (max |rho| = {radius:g}); proceeding formally')

    @property
    def standing_assumption(self):
        """Kernel series has radius of convergence 1"""
        return abs(max(abs(self.pair.a.base), abs(self.pair.b.base)) - 1.0) <= UNIT_TOL


@dataclass(frozen=True, eq=False)
class MonomialExpansion:
    n: int
    coefficients: np.ndarray  # α_{n+j}, j = 0..depth
    tail_bound: float | None  # bound on Σ_{j>depth} |α_{n+j}|², None without a geometric tail
    certified: bool


@dataclass(frozen=True)
class NormValue:
    value: float
    error_bound: float | None
    certified: bool

    @property
    def norm(self):
        return math.sqrt(self.value)

    def to_dict(self):
        return {'value': self.value, 'error_bound': self.error_bound, 'certified': self.certified}


@dataclass(frozen=True)
class KernelDerivNorm:
    n: int
    value: float | None  # None past double range; log_value is always set
    log_value: float


@dataclass(frozen=True, eq=False)
class NormEstimateReport:
    n_max: int
    norms: np.ndarray  # ‖zⁿ‖ for n = 0..n_max
    certified: bool
    m1: float | None  # smallest M with ‖zⁿ‖ <= M/|c_n a_n|, None when every c_n is zero
    m2: float  # smallest M with ‖zⁿ‖ <= M/|a_n|
    m2_tail: float | None  # m2 restricted to n >= geometric index
    tail_ratio: float | None
    geometric_index: int | None

    def to_dict(self):
        return {
            'n_max': self.n_max,
            'norms': [float(v) for v in self.norms],
            'certified': self.certified,
            'm1': self.m1,
            'm2': self.m2,
            'm2_tail': self.m2_tail,
            'tail_ratio': self.tail_ratio,
            'geometric_index': self.geometric_index,
        }


def _warn_outside_disc(*points):
    for point in points:
        if abs(point) >= 1.0:
            logger.warning(f'Evaluating at {point} outside the unit disc')


def basis_eval(space, n, z):
    """f_n(z) = (a_n + b_n z)zⁿ"""
    return (space.pair.a.term(n) + space.pair.b.term(n) * z) * z ** n


def basis_values(space, z, count):
    """(f_0(z), ..., f_{count-1}(z))"""
    a = space.pair.a.terms(count)
    b = space.pair.b.terms(count)
    return (a + b * z) * np.power(complex(z), np.arange(count))


def kernel_eval(space, z, w, N=None):
    """Basis sum Σ_{n<N} f_n(z)·conj(f_n(w))"""
    N = space.truncation if N is None else N
    if N < 1:
        raise DomainError(f"kernel truncation must be positive, got {N}")
    _warn_outside_disc(z, w)
    return complex(np.sum(basis_values(space, z, N) * np.conj(basis_values(space, w, N))))


def kernel_eval_tridiagonal(space, z, w, N=None):
    """Same truncated kernel summed along its three coefficient diagonals."""
    N = space.truncation if N is None else N
    if N < 1:
        raise DomainError(f"kernel truncation must be positive, got {N}")
    _warn_outside_disc(z, w)
    a = space.pair.a.terms(N)
    b = space.pair.b.terms(N)
    w_bar = complex(w).conjugate()
    powers = np.power(complex(z) * w_bar, np.arange(N + 1))

    diagonal = np.abs(a) ** 2
    diagonal[1:] += np.abs(b[:-1]) ** 2
    total = np.sum(diagonal * powers[:N])
    total += w_bar * np.sum(a * np.conj(b) * powers[:N])
    total += z * np.sum(np.conj(a) * b * powers[:N])
    total += abs(b[N - 1]) ** 2 * powers[N]
    return complex(total)


def kernel_section_coords(space, w, N=None):
    """Basis coordinates of k(·, w): conj(f_m(w))"""
    N = space.truncation if N is None else N
    return np.conj(basis_values(space, w, N))


def tail_bound(space, index, last_abs_sq):
    """Bound on Σ_{i>=1} |x_{index+i}|² for coordinates obeying x_{k+1} = -(b_k/a_{k+1}) x_k.

    Explicit up to the geometric tail index, then a geometric series with ratio r²
    inflated by the space's safety factor. None when no geometric tail exists.
    """
    report = asymptotics(space.pair)
    if not report.tridiag_less_than_one:
        return None
    r_sq = report.tail_ratio ** 2
    explicit = 0.0
    current = last_abs_sq
    if index < report.geometric_index:
        steps = last_abs_sq * np.cumprod(np.abs(tail_ratios(space.pair, index, report.geometric_index)) ** 2)
        explicit = float(np.sum(steps))
        current = float(steps[-1])
    return explicit + space.tail_safety_factor * current * r_sq / (1.0 - r_sq)


def monomial_expand(space, n, depth):
    """Coordinates α_{n+j} of zⁿ in the orthonormal basis, j = 0..depth."""
    if depth < 0:
        raise DomainError(f"expansion depth must be nonnegative, got {depth}")
    first = 1.0 / space.pair.a.term(n)
    coefficients = np.empty(depth + 1, dtype=complex)
    coefficients[0] = first
    if depth:
        coefficients[1:] = first * np.cumprod(-tail_ratios(space.pair, n, n + depth))
    bound = tail_bound(space, n + depth, abs(coefficients[-1]) ** 2)
    return MonomialExpansion(n=n, coefficients=coefficients, tail_bound=bound, certified=bound is not None)


def monomial_norm_sq(space, n):
    """‖zⁿ‖² = Σ_j |α_{n+j}|² with a certified relative tail below NORM_RTOL."""
    if not asymptotics(space.pair).tridiag_less_than_one:
        expansion = monomial_expand(space, n, space.truncation)
        value = float(np.sum(np.abs(expansion.coefficients) ** 2))
        logger.warning(f'No geometric tail for ||z^{n}||^2; returning lower bound {value:g}')
        return NormValue(value, None, False)

    depth = INITIAL_DEPTH
    while True:
        expansion = monomial_expand(space, n, depth)
        value = float(np.sum(np.abs(expansion.coefficients) ** 2))
        if expansion.tail_bound <= NORM_RTOL * value:
            return NormValue(value, expansion.tail_bound, True)
        if depth >= MAX_DEPTH:
            logger.warning(f'||z^{n}||^2 tail {expansion.tail_bound:g} not below tolerance at depth {depth}')
            return NormValue(value, expansion.tail_bound, False)
        depth *= 2


def forward_substitution(pair, coeffs):
    """Solve a_j x_j + b_{j-1} x_{j-1} = coeffs_j with x_{-1} = 0."""
    coeffs = np.asarray(coeffs, dtype=complex)
    count = len(coeffs)
    if count == 0:
        return np.zeros(0, dtype=complex)
    n = np.arange(count)
    # coeffs_j / a_j and b_{j-1}/a_j in log space, so tiny a_j never underflow
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        sources = np.exp(np.log(coeffs) - pair.a.log_scale(n)) / pair.a.prefactor(n)
    sources[coeffs == 0] = 0.0
    steps = tail_ratios(pair, 0, count - 1)
    x = np.zeros(count, dtype=complex)
    previous = 0.0
    for j in range(count):
        previous = sources[j] - steps[j - 1] * previous if j else sources[j]
        x[j] = previous
    if not np.all(np.isfinite(x)):
        raise DomainError(f"basis coordinates of a degree {count - 1} polynomial overflow double precision")
    return x


def coeffs_to_basis(space, coeffs):
    """Basis coordinates of the polynomial with the given power coefficients."""
    if len(coeffs) > space.truncation:
        raise DomainError(f"{len(coeffs)} coefficients exceed truncation {space.truncation}")
    return forward_substitution(space.pair, coeffs)


def basis_to_coeffs(space, coords):
    """Power coefficients of Σ x_n f_n; one entry longer than the input."""
    coords = np.asarray(coords, dtype=complex)
    count = len(coords)
    a = space.pair.a.terms(count)
    b = space.pair.b.terms(count)
    coeffs = np.zeros(count + 1, dtype=complex)
    coeffs[:count] += coords * a
    coeffs[1:] += coords * b
    return coeffs


def polynomial_norm_sq(space, coeffs):
    """Certified ‖p‖² for a polynomial given by power coefficients."""
    coeffs = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    if coeffs.size == 0:
        return NormValue(0.0, 0.0, True)
    head = forward_substitution(space.pair, coeffs)
    degree = len(coeffs) - 1
    head_sq = float(np.sum(np.abs(head) ** 2))
    last = head[-1]

    # Past the degree the coordinates follow x_{k+1} = -(b_k/a_{k+1}) x_k
    certified = asymptotics(space.pair).tridiag_less_than_one
    depth = INITIAL_DEPTH if certified else space.truncation
    while True:
        extension = last * np.cumprod(-tail_ratios(space.pair, degree, degree + depth))
        value = head_sq + float(np.sum(np.abs(extension) ** 2))
        bound = tail_bound(space, degree + depth, abs(extension[-1]) ** 2)
        if bound is None:
            logger.warning(f'No geometric tail for polynomial of degree {degree}; returning lower bound')
            return NormValue(value, None, False)
        if bound <= NORM_RTOL * value:
            return NormValue(value, bound, True)
        if depth >= MAX_DEPTH:
            return NormValue(value, bound, False)
        depth *= 2


def kernel_deriv_norm(space, n):
    """(∂²ⁿk/∂zⁿ∂w̄ⁿ(0,0))^(1/2) = n!·(|a_n|² + |b_{n-1}|²)^(1/2), b_{-1} = 0, in log space."""
    if n < 0:
        raise DomainError(f"derivative order must be nonnegative, got {n}")
    log_sq = 2.0 * space.pair.a.log_abs_term(n)
    if n >= 1:
        log_sq = float(np.logaddexp(log_sq, 2.0 * space.pair.b.log_abs_term(n - 1)))
    log_value = float(gammaln(n + 1)) + 0.5 * log_sq
    value = math.exp(log_value) if log_value < MAX_LOG else None
    return KernelDerivNorm(n=n, value=value, log_value=log_value)


def kernel_derivative_coords(space, n, count=None):
    """Basis coordinates of the functional f ↦ f⁽ⁿ⁾(0)."""
    count = n + 1 if count is None else count
    if count <= n:
        raise DomainError(f"need more than {n} coordinates, got {count}")
    if gammaln(n + 1) >= MAX_LOG:
        raise DomainError(f"{n}! exceeds double precision")
    factorial = float(math.factorial(n))
    coords = np.zeros(count, dtype=complex)
    coords[n] = factorial * np.conj(space.pair.a.term(n))
    if n >= 1:
        coords[n - 1] = factorial * np.conj(space.pair.b.term(n - 1))
    return coords


def norm_estimates(space, n_max):
    """‖zⁿ‖ for n <= n_max and the smallest constants in ‖zⁿ‖ <= M₁/|c_n a_n|, ‖zⁿ‖ <= M₂/|a_n|."""
    report = asymptotics(space.pair)
    values = [monomial_norm_sq(space, n) for n in range(n_max + 1)]
    norms = np.sqrt(np.array([v.value for v in values]))
    a_abs = np.abs(space.pair.a.terms(n_max + 1))
    c_abs = np.abs(diagonal_values(space.pair, n_max + 1))
    c_abs[0] = 0.0

    scaled_a = norms * a_abs
    scaled_c = (norms * c_abs * a_abs)[1:]
    nonzero = scaled_c[c_abs[1:] > 0]

    m2_tail = None
    if report.tridiag_less_than_one and report.geometric_index <= n_max:
        m2_tail = float(np.max(scaled_a[report.geometric_index:]))

    return NormEstimateReport(
        n_max=n_max,
        norms=norms,
        certified=all(v.certified for v in values),
        m1=float(np.max(nonzero)) if nonzero.size else None,
        m2=float(np.max(scaled_a)),
        m2_tail=m2_tail,
        tail_ratio=report.tail_ratio,
        geometric_index=report.geometric_index,
    )
