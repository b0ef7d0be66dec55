"""
Independent oracles for the closed-form computations.

Each oracle recomputes a quantity along a second code path: forward substitution
on evaluated terms for matrix columns and monomial norms, prefix sums of single-step
ratios in plain double loops for the annulus tables.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from app import get_settings
from errors import DomainError, UncertifiedError
from sequences import asymptotics, ratio
from shift_operator import build_matrix
from space import monomial_norm_sq
from spectrum import essential_spectrum

logger = logging.getLogger(__name__)

MAX_ORACLE_DIMENSION = 512
MAX_ORACLE_DEPTH = 4096
# forward substitution stops once this many consecutive terms are negligible
NEGLIGIBLE_RUN = 8
NEGLIGIBLE_RTOL = 1e-20


@dataclass(frozen=True)
class OracleReport:
    name: str
    instance: str
    deviation: float
    tolerance: float

    @property
    def passed(self):
        return self.deviation <= self.tolerance

    def to_dict(self):
        return {
            'name': self.name,
            'instance': self.instance,
            'deviation': self.deviation,
            'tolerance': self.tolerance,
            'passed': self.passed,
        }


def _describe(pair):
    a, b = pair.a, pair.b
    return (f'a=({a.coefficient}, {a.base}, {a.power}, {len(a.overrides)} overrides), '
            f'b=({b.coefficient}, {b.base}, {b.power}, {len(b.overrides)} overrides)')


def _scaled_deviation(computed, reference):
    computed = np.asarray(computed)
    reference = np.asarray(reference)
    return float(np.max(np.abs(computed - reference)) / max(1.0, float(np.max(np.abs(reference)))))


def _solve_basis(pair, coeffs, count):
    """x with a_j x_j + b_{j-1} x_{j-1} = coeffs_j for j < count, terms evaluated one by one."""
    x = []
    previous = 0j
    for j in range(count):
        value = coeffs[j] if j < len(coeffs) else 0j
        if j:
            value -= pair.b.term(j - 1) * previous
        previous = value / pair.a.term(j)
        x.append(previous)
    return np.array(x, dtype=complex)


def oracle_matrix_columns(space, N=64, tol=1e-10, matrix=None):
    """Column n of the matrix against the basis coordinates of B f_n by forward substitution."""
    if N > MAX_ORACLE_DIMENSION:
        raise DomainError(f"column oracle supports N <= {MAX_ORACLE_DIMENSION}, got {N}")
    entries = build_matrix(space, N).entries if matrix is None else np.asarray(matrix)
    pair = space.pair
    worst = 0.0
    for n in range(N):
        power_coeffs = [0j] * n + [pair.a.term(n), pair.b.term(n)]
        shifted = power_coeffs[1:]
        reference = _solve_basis(pair, shifted, N)
        worst = max(worst, _scaled_deviation(entries[:, n], reference))
    return OracleReport(name="matrix_columns", instance=f'{_describe(pair)}, N={N}', deviation=worst,
                        tolerance=tol)


def _forward_norm_sq(pair, n):
    """Σ_j |x_j|² for zⁿ = Σ x_j f_j, marching until the terms are negligible."""
    x = 1.0 / pair.a.term(n)
    total = abs(x) ** 2
    quiet = 0
    for j in range(n + 1, n + MAX_ORACLE_DEPTH):
        x = -pair.b.term(j - 1) * x / pair.a.term(j)
        step = abs(x) ** 2
        total += step
        quiet = quiet + 1 if step <= NEGLIGIBLE_RTOL * total else 0
        if quiet >= NEGLIGIBLE_RUN:
            break
    return total


def oracle_monomial_norms(space, n_max=100, tol=1e-10):
    """‖zⁿ‖² from the closed-form expansion against forward substitution, relative deviation."""
    if not asymptotics(space.pair).tridiag_less_than_one:
        raise UncertifiedError("monomial norm oracle needs limsup |b_n/a_(n+1)| < 1")
    worst = 0.0
    for n in range(n_max + 1):
        reference = _forward_norm_sq(space.pair, n)
        computed = monomial_norm_sq(space, n).value
        worst = max(worst, abs(computed - reference) / reference)
    return OracleReport(name="monomial_norms", instance=f'{_describe(space.pair)}, n_max={n_max}',
                        deviation=worst, tolerance=tol)


def _step_logs(pair, count):
    """Prefix sums of log|a_{j+1}/a_j| - log|ρ_a|, one ratio per step."""
    j = np.arange(count)
    steps = np.log(np.abs(ratio(pair.a, j + 1, pair.a, j))) - math.log(abs(pair.a.base))
    return np.concatenate(([0.0], np.cumsum(steps)))


def oracle_annulus(pair, horizons=((50, 2000),), tol=1e-12):
    """Finite-horizon annulus tables against double loops over step ratios; analytic radii against |ρ_a|."""
    worst = 0.0
    for n_max, k_max in horizons:
        annulus = essential_spectrum(pair, n_max, k_max)
        prefix = _step_logs(pair, k_max + n_max)
        log_base = math.log(abs(pair.a.base))
        for n in range(1, n_max + 1):
            smallest = None
            largest = None
            for k in range(1, k_max + 1):
                value = math.exp(log_base + (prefix[k + n] - prefix[k]) / n)
                smallest = value if smallest is None or value < smallest else smallest
                largest = value if largest is None or value > largest else largest
            worst = max(worst,
                        abs(annulus.inner_by_n[n - 1] - smallest) / smallest,
                        abs(annulus.outer_by_n[n - 1] - largest) / largest)
        # overrides move the tables but never the analytic radii
        radius = abs(pair.a.base)
        worst = max(worst, abs(annulus.inner_radius - radius), abs(annulus.outer_radius - radius))
    return OracleReport(name="annulus", instance=f'{_describe(pair)}, horizons={list(horizons)}',
                        deviation=worst, tolerance=tol)


ORACLES = ("matrix", "norms", "annulus")


def run_all(space, N=64, n_max=100, horizons=((50, 2000),), which=ORACLES, max_workers=None):
    """Run the selected oracles in a thread pool; reports come back in ORACLES order."""
    jobs = {
        "matrix": lambda: oracle_matrix_columns(space, N),
        "norms": lambda: oracle_monomial_norms(space, n_max),
        "annulus": lambda: oracle_annulus(space.pair, horizons),
    }
    selected = [name for name in ORACLES if name in which]
    workers = max_workers or get_settings().max_workers

    logger.info(f"🔍 Running {len(selected)} oracle(s)...")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        reports = list(pool.map(lambda name: jobs[name](), selected))

    for report in reports:
        if report.passed:
            logger.info(f"✅ {report.name}: deviation {report.deviation:.3e} <= {report.tolerance:.0e}")
        else:
            logger.error(f"❌ {report.name}: deviation {report.deviation:.3e} > {report.tolerance:.0e}")
    return reports
