import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from errors import DomainError
from sequences import (INFINITY, UNIT_TOL, ZERO, AsymptoticForm, ExtendedReal, asymptotics, c_form,
                       diagonal_values, ratio, tail_ratios, tridiag_form)

logger = logging.getLogger(__name__)

MAX_DIMENSION = 4096
MIN_HORIZON = 16


def complex_cell(value):
    """Serialise a complex as [re, im]"""
    return [float(value.real), float(value.imag)]


@dataclass(frozen=True, eq=False)
class OperatorMatrixTruncation:
    """Top-left N×N block of B in the orthonormal basis."""

    N: int
    entries: np.ndarray
    pair: object  # generating SequencePair

    def __repr__(self):
        return f'<OperatorMatrixTruncation N={self.N}>'

    def entry(self, i, j):
        return complex(self.entries[i, j])

    def column(self, n):
        return self.entries[:, n].copy()

    def to_dict(self):
        return {
            'N': self.N,
            'entries': [[complex_cell(v) for v in row] for row in self.entries],
        }

    def to_csv_rows(self):
        """Row-major cells formatted as "re,im"."""
        return [[f'{float(v.real)!r},{float(v.imag)!r}' for v in row] for row in self.entries]


def matrix_entries(pair, N):
    entries = np.zeros((N, N), dtype=complex)
    n = np.arange(1, N)
    with np.errstate(over="ignore", invalid="ignore"):
        entries[n - 1, n] = ratio(pair.a, n, pair.a, n - 1)
        diagonal = diagonal_values(pair, N)
        r = tail_ratios(pair, 0, N - 1)
        for column in range(N):
            entries[column, column] = diagonal[column]
            if column < N - 1:
                # column n, row n+j: diag_n·Π_{k<j}(-b_{n+k}/a_{n+k+1})
                entries[column + 1:, column] = diagonal[column] * np.cumprod(-r[column:])
    return entries


def build_matrix(space, N):
    """Truncated matrix of B; rows i < N-1 are exact since B is lower Hessenberg."""
    if N < 2:
        raise DomainError(f"matrix dimension must be at least 2, got {N}")
    if N > MAX_DIMENSION:
        raise DomainError(f"matrix dimension {N} exceeds {MAX_DIMENSION}")
    logger.debug(f'Building {N}x{N} matrix of the backward shift')
    return OperatorMatrixTruncation(N=N, entries=matrix_entries(space.pair, N), pair=space.pair)


def apply_shift_coeffs(coeffs):
    """Coefficient backward shift: drop the constant term."""
    return np.asarray(coeffs, dtype=complex)[1:].copy()


def apply_forward_coeffs(coeffs):
    """S(zⁿ) = zⁿ⁺¹ on power coefficients"""
    return np.concatenate(([0j], np.asarray(coeffs, dtype=complex)))


def band_maxima(entries):
    """max |entry| on each subdiagonal m = 1..N-1"""
    N = entries.shape[0]
    return np.array([np.max(np.abs(np.diagonal(entries, -m))) for m in range(1, N)])


class BoundednessVerdict(Enum):
    BOUNDED = "bounded"
    NOT_PROVEN_BOUNDED = "not_proven_bounded"


@dataclass(frozen=True, eq=False)
class BoundednessReport:
    necessary_ok: bool  # ratio and c_n bounded
    sufficient_ok: bool  # both sup conditions and a convergent band-norm series
    strong_ok: bool  # sup |a_{n+1}/a_n| < ∞ and limsup |b_n/a_{n+1}| < 1
    band_series_converges: bool
    verdict: BoundednessVerdict
    provenance: str
    tridiag_limsup: ExtendedReal
    horizon: int
    band_partial_sums: np.ndarray  # advisory

    @property
    def bounded(self):
        return self.verdict is BoundednessVerdict.BOUNDED

    def label(self):
        return f'{self.verdict.value}[{self.provenance}]'

    def to_dict(self):
        return {
            'necessary_ok': self.necessary_ok,
            'sufficient_ok': self.sufficient_ok,
            'strong_ok': self.strong_ok,
            'band_series_converges': self.band_series_converges,
            'verdict': self.label(),
            'tridiag_limsup': self.tridiag_limsup.to_json(),
            'horizon': self.horizon,
            'band_partial_sums': [float(v) for v in self.band_partial_sums],
        }


def band_series_converges(pair):
    """Whether Σ_m ‖F_m‖ < ∞, decided from the family parameters."""
    report = asymptotics(pair)
    if report.tridiag_less_than_one:
        return True
    limsup = report.tridiag_limsup
    if limsup.infinite or limsup.value > 1.0 + UNIT_TOL:
        return False
    # limsup = 1: band products telescope to ((j+1)/(j+m+1))^p_a, so the series
    # converges only for p_a > 1 with c_n eventually zero
    return pair.a.power > 1.0 + UNIT_TOL and c_form(pair) is None


def boundedness_report(pair, horizon=64):
    """Necessary, sufficient and strong boundedness conditions with band partial sums as evidence."""
    if horizon < MIN_HORIZON:
        raise DomainError(f"horizon must be at least {MIN_HORIZON}, got {horizon}")
    report = asymptotics(pair)
    necessary = report.ratio_bounded and report.c_bounded
    strong = report.ratio_bounded and report.tridiag_less_than_one
    converges = band_series_converges(pair)
    sufficient = report.ratio_bounded and report.c_bounded and converges

    with np.errstate(over="ignore", invalid="ignore"):
        partial_sums = np.cumsum(band_maxima(matrix_entries(pair, horizon)))

    if sufficient:
        verdict = BoundednessVerdict.BOUNDED
        provenance = "strong" if strong else "band-series"
    else:
        verdict = BoundednessVerdict.NOT_PROVEN_BOUNDED
        provenance = "necessary-violated" if not necessary else "band-series-diverges"
    logger.debug(f'Boundedness: {verdict.value} ({provenance}), limsup = {report.tridiag_limsup}')

    return BoundednessReport(
        necessary_ok=necessary,
        sufficient_ok=sufficient,
        strong_ok=strong,
        band_series_converges=converges,
        verdict=verdict,
        provenance=provenance,
        tridiag_limsup=report.tridiag_limsup,
        horizon=horizon,
        band_partial_sums=partial_sums,
    )


def band_limit(pair, m):
    """lim_j |c_j|·Π_{k=j}^{j+m-1}|b_k/a_{k+1}|"""
    c = c_form(pair)
    if c is None:
        return ZERO
    t = tridiag_form(pair)
    with np.errstate(over="ignore"):
        coeff = t.coeff_abs ** m * t.modulus ** (m * (m - 1) / 2.0)
    product = AsymptoticForm(coeff, t.modulus ** m, m * t.power)
    limit = c.times(product).limit()
    if not limit.infinite and not math.isfinite(limit.value):
        return INFINITY
    return limit


@dataclass(frozen=True, eq=False)
class Decomposition:
    """[B] = [B_w] + [D] + Σ[F_m] at truncation N with M bands."""

    N: int
    M: int
    weights: np.ndarray  # w_n = a_n/a_{n-1}, n = 1..N-1
    diagonal: np.ndarray  # (b_0/a_0, c_1, c_2, ...)
    bands: tuple  # band m holds entries (j+m, j), j = 0..N-1-m
    band_max: np.ndarray  # max |entry| of each band on the truncation
    band_limits: tuple  # analytic limits of the band entries
    band_norms: tuple  # max of the two, as ExtendedReal
    residual: float  # max entrywise gap on the kept bands
    first_covered_column: int  # columns from here on lie entirely within the kept bands
    dropped_max: float  # largest entry below band M

    def band_matrix(self, m):
        return np.diag(self.bands[m - 1], -m)

    def reconstruct(self):
        total = np.diag(self.weights, 1) + np.diag(self.diagonal)
        for m in range(1, self.M + 1):
            total = total + self.band_matrix(m)
        return total

    def to_dict(self):
        return {
            'N': self.N,
            'M': self.M,
            'weights': [complex_cell(v) for v in self.weights],
            'diagonal': [complex_cell(v) for v in self.diagonal],
            'band_max': [float(v) for v in self.band_max],
            'band_norms': [v.to_json() for v in self.band_norms],
            'residual': self.residual,
            'first_covered_column': self.first_covered_column,
            'dropped_max': self.dropped_max,
        }


def _closed_form_parts(pair, N, M):
    """Weights, diagonal and bands 1..M straight from the sequences, without the assembled matrix."""
    n = np.arange(1, N)
    with np.errstate(over="ignore", invalid="ignore"):
        weights = np.atleast_1d(ratio(pair.a, n, pair.a, n - 1))
        diagonal = diagonal_values(pair, N)
        steps = -tail_ratios(pair, 0, N - 1)
        # band m at (j+m, j) is diag_j·Π_{k=j}^{j+m-1}(-b_k/a_{k+1})
        bands = []
        products = np.ones(N, dtype=complex)
        for m in range(1, M + 1):
            products = products[:-1] * steps[m - 1:]
            bands.append(diagonal[:N - m] * products)
    return weights, diagonal, tuple(bands)


def decompose(space, N, M):
    """Split the truncated matrix into weighted shift, diagonal and M lower bands."""
    if not 1 <= M < N:
        raise DomainError(f"band count must satisfy 1 <= M < N, got M={M}, N={N}")
    entries = build_matrix(space, N).entries
    weights, diagonal, bands = _closed_form_parts(space.pair, N, M)
    band_max = np.array([np.max(np.abs(band)) for band in bands])
    limits = tuple(band_limit(space.pair, m) for m in range(1, M + 1))
    norms = tuple(max(ExtendedReal.finite(value), limit) for value, limit in zip(band_max, limits))

    reconstructed = np.diag(weights, 1) + np.diag(diagonal)
    for m, band in enumerate(bands, start=1):
        reconstructed += np.diag(band, -m)
    start = max(0, N - 1 - M)
    residual = float(np.max(np.abs(np.triu(entries, -M) - reconstructed)))
    dropped = np.tril(entries, -(M + 1))
    dropped_max = float(np.max(np.abs(dropped))) if M < N - 1 else 0.0
    logger.debug(f'Decomposition N={N} M={M}: residual {residual:g}, dropped {dropped_max:g}')
    return Decomposition(
        N=N, M=M, weights=weights, diagonal=diagonal, bands=bands, band_max=band_max,
        band_limits=limits, band_norms=norms, residual=residual,
        first_covered_column=start, dropped_max=dropped_max,
    )


@dataclass(frozen=True)
class CompactnessDiagnostic:
    ratio_bounded: bool
    tridiag_less_than_one: bool
    c_limit_zero: bool
    certified: bool
    verdict: str
    decay_index: int | None  # rows at or past it have every entry of D + ΣF_m below tol
    tol: float
    N: int

    def to_dict(self):
        return {
            'ratio_bounded': self.ratio_bounded,
            'tridiag_less_than_one': self.tridiag_less_than_one,
            'c_limit_zero': self.c_limit_zero,
            'certified': self.certified,
            'verdict': self.verdict,
            'decay_index': self.decay_index,
            'tol': self.tol,
            'N': self.N,
        }


def compactness_check(space, N=128, tol=1e-8):
    """Check that B - B_w is compact: hypotheses first, then the entrywise decay index."""
    report = asymptotics(space.pair)
    hypotheses = report.ratio_bounded and report.tridiag_less_than_one and report.c_limit_zero
    if not hypotheses:
        return CompactnessDiagnostic(
            ratio_bounded=report.ratio_bounded,
            tridiag_less_than_one=report.tridiag_less_than_one,
            c_limit_zero=report.c_limit_zero,
            certified=False,
            verdict="hypotheses fail; not certified",
            decay_index=None,
            tol=tol,
            N=N,
        )

    perturbation = np.tril(build_matrix(space, N).entries)
    row_max = np.max(np.abs(perturbation), axis=1)
    above = np.nonzero(row_max >= tol)[0]
    decay_index = int(above[-1]) + 1 if above.size else 0
    if decay_index >= N:
        logger.warning(f'Entries of D + sum F_m stay above {tol:g} up to row {N}')
        decay_index = None
    return CompactnessDiagnostic(
        ratio_bounded=True,
        tridiag_less_than_one=True,
        c_limit_zero=True,
        certified=True,
        verdict="K compact (certified by hypotheses)",
        decay_index=decay_index,
        tol=tol,
        N=N,
    )
