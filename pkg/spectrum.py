import logging
from dataclasses import dataclass

import numpy as np

from errors import DomainError
from sequences import UNIT_TOL, asymptotics, divergence_tests, log_abs_ratio

logger = logging.getLogger(__name__)

SUBSPACE_CLAUSE = "subspace-essential-spectrum"


@dataclass(frozen=True, eq=False)
class SpectralAnnulus:
    """Essential spectrum {inner <= |z| <= outer} of B with finite-horizon diagnostics.

    The analytic radii are the verdict. Row n-1 of the tables holds, for each
    k_max' <= k_max, (min or max over 1 <= k <= k_max' of |a_{k+n}/a_k|)^(1/n).
    """

    inner_radius: float
    outer_radius: float
    n_max: int
    k_max: int
    inner_table: np.ndarray
    outer_table: np.ndarray
    overrides_ignored: bool

    @property
    def inner_by_n(self):
        return self.inner_table[:, -1]

    @property
    def outer_by_n(self):
        return self.outer_table[:, -1]

    @property
    def finite_inner(self):
        """sup over n <= n_max of the inner values at k_max"""
        return float(np.max(self.inner_by_n))

    @property
    def finite_outer(self):
        return float(np.min(self.outer_by_n))

    def to_dict(self):
        return {
            'inner': self.inner_radius,
            'outer': self.outer_radius,
            'horizons': {
                'n_max': self.n_max,
                'k_max': self.k_max,
                'finite_inner': self.finite_inner,
                'finite_outer': self.finite_outer,
                'inner_by_n': [float(v) for v in self.inner_by_n],
                'outer_by_n': [float(v) for v in self.outer_by_n],
                'overrides_ignored': self.overrides_ignored,
            },
        }


def essential_spectrum(pair, n_max=50, k_max=2000):
    """Annulus radii |ρ_a| plus running inf/sup tables of |a_{k+n}/a_k|^(1/n), k >= 1."""
    if n_max < 2 or k_max < 2:
        raise DomainError(f"n_max and k_max must be at least 2, got {n_max}, {k_max}")
    radius = abs(pair.a.base)
    k = np.arange(1, k_max + 1)
    inner = np.empty((n_max, k_max))
    outer = np.empty((n_max, k_max))
    for n in range(1, n_max + 1):
        logs = log_abs_ratio(pair.a, k + n, pair.a, k) / n
        inner[n - 1] = np.exp(np.minimum.accumulate(logs))
        outer[n - 1] = np.exp(np.maximum.accumulate(logs))

    annulus = SpectralAnnulus(
        inner_radius=radius,
        outer_radius=radius,
        n_max=n_max,
        k_max=k_max,
        inner_table=inner,
        outer_table=outer,
        overrides_ignored=bool(pair.a.overrides),
    )
    logger.debug(f'Essential spectrum radius {radius:g}; finite horizon '
                 f'[{annulus.finite_inner:g}, {annulus.finite_outer:g}] at ({n_max}, {k_max})')
    return annulus


@dataclass(frozen=True)
class SubspaceResult:
    value: bool | None  # None outside the strong hypotheses
    provenance: str

    def label(self):
        if self.value is None:
            return "indeterminate"
        return f'{"yes" if self.value else "no"}[{self.provenance}]'


def hc_subspace_check(pair, lambda_):
    """λB has a hypercyclic subspace iff sup|λⁿa_n| = ∞ and the inner radius is at most 1/|λ|."""
    lambda_abs = abs(lambda_)
    if lambda_abs == 0:
        raise DomainError("λ must be nonzero")
    report = asymptotics(pair)
    if not (report.ratio_bounded and report.tridiag_less_than_one):
        return SubspaceResult(None, "hypotheses-fail")
    sup_infinite = divergence_tests(pair, lambda_abs).sup_infinite
    inner = abs(pair.a.base)
    return SubspaceResult(sup_infinite and inner * lambda_abs <= 1.0 + UNIT_TOL, SUBSPACE_CLAUSE)
