"""
Matrix-valued tridiagonal kernels Q*·diag(k_q)·Q.

B on such a space is unitarily equivalent to the direct sum of the channel
shifts, so classification works channel by channel: hypercyclicity follows
the slowest channel, mixing and chaos need every channel. The hypercyclic
subspace verdict is decided only when every channel is in the strong regime,
from the per-channel essential-spectrum check; otherwise it is indeterminate.
"""

import logging
from dataclasses import dataclass, field
from functools import cmp_to_key

import numpy as np

from errors import DomainError, ParseError
from sequences import UNIT_TOL, SequencePair, a_form, asymptotics
from space import TridiagonalSpace, kernel_eval
from dynamics import (CHAOS_INDETERMINATE, INDETERMINATE, ChaosVerdict, ClauseVerdict, DynamicsReport,
                      Verdict)
from spectrum import SubspaceResult, hc_subspace_check

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-10
DS_HC = "ds-hc-min"
DS_MIX = "ds-mix-all"
DS_CHAOS = "ds-chaos-all"
DS_SUBSPACE = "ds-subspace-channel"


def unitarity_deviation(q):
    q = np.asarray(q, dtype=complex)
    return float(np.max(np.abs(q @ q.conj().T - np.eye(q.shape[0]))))


@dataclass(frozen=True, eq=False)
class MatrixKernelSpace:
    """Matrix kernel Q*·diag(k_q)·Q built from d scalar channels."""

    d: int
    Q: np.ndarray
    channels: tuple  # SequencePair per channel
    raw_a: tuple | None = None  # A_0, A_1, ... as d×d arrays, verification only
    raw_b: tuple | None = None
    truncation: int = 256

    def __post_init__(self):
        q = np.asarray(self.Q, dtype=complex)
        if q.shape != (self.d, self.d):
            raise ParseError(f"Q has shape {q.shape}, expected ({self.d}, {self.d})")
        if len(self.channels) != self.d:
            raise ParseError(f"{len(self.channels)} channels given for d = {self.d}")
        if not all(isinstance(c, SequencePair) for c in self.channels):
            raise ParseError("every channel must be a SequencePair")
        deviation = unitarity_deviation(q)
        if deviation > UNITARY_TOL:
            raise ParseError(f"Q is not unitary: max |QQ* - I| = {deviation:.3e}")
        for name in ("raw_a", "raw_b"):
            tables = getattr(self, name)
            if tables is not None:
                tables = tuple(np.asarray(t, dtype=complex) for t in tables)
                for n, table in enumerate(tables):
                    if table.shape != (self.d, self.d):
                        raise ParseError(f"{name[-1].upper()}_{n} has shape {table.shape}, expected ({self.d}, {self.d})")
                object.__setattr__(self, name, tables)
        object.__setattr__(self, "Q", q)
        object.__setattr__(self, "channels", tuple(self.channels))
        for index, channel in enumerate(self.channels):
            if not asymptotics(channel).tridiag_less_than_one:
                logger.warning(f'Channel {index} has limsup |b_n/a_(n+1)| >= 1')

    def __repr__(self):
        return f'<MatrixKernelSpace d={self.d}>'

    @property
    def has_raw_tables(self):
        return self.raw_a is not None and self.raw_b is not None

    def channel_space(self, q):
        return TridiagonalSpace(self.channels[q], truncation=self.truncation)


def raw_tables_from_channels(mspace, count):
    """A_n = Q*·diag(a_n^(q))·Q and B_n = Q*·diag(b_n^(q))·Q for n < count."""
    q = mspace.Q
    q_adj = q.conj().T
    a_values = np.array([channel.a.terms(count) for channel in mspace.channels])
    b_values = np.array([channel.b.terms(count) for channel in mspace.channels])
    raw_a = tuple(q_adj @ np.diag(a_values[:, n]) @ q for n in range(count))
    raw_b = tuple(q_adj @ np.diag(b_values[:, n]) @ q for n in range(count))
    return raw_a, raw_b


def mk_kernel_eval(mspace, z, w, N=None):
    """Q*·diag(k_q(z, w))·Q with each k_q truncated at N."""
    N = mspace.truncation if N is None else N
    values = np.array([kernel_eval(mspace.channel_space(q), z, w, N) for q in range(mspace.d)])
    return mspace.Q.conj().T @ np.diag(values) @ mspace.Q


def _adjoint(matrix):
    return matrix.conj().T


def mk_kernel_eval_direct(mspace, z, w, N=None):
    """Σ_{n<N} (A_n + B_n z)(A_n* + B_n* w̄) zⁿw̄ⁿ from raw tables."""
    N = mspace.truncation if N is None else N
    if mspace.has_raw_tables:
        raw_a, raw_b = mspace.raw_a, mspace.raw_b
    else:
        raw_a, raw_b = raw_tables_from_channels(mspace, N)
    if len(raw_a) < N or len(raw_b) < N:
        raise DomainError(f"raw tables hold {min(len(raw_a), len(raw_b))} terms, need {N}")
    w_bar = complex(w).conjugate()
    u = complex(z) * w_bar
    total = np.zeros((mspace.d, mspace.d), dtype=complex)
    for n in range(N):
        left = raw_a[n] + raw_b[n] * z
        right = _adjoint(raw_a[n]) + _adjoint(raw_b[n]) * w_bar
        total += left @ right * u ** n
    return total


@dataclass(frozen=True)
class MatrixDiagnostic:
    passed: bool
    deviation: float
    tol: float
    worst_index: int | None  # sample index or table index
    worst_matrix: str | None  # "Q", "A", "B" or "K"

    def to_dict(self):
        return {
            'passed': self.passed,
            'deviation': self.deviation,
            'tol': self.tol,
            'worst_index': self.worst_index,
            'worst_matrix': self.worst_matrix,
        }


def diagonalization_check(mspace, indices=None, tol=1e-10):
    """Verify Q·A_n·Q* and Q·B_n·Q* are diagonal with the channel values on the diagonal."""
    if not mspace.has_raw_tables:
        raise DomainError("diagonalization check needs raw A_n, B_n tables")
    count = min(len(mspace.raw_a), len(mspace.raw_b))
    indices = range(count) if indices is None else indices
    q, q_adj = mspace.Q, mspace.Q.conj().T

    worst = (unitarity_deviation(q), None, "Q")
    for n in indices:
        if n >= count:
            raise DomainError(f"index {n} outside raw tables of length {count}")
        for name, tables, attr in (("A", mspace.raw_a, "a"), ("B", mspace.raw_b, "b")):
            rotated = q @ tables[n] @ q_adj
            expected = np.array([getattr(channel, attr).term(n) for channel in mspace.channels])
            deviation = float(np.max(np.abs(rotated - np.diag(expected))))
            if deviation > worst[0]:
                worst = (deviation, n, name)

    deviation, index, matrix = worst
    passed = deviation <= tol
    if not passed:
        logger.warning(f'Diagonalization fails at {matrix}_{index}: deviation {deviation:.3e}')
    return MatrixDiagnostic(passed=passed, deviation=deviation, tol=tol, worst_index=index,
                            worst_matrix=matrix)


def direct_sum_kernel_check(mspace, samples, tol=1e-10, N=None):
    """Compare the raw-table kernel with Q*·diag(k_q)·Q at sample points (z, w)."""
    worst = (0.0, None)
    for index, (z, w) in enumerate(samples):
        deviation = float(np.max(np.abs(mk_kernel_eval_direct(mspace, z, w, N) - mk_kernel_eval(mspace, z, w, N))))
        if deviation > worst[0]:
            worst = (deviation, index)
    deviation, index = worst
    passed = deviation <= tol
    if not passed:
        logger.warning(f'Direct-sum kernel mismatch at sample {index}: {deviation:.3e}')
    return MatrixDiagnostic(passed=passed, deviation=deviation, tol=tol, worst_index=index,
                            worst_matrix="K" if index is not None else None)


def growth_key(channel):
    """(|ρ|, p, |C|) of the channel's a-sequence"""
    family = channel.a
    return (abs(family.base), family.power, abs(family.coefficient))


def _compare_keys(left, right):
    for x, y in zip(left, right):
        if abs(x - y) > UNIT_TOL:
            return -1 if x < y else 1
    return 0


def slowest_channel(mspace):
    keys = [growth_key(channel) for channel in mspace.channels]
    return min(range(mspace.d), key=cmp_to_key(lambda i, j: _compare_keys(keys[i], keys[j])))


@dataclass(frozen=True)
class DirectSumReport:
    report: DynamicsReport
    slowest_channel: int
    experimental: bool  # λ != 1
    lambda_abs: float = field(compare=False)

    def to_dict(self):
        data = self.report.to_dict()
        data['slowest_channel'] = self.slowest_channel
        data['experimental'] = self.experimental
        return data


def direct_sum_classify(mspace, lambda_=1.0):
    """Classify B on the direct sum by its channels; λ != 1 is an experimental sweep mode."""
    lambda_abs = abs(lambda_)
    if lambda_abs == 0:
        raise DomainError("λ must be nonzero")
    experimental = abs(lambda_abs - 1.0) > UNIT_TOL
    if experimental:
        logger.warning(f'Direct-sum classification at |lambda| = {lambda_abs:g} is experimental')

    slowest = slowest_channel(mspace)
    reports = [asymptotics(channel) for channel in mspace.channels]
    strong = all(r.ratio_bounded and r.tridiag_less_than_one for r in reports)
    subspace = SubspaceResult(None, "direct-sum")

    if not strong:
        report = DynamicsReport(
            boundedness="not_proven_bounded[channel-hypotheses]", bounded=False, iff_regime=False,
            c_nonvanishing=all(r.c_nonvanishing for r in reports), hypercyclic=INDETERMINATE,
            mixing=INDETERMINATE, chaotic=CHAOS_INDETERMINATE, hypercyclic_subspace=subspace,
            lambda_abs=lambda_abs,
        )
        return DirectSumReport(report=report, slowest_channel=slowest, experimental=experimental,
                               lambda_abs=lambda_abs)

    forms = [a_form(channel.a).scaled(lambda_abs) for channel in mspace.channels]
    hypercyclic = forms[slowest].diverges()
    mixing = all(form.diverges() for form in forms)
    chaotic = all(form.inverse_square_summable() for form in forms)
    # the essential spectrum of the sum is the union of the channel annuli
    subspace = SubspaceResult(
        hypercyclic and any(hc_subspace_check(channel, lambda_abs).value for channel in mspace.channels),
        DS_SUBSPACE)

    report = DynamicsReport(
        boundedness="bounded[strong]",
        bounded=True,
        iff_regime=True,
        c_nonvanishing=all(r.c_nonvanishing for r in reports),
        hypercyclic=ClauseVerdict(Verdict.YES_IFF if hypercyclic else Verdict.NO_IFF, DS_HC),
        mixing=ClauseVerdict(Verdict.YES_IFF if mixing else Verdict.NO_IFF, DS_MIX),
        chaotic=ClauseVerdict(ChaosVerdict.YES if chaotic else ChaosVerdict.NO, DS_CHAOS),
        hypercyclic_subspace=subspace,
        lambda_abs=lambda_abs,
    )
    logger.debug(f'Direct sum (slowest channel {slowest}): hypercyclic {hypercyclic}, '
                 f'mixing {mixing}, chaotic {chaotic}')
    return DirectSumReport(report=report, slowest_channel=slowest, experimental=experimental,
                           lambda_abs=lambda_abs)
