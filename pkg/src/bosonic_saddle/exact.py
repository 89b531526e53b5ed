"""Exact amplitude engines for repeated-row/column permanents.

The boson transition amplitude is per(U[n|m]) / sqrt(prod n_k! m_k!), where
U[n|m] repeats row k of the network matrix n_k times and column l m_l times.
For such matrices the inclusion-exclusion permanent collapses to a sum over
column-crossing vectors r with 0 <= r_l <= m_l:

    per(U[n|m]) = sum_r (-1)^{sum r} prod_k C(m_k, r_k) (sum_l (m_l - r_l) U_kl)^{n_k}

with the single point r = m excluded, i.e. prod_k (m_k + 1) - 1 terms in
total and O(N^{M+1}) flops.  The series alternates and can cancel down many
orders of magnitude below its largest term, so the engine tracks the
cancellation condition and transparently re-runs ill-conditioned sums at
higher precision (mpmath); results always come back as LogComplex.

A brute-force permutation-sum permanent (the reference oracle) and a
contingency-table average (an independent small-N oracle) are provided for
cross-checking, together with classical-particle probabilities and the flop
accounting for the reduced inclusion-exclusion sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import mpmath as mp
import numpy as np

from .errors import MarginMismatch, TooLarge
from .logcomplex import LogComplex, ScaledComplexSum, _frexp_int
from .network import (
    NetworkMatrix,
    Occupation,
    check_margins,
    enumerate_contingency_tables,
    fisher_yates_probability,
)

# accept the float64 pass when the cancellation loses no more than this many digits
_DOUBLE_COND_LIMIT = 4.3
# extra decimal digits requested beyond the observed cancellation loss
_MP_HEADROOM = 24
_MP_MAX_PASSES = 5


@dataclass(frozen=True)
class RepeatedMatrixSpec:
    """A matrix U[n|m] of repeated rows/columns, kept in factored form."""

    base: NetworkMatrix
    row_reps: Occupation
    col_reps: Occupation

    def __post_init__(self):
        if self.row_reps.modes != self.base.dim or self.col_reps.modes != self.base.dim:
            raise MarginMismatch("occupation length must equal the matrix dimension")
        check_margins(self.row_reps, self.col_reps)

    @property
    def size(self) -> int:
        return self.row_reps.total

    def materialize(self) -> np.ndarray:
        """The explicit N x N matrix (for small-N oracle comparisons only)."""
        rows = np.repeat(np.arange(self.base.dim), self.row_reps.counts)
        cols = np.repeat(np.arange(self.base.dim), self.col_reps.counts)
        return self.base.entries[np.ix_(rows, cols)]


@dataclass(frozen=True)
class FlopEstimate:
    """Lower/upper flop bounds for the reduced inclusion-exclusion sum."""

    lower: int
    upper: int


@dataclass
class RyserStats:
    """Instrumentation record for one permanent evaluation."""

    terms: int = 0
    weighted_terms: int = 0  # sum over r of s(r) = #{l : r_l < m_l}
    instrumented_flops: int = 0  # N * weighted_terms
    max_term_log: float = -math.inf
    condition_log10: float = 0.0
    dps_used: int = 0  # 0 means float64 only
    passes: int = 1


def flop_estimate(n: Occupation, m: Occupation) -> FlopEstimate:
    """Flop bounds N*(prod(m_k+1)-1) < F < M*N*(prod(m_k+1)-1).

    With uniform m_k = N/M the upper bound grows as N^{M+1}.
    """
    total_points = 1
    for mk in m.counts:
        total_points *= mk + 1
    n_total = n.total
    modes = m.modes
    base = n_total * (total_points - 1)
    return FlopEstimate(lower=base, upper=modes * base)


def permanent_naive(matrix) -> LogComplex:
    """Permutation-sum permanent: sum over all n! permutations.

    The reference oracle; guarded at n <= 10 because of factorial growth.
    """
    a = np.asarray(matrix, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"square matrix required, got shape {a.shape}")
    n = a.shape[0]
    if n > 10:
        raise TooLarge(f"permutation oracle limited to n <= 10, got {n}")
    if n == 0:
        return LogComplex.one()
    rows = [tuple(row) for row in a.tolist()]
    total = 0j
    idx = range(n)
    for perm in permutations(idx):
        prod = 1.0 + 0j
        for i in idx:
            prod *= rows[i][perm[i]]
        total += prod
    return LogComplex.from_complex(total)


# -- reduced inclusion-exclusion engine --------------------------------------


def _ryser_double(a, n_counts, m_counts, zero_snap: float = 0.0):
    """Pure float64 pass over the reduced inclusion-exclusion sum.

    a is a row-major list of lists of Python complex.  Returns
    (LogComplex, RyserStats).
    """
    modes = len(n_counts)
    n_total = sum(n_counts)
    binom_tables = [
        [_frexp_int(math.comb(mk, r)) for r in range(mk + 1)] for mk in m_counts
    ]
    total_points = 1
    for mk in m_counts:
        total_points *= mk + 1
    terms = total_points - 1

    r = [0] * modes
    w = [
        sum(m_counts[l] * a[k][l] for l in range(modes)) for k in range(modes)
    ]
    parity = 1.0
    open_cols = sum(1 for mk in m_counts if mk > 0)  # s(r) = #{l : r_l < m_l}
    weighted = 0
    since_refresh = 0
    mrange = range(modes)
    frexp, ldexp = math.frexp, math.ldexp

    # Kahan-compensated sum anchored at the running max binary exponent,
    # inlined here because this loop dominates the engine's runtime
    anchor = 0
    acc_s = 0j
    acc_c = 0j
    acc_abs = 0.0
    max_exp2 = None
    max_mag = 0.0

    for idx in range(terms):
        weighted += open_cols
        mant = parity + 0j
        e = 0
        for k in mrange:
            nk = n_counts[k]
            wk = w[k]
            # naive powering keeps the per-term cost linear in n_k, matching
            # the documented flop model
            pm = 1.0 + 0j
            pe = 0
            for _ in range(nk):
                pm *= wk
                am = abs(pm)
                if am > 1e150 or am < 1e-150:
                    if am == 0.0:
                        pe = 0
                        break
                    _, kk = frexp(am)
                    pm = complex(ldexp(pm.real, -kk), ldexp(pm.imag, -kk))
                    pe += kk
            if pm == 0j:
                mant = 0j
                break
            bm, be = binom_tables[k][r[k]]
            mant *= pm * bm
            e += pe + be
        a_mant = abs(mant)
        if a_mant != 0.0:
            _, kk = frexp(a_mant)
            if kk:
                mant = complex(ldexp(mant.real, -kk), ldexp(mant.imag, -kk))
                a_mant = abs(mant)
                e += kk
            if max_exp2 is None or (e, a_mant) > (max_exp2, max_mag):
                max_exp2, max_mag = e, a_mant
            d = e - anchor
            if acc_abs == 0.0 and acc_s == 0j:
                anchor = e
                acc_s = mant
                acc_abs = a_mant
            else:
                if d > 0:
                    acc_s = complex(ldexp(acc_s.real, -d), ldexp(acc_s.imag, -d))
                    acc_c = complex(ldexp(acc_c.real, -d), ldexp(acc_c.imag, -d))
                    acc_abs = ldexp(acc_abs, -d) if d <= 4400 else 0.0
                    anchor = e
                    d = 0
                if d >= -2100:
                    t = mant if d == 0 else complex(ldexp(mant.real, d), ldexp(mant.imag, d))
                    acc_abs += abs(t)
                    yk = t - acc_c
                    tot = acc_s + yk
                    acc_c = (tot - acc_s) - yk
                    acc_s = tot

        if idx == terms - 1:
            break
        # advance the odometer (last index fastest), updating w incrementally
        j = modes - 1
        while r[j] == m_counts[j]:
            back = m_counts[j]
            r[j] = 0
            if back > 0:
                open_cols += 1
                for k in mrange:
                    w[k] += back * a[k][j]
                if back % 2:
                    parity = -parity
            j -= 1
        r[j] += 1
        parity = -parity
        if r[j] == m_counts[j]:
            open_cols -= 1
        for k in mrange:
            w[k] -= a[k][j]
        since_refresh += 1
        if since_refresh >= 256:
            since_refresh = 0
            w = [
                sum((m_counts[l] - r[l]) * a[k][l] for l in range(modes))
                for k in range(modes)
            ]

    value = LogComplex(acc_s, anchor)
    if max_exp2 is None:
        max_term_log = -math.inf
        cond = 0.0
    else:
        max_term_log = math.log(max_mag) + max_exp2 * math.log(2.0)
        vmag = abs(acc_s)
        if zero_snap and vmag <= zero_snap * ldexp(max_mag, min(max_exp2 - anchor, 4400)):
            value = LogComplex.zero()
        if vmag == 0.0:
            cond = math.inf if acc_abs > 0 else 0.0
        else:
            cond = math.log10(acc_abs / vmag) if acc_abs > 0 else 0.0
    stats = RyserStats(
        terms=terms,
        weighted_terms=weighted,
        instrumented_flops=n_total * weighted,
        max_term_log=max_term_log,
        condition_log10=cond,
        dps_used=0,
        passes=1,
    )
    return value, stats


@lru_cache(maxsize=512)
def _small_grid(m_counts):
    """Cached odometer grid and per-point weights for small margins."""
    modes = len(m_counts)
    shape = tuple(mk + 1 for mk in m_counts)
    grid = np.indices(shape).reshape(modes, -1).T  # odometer points, row-major
    grid = grid[:-1]  # drop r == m
    rsum = grid.sum(axis=1)
    signs = np.where(rsum % 2 == 0, 1.0, -1.0)
    binprod = np.ones(len(grid))
    for k, mk in enumerate(m_counts):
        table = np.array([math.comb(mk, rr) for rr in range(mk + 1)], dtype=float)
        binprod *= table[grid[:, k]]
    open_cols = (grid < np.array(m_counts)).sum(axis=1)
    weighted = int(open_cols.sum())
    rem = np.array(m_counts, dtype=float) - grid
    return grid, signs, binprod, weighted, rem


def _ryser_small(a_np, n_counts, m_counts):
    """Vectorized float64 pass, valid only for small, bounded problems."""
    modes = len(n_counts)
    n_total = sum(n_counts)
    _, signs, binprod, weighted, rem = _small_grid(tuple(m_counts))
    w = rem @ a_np.T  # (T, M) row sums
    powers = w ** np.asarray(n_counts)
    terms = signs * binprod * powers.prod(axis=1)
    value = terms.sum()
    mags = np.abs(terms)
    max_mag = float(mags.max()) if len(mags) else 0.0
    abs_sum = float(mags.sum())
    vmag = abs(value)
    if vmag == 0.0:
        cond = math.inf if abs_sum > 0 else 0.0
    else:
        cond = math.log10(abs_sum / vmag) if abs_sum > 0 else 0.0
    stats = RyserStats(
        terms=len(terms),
        weighted_terms=weighted,
        instrumented_flops=n_total * weighted,
        max_term_log=math.log(max_mag) if max_mag > 0 else -math.inf,
        condition_log10=cond,
        dps_used=0,
        passes=1,
    )
    return LogComplex.from_complex(complex(value)), stats


def _ryser_mp(a, n_counts, m_counts, dps: int):
    """High-precision pass; the accuracy authority for ill-conditioned sums.

    Returns (LogComplex, max_term_log, condition_log10).
    """
    modes = len(n_counts)
    with mp.workdps(dps):
        a_mp = [[mp.mpc(z) for z in row] for row in a]
        m_arr = list(m_counts)
        total = mp.mpc(0)
        abs_sum = mp.mpf(0)
        max_term = mp.mpf(0)
        r = [0] * modes
        total_points = 1
        for mk in m_counts:
            total_points *= mk + 1
        for idx in range(total_points - 1):
            sign = -1 if sum(r) % 2 else 1
            term = mp.mpc(sign)
            for k in range(modes):
                row_sum = mp.mpc(0)
                for l in range(modes):
                    c = m_arr[l] - r[l]
                    if c:
                        row_sum += c * a_mp[k][l]
                term *= mp.mpf(math.comb(m_counts[k], r[k])) * row_sum ** n_counts[k]
            total += term
            mag = abs(term)
            abs_sum += mag
            if mag > max_term:
                max_term = mag
            j = modes - 1
            while r[j] == m_counts[j]:
                r[j] = 0
                j -= 1
            r[j] += 1
        tot_mag = abs(total)
        if max_term == 0:
            return LogComplex.zero(), -math.inf, 0.0
        max_log = float(mp.log(max_term))
        if tot_mag == 0:
            return LogComplex.zero(), max_log, math.inf
        cond = float(mp.log10(abs_sum / tot_mag))
        value = LogComplex.from_log_polar(float(mp.log(tot_mag)), float(mp.arg(total)))
    return value, max_log, cond


def _ryser_adaptive(a_np, n_counts, m_counts):
    """Float64 first, escalating to mpmath until the cancellation is resolved.

    A sum that stays at noise level pass after pass (magnitude below
    10**-(dps-8) of the largest term even after a confirmation pass at twice
    the working precision) is reported as the canonical exact zero: these are
    the structurally suppressed amplitudes.
    """
    modes = len(n_counts)
    small = (
        sum(n_counts) <= 10
        and float(np.max(np.abs(a_np))) <= 1e3
    )
    if small:
        value, stats = _ryser_small(a_np, n_counts, m_counts)
    else:
        a_list = [list(map(complex, row)) for row in a_np]
        value, stats = _ryser_double(a_list, n_counts, m_counts)
    if stats.condition_log10 <= _DOUBLE_COND_LIMIT:
        return value, stats

    a_list = [list(map(complex, row)) for row in a_np]
    dps = 30 if not math.isfinite(stats.condition_log10) else int(stats.condition_log10) + _MP_HEADROOM
    dps = max(dps, 30)
    zero_confirmed = False
    for p in range(_MP_MAX_PASSES):
        stats.passes += 1
        stats.dps_used = dps
        value, max_log, cond = _ryser_mp(a_list, n_counts, m_counts, dps)
        stats.max_term_log = max_log
        stats.condition_log10 = cond
        if max_log == -math.inf:
            return LogComplex.zero(), stats
        noise_floor = max_log - (dps - 8) * math.log(10)
        if value.is_zero or value.log_mag <= noise_floor:
            if zero_confirmed:
                return LogComplex.zero(), stats
            zero_confirmed = True
            dps = 2 * dps + 20
            continue
        zero_confirmed = False
        if dps - cond >= 14:
            return value, stats
        dps = int(cond) + _MP_HEADROOM + 6
    return value, stats


def permanent_ryser_repeated(spec: RepeatedMatrixSpec, precision: str = "adaptive") -> LogComplex:
    """per(U[n|m]) via the reduced inclusion-exclusion sum.

    precision:
      "adaptive" (default) - float64 with automatic high-precision recovery
      "double" - single float64 pass (used for runtime-complexity benchmarks)
    """
    value, _ = permanent_ryser_repeated_with_stats(spec, precision)
    return value


def permanent_ryser_repeated_with_stats(
    spec: RepeatedMatrixSpec, precision: str = "adaptive"
):
    return _permanent_repeated_raw(
        spec.base.entries, spec.row_reps.counts, spec.col_reps.counts, precision
    )


def _permanent_repeated_raw(a_np, n_counts, m_counts, precision: str = "adaptive"):
    n_counts = tuple(int(c) for c in n_counts)
    m_counts = tuple(int(c) for c in m_counts)
    if sum(n_counts) != sum(m_counts):
        raise MarginMismatch("row and column repetitions must agree in total")
    if sum(n_counts) == 0:
        return LogComplex.one(), RyserStats(terms=0)
    a_np = np.asarray(a_np, dtype=np.complex128)
    if precision == "double":
        a_list = [list(map(complex, row)) for row in a_np]
        return _ryser_double(a_list, n_counts, m_counts)
    if precision != "adaptive":
        raise ValueError(f"unknown precision mode {precision!r}")
    return _ryser_adaptive(a_np, n_counts, m_counts)


# -- amplitudes and probabilities ---------------------------------------------


def log_factorial_norm(n: Occupation, m: Occupation) -> float:
    """log sqrt(prod n_k! m_k!), the Fock normalization denominator."""
    s = 0.0
    for c in n.counts:
        s += math.lgamma(c + 1)
    for c in m.counts:
        s += math.lgamma(c + 1)
    return 0.5 * s


def amplitude_exact(
    U: NetworkMatrix, n: Occupation, m: Occupation, precision: str = "adaptive"
) -> LogComplex:
    """Exact transition amplitude <m|n> = per(U[n|m]) / sqrt(prod n_k! m_k!)."""
    check_margins(n, m)
    if n.modes != U.dim:
        raise MarginMismatch("occupation length must equal the matrix dimension")
    per, _ = _permanent_repeated_raw(U.entries, n.counts, m.counts, precision)
    return per * LogComplex.from_real_log(-log_factorial_norm(n, m))


def amplitude_via_contingency_average(
    U: NetworkMatrix, n: Occupation, m: Occupation
) -> LogComplex:
    """Amplitude as N! times the margin-constrained table average of prod U^S.

    Each contingency table S with margins (n, m) carries the exact rational
    probability prod(n_k!) prod(m_l!) / (N! prod S_kl!); the amplitude is
    N! <prod_kl U_kl^S_kl> / sqrt(prod n_k! m_k!).  Independent of the
    inclusion-exclusion engine; exponential in N, hence the N <= 8 guard.
    """
    check_margins(n, m)
    if n.total > 8:
        raise TooLarge("contingency-table oracle limited to N <= 8")
    if n.modes != U.dim:
        raise MarginMismatch("occupation length must equal the matrix dimension")
    a = U.entries
    acc = ScaledComplexSum()
    for table in enumerate_contingency_tables(n, m):
        prob = float(fisher_yates_probability(table))
        factor = 1.0 + 0j
        for k, row in enumerate(table.entries):
            for l, s in enumerate(row):
                if s:
                    factor *= complex(a[k, l]) ** s
        acc.add_scaled(prob * factor, 0)
    value = acc.result()
    n_fact = LogComplex.from_real_log(math.lgamma(n.total + 1))
    return value * n_fact * LogComplex.from_real_log(-log_factorial_norm(n, m))


def classical_probability(U: NetworkMatrix, n: Occupation, m: Occupation) -> float:
    """Transition probability for identical classical particles.

    per(|U|^2[n|m]) / prod m_k!; nonnegative, and summing over all output
    configurations gives 1.
    """
    check_margins(n, m)
    a = np.abs(U.entries) ** 2
    per, _ = _permanent_repeated_raw(a, n.counts, m.counts)
    if per.is_zero:
        return 0.0
    log_p = per.log_mag - sum(math.lgamma(c + 1) for c in m.counts)
    return math.exp(log_p)


def bell_classical_probability(modes: int, m: Occupation) -> float:
    """Closed-form classical probability N!/(M^N prod m_k!) for |U_kl|^2 = 1/M."""
    n_total = m.total
    log_p = (
        math.lgamma(n_total + 1)
        - n_total * math.log(modes)
        - sum(math.lgamma(c + 1) for c in m.counts)
    )
    return math.exp(log_p)
