"""Core domain types for M-mode unitary networks.

A network is an M x M unitary U mapping input modes to output modes; a state
of N bosons on it is described by an occupation vector per side.  This module
owns the validated matrix and occupation types, Haar-random network
generation, enumeration of output configurations and of contingency tables
with fixed margins, and the column-crossing counting polynomial used for flop
accounting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

import numpy as np

from .errors import BadDimension, MarginMismatch, NotUnitary

UNITARITY_TOL = 1e-10


class NetworkMatrix:
    """M x M complex unitary, validated at construction.

    The entries array is frozen (read-only) so instances can be shared freely
    across threads.
    """

    __slots__ = ("entries", "dim", "unitarity_deviation")

    def __init__(self, entries):
        a = np.array(entries, dtype=np.complex128)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise BadDimension(f"expected a square matrix, got shape {a.shape}")
        m = a.shape[0]
        if m < 2:
            raise BadDimension(f"network needs at least 2 modes, got {m}")
        dev = float(np.max(np.abs(a.conj().T @ a - np.eye(m))))
        if dev > UNITARITY_TOL:
            raise NotUnitary(dev)
        a.flags.writeable = False
        self.entries = a
        self.dim = m
        self.unitarity_deviation = dev

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.entries.imag == 0.0))

    def dagger(self) -> "NetworkMatrix":
        return NetworkMatrix(self.entries.conj().T)

    def permuted(self, perm: Iterable[int]) -> "NetworkMatrix":
        """Relabel modes: rows and columns reordered by the same permutation."""
        idx = np.asarray(list(perm), dtype=int)
        return NetworkMatrix(self.entries[np.ix_(idx, idx)])

    def __repr__(self) -> str:
        return f"NetworkMatrix(dim={self.dim})"


def validate_unitary(matrix) -> NetworkMatrix:
    """Validate a square complex matrix as a network unitary.

    Raises NotUnitary when max |U^dag U - I| exceeds 1e-10, BadDimension for
    non-square input or fewer than two modes.
    """
    return NetworkMatrix(matrix)


def beam_splitter() -> NetworkMatrix:
    """The symmetric two-mode beam splitter [[-1,1],[1,1]]/sqrt(2)."""
    s = 1.0 / math.sqrt(2.0)
    return NetworkMatrix([[-s, s], [s, s]])


def tritter() -> NetworkMatrix:
    """The canonical symmetric three-mode multiport (discrete Fourier matrix)."""
    w = complex(math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3))
    s = 1.0 / math.sqrt(3.0)
    return NetworkMatrix([[s, s, s], [s, s * w, s * w.conjugate()], [s, s * w.conjugate(), s * w]])


def haar_random_unitary(dim: int, seed: int) -> NetworkMatrix:
    """Haar-distributed random unitary, deterministic per seed.

    QR of a complex Ginibre matrix with the phase fix: each column of Q is
    divided by the phase of the corresponding diagonal entry of R.  Plain QR
    is not Haar-distributed; the phase fix restores invariance.
    """
    if dim < 2:
        raise BadDimension(f"network needs at least 2 modes, got {dim}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return NetworkMatrix(q)


@dataclass(frozen=True)
class Occupation:
    """Per-mode particle counts (a length-M vector of nonnegative integers).

    The zero-total occupation is permitted only as an enumeration artifact
    (the single N=0 output configuration); every amplitude-level operation
    requires a total of at least one particle.
    """

    counts: tuple

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError(f"occupation counts must be nonnegative, got {counts}")
        if len(counts) == 0:
            raise ValueError("occupation needs at least one mode")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of(cls, *counts: int) -> "Occupation":
        return cls(tuple(counts))

    @classmethod
    def parse(cls, text: str) -> "Occupation":
        try:
            counts = tuple(int(part.strip()) for part in text.split(","))
        except ValueError as exc:
            raise ValueError(f"cannot parse occupation {text!r}: {exc}") from None
        return cls(counts)

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def modes(self) -> int:
        return len(self.counts)

    @property
    def strictly_positive(self) -> bool:
        return all(c >= 1 for c in self.counts)

    def fractions(self) -> np.ndarray:
        if self.total == 0:
            raise ValueError("fractions undefined for a zero-total occupation")
        return np.array(self.counts, dtype=float) / self.total

    def __iter__(self):
        return iter(self.counts)

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, i):
        return self.counts[i]

    def __str__(self):
        return ",".join(str(c) for c in self.counts)


def check_margins(n: Occupation, m: Occupation):
    """Raise MarginMismatch unless both occupations describe the same N and M."""
    if n.modes != m.modes:
        raise MarginMismatch(f"mode counts differ: {n.modes} vs {m.modes}")
    if n.total != m.total:
        raise MarginMismatch(f"particle totals differ: {n.total} vs {m.total}")


def output_config_count(modes: int, total: int) -> int:
    """Number of ways to place `total` bosons on `modes` modes: C(M+N-1, N)."""
    return math.comb(modes + total - 1, total)


def enumerate_output_configs(modes: int, total: int) -> list:
    """All length-M compositions of N in lexicographic order.

    The list has C(M+N-1, N) entries; the count is exact integer arithmetic,
    so there is no overflow, but callers scanning large networks should check
    output_config_count first.
    """
    if modes < 1:
        raise BadDimension("need at least one mode")
    if total < 0:
        raise ValueError("total must be nonnegative")
    configs = []
    prefix = [0] * modes

    def fill(pos: int, remaining: int):
        if pos == modes - 1:
            prefix[pos] = remaining
            configs.append(Occupation(tuple(prefix)))
            return
        for c in range(remaining + 1):
            prefix[pos] = c
            fill(pos + 1, remaining - c)

    fill(0, total)
    return configs


@dataclass(frozen=True)
class ContingencyTable:
    """M x M nonnegative integer matrix with prescribed row and column sums."""

    entries: tuple
    row_sums: Occupation
    col_sums: Occupation

    @classmethod
    def from_entries(cls, entries) -> "ContingencyTable":
        rows = tuple(tuple(int(v) for v in row) for row in entries)
        if any(v < 0 for row in rows for v in row):
            raise ValueError("table entries must be nonnegative")
        m = len(rows)
        if any(len(row) != m for row in rows):
            raise ValueError("table must be square")
        row_sums = Occupation(tuple(sum(row) for row in rows))
        col_sums = Occupation(tuple(sum(rows[k][l] for k in range(m)) for l in range(m)))
        return cls(rows, row_sums, col_sums)

    @property
    def total(self) -> int:
        return self.row_sums.total


def enumerate_contingency_tables(n: Occupation, m: Occupation) -> Iterator[ContingencyTable]:
    """Yield every nonnegative integer matrix with row sums n and column sums m.

    Lazy, margin-respecting recursion: row k is filled with a bounded
    composition of n_k, pruning branches where the remaining row total cannot
    absorb the remaining column budget.  Each table is produced exactly once.
    The number of tables grows exponentially with N, so only small-N oracles
    should consume this exhaustively.
    """
    check_margins(n, m)
    modes = n.modes
    remaining_cols = list(m.counts)
    rows_out = []

    def fill_row(k: int):
        if k == modes:
            # margins hold by construction: the last row exhausts the columns
            yield ContingencyTable(tuple(rows_out), n, m)
            return
        row = [0] * modes

        def fill_cell(l: int, remaining: int):
            if l == modes - 1:
                if remaining <= remaining_cols[l]:
                    row[l] = remaining
                    remaining_cols[l] -= remaining
                    rows_out.append(tuple(row))
                    yield from fill_row(k + 1)
                    rows_out.pop()
                    remaining_cols[l] += remaining
                    row[l] = 0
                return
            for v in range(min(remaining, remaining_cols[l]) + 1):
                row[l] = v
                remaining_cols[l] -= v
                yield from fill_cell(l + 1, remaining - v)
                remaining_cols[l] += v
            row[l] = 0

        yield from fill_cell(0, n.counts[k])

    yield from fill_row(0)


def count_contingency_tables(n: Occupation, m: Occupation) -> int:
    """Exact table count by dynamic programming over column budgets."""
    check_margins(n, m)
    from functools import lru_cache

    cols0 = tuple(m.counts)

    @lru_cache(maxsize=None)
    def count(k: int, cols: tuple) -> int:
        if k == n.modes:
            return 1 if all(c == 0 for c in cols) else 0
        total = 0
        target = n.counts[k]

        def comps(l: int, remaining: int, acc: list):
            nonlocal total
            if l == len(cols) - 1:
                if remaining <= cols[l]:
                    new_cols = tuple(c - a for c, a in zip(cols, acc + [remaining]))
                    total += count(k + 1, new_cols)
                return
            for v in range(min(remaining, cols[l]) + 1):
                comps(l + 1, remaining - v, acc + [v])

        comps(0, target, [])
        return total

    return count(0, cols0)


def count_tables_by_crossed_columns(m: Occupation) -> list:
    """Coefficients T_0..T_N of P(z) = prod_k (1 + z + ... + z^{m_k}).

    T_R counts the ways to cross out R column duplicates in the reduced
    inclusion-exclusion sum; the partial sum T_0 + ... + T_{N-1} equals
    prod(m_k + 1) - 1, the number of terms the exact engine visits.
    """
    coeffs = [1]
    for mk in m.counts:
        factor = [1] * (mk + 1)
        new = [0] * (len(coeffs) + mk)
        for i, a in enumerate(coeffs):
            if a == 0:
                continue
            for j in range(mk + 1):
                new[i + j] += a
        coeffs = new
    return coeffs


def fisher_yates_probability(table: ContingencyTable) -> Fraction:
    """Probability of a contingency table under independent margins.

    Exact rational value: prod(n_k!) prod(m_l!) / (N! prod(S_kl!)).  Summed
    over all tables with the same margins this is exactly 1.
    """
    n = table.row_sums
    m = table.col_sums
    num = 1
    for c in n.counts:
        num *= math.factorial(c)
    for c in m.counts:
        num *= math.factorial(c)
    den = math.factorial(table.total)
    for row in table.entries:
        for v in row:
            den *= math.factorial(v)
    return Fraction(num, den)
