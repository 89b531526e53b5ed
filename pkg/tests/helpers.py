"""Shared test utilities: independent oracles and comparison metrics."""

import math
from functools import lru_cache
from itertools import permutations, product

import numpy as np

from bosonic_saddle import LogComplex


def rel_error(a: LogComplex, b: LogComplex) -> float:
    """|a - b| / max(|a|, |b|), evaluated at a common scale; 0 if both zero."""
    if a.is_zero and b.is_zero:
        return 0.0
    if a.is_zero or b.is_zero:
        return 1.0
    top = max(a.log_mag, b.log_mag)
    za = a.scaled_by_exp2(-int(top / math.log(2.0)))
    zb = b.scaled_by_exp2(-int(top / math.log(2.0)))
    return abs(za - zb) / max(abs(za), abs(zb))


def rel_error_c(a: complex, b: complex) -> float:
    scale = max(abs(a), abs(b))
    if scale == 0.0:
        return 0.0
    return abs(a - b) / scale


@lru_cache(maxsize=32)
def _perm_gather_indices(n: int) -> np.ndarray:
    perms = np.array(list(permutations(range(n))), dtype=np.intp)
    return perms + (np.arange(n) * n)[None, :]


def permanent_permutation_sum(a: np.ndarray) -> complex:
    """Full permutation enumeration, vectorized; the independent grid oracle."""
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    idx = _perm_gather_indices(n)
    gathered = a.ravel()[idx]
    out = gathered[:, 0].copy()
    for c in range(1, n):
        out *= gathered[:, c]
    return complex(out.sum())


@lru_cache(maxsize=32)
def _assignment_table(modes: int, total: int):
    """All modes**total type sequences, grouped by their count vector."""
    seqs = np.array(list(product(range(modes), repeat=total)), dtype=np.intp)
    groups = {}
    for i, seq in enumerate(seqs):
        key = tuple(int(np.sum(seq == l)) for l in range(modes))
        groups.setdefault(key, []).append(i)
    groups = {k: np.array(v, dtype=np.intp) for k, v in groups.items()}
    return seqs, groups


def permanent_assignment_sum(u: np.ndarray, n_counts, m_counts) -> complex:
    """Permutation sum of U[n|m], grouped by column-type sequences.

    Every permutation of the repeated columns with the same type sequence
    contributes the identical product, prod(m_l!) times; enumerating the
    distinct sequences and weighting by that multiplicity is the same
    permutation sum, independent of the inclusion-exclusion engine.
    """
    modes = u.shape[0]
    total = sum(n_counts)
    if total == 0:
        return 1.0 + 0j
    rows = np.repeat(np.arange(modes), n_counts)
    b = u[rows]  # (N, M)
    seqs, groups = _assignment_table(modes, total)
    idx = groups[tuple(int(c) for c in m_counts)]
    sub = seqs[idx]  # (K, N)
    gathered = b[np.arange(total)[None, :], sub]
    out = gathered[:, 0].copy()
    for c in range(1, total):
        out *= gathered[:, c]
    weight = 1.0
    for mk in m_counts:
        weight *= math.factorial(mk)
    return complex(out.sum()) * weight
