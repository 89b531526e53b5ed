"""Network matrix file formats and occupation/fraction parsing for the CLI.

JSON format: {"dim": M, "entries": [[[re, im], ...], ...]} row-major.
CSV format: M rows of 2M columns, re/im interleaved.
Occupations are comma-separated integers; margin fractions are
colon-separated rationals like "1/2:1/2".
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .network import NetworkMatrix, Occupation, validate_unitary


def load_matrix(path) -> NetworkMatrix:
    p = Path(path)
    if not p.exists():
        raise OSError(f"matrix file not found: {p}")
    if p.suffix.lower() == ".json":
        return _load_json(p)
    if p.suffix.lower() == ".csv":
        return _load_csv(p)
    raise ValueError(f"unsupported matrix file type: {p.suffix!r} (use .json or .csv)")


def _load_json(p: Path) -> NetworkMatrix:
    with open(p) as fh:
        payload = json.load(fh)
    try:
        dim = int(payload["dim"])
        entries = payload["entries"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix JSON in {p}: {exc}") from None
    a = np.empty((dim, dim), dtype=complex)
    try:
        if len(entries) != dim:
            raise ValueError(f"expected {dim} rows, got {len(entries)}")
        for i, row in enumerate(entries):
            if len(row) != dim:
                raise ValueError(f"row {i} has {len(row)} entries")
            for j, pair in enumerate(row):
                a[i, j] = complex(float(pair[0]), float(pair[1]))
    except (TypeError, IndexError, ValueError) as exc:
        raise ValueError(f"malformed matrix JSON in {p}: {exc}") from None
    return validate_unitary(a)


def _load_csv(p: Path) -> NetworkMatrix:
    rows = []
    with open(p, newline="") as fh:
        for record in csv.reader(fh):
            if not record or record[0].lstrip().startswith("#"):
                continue
            values = [float(v) for v in record]
            if len(values) % 2:
                raise ValueError(f"matrix CSV in {p}: odd column count {len(values)}")
            rows.append([complex(values[2 * j], values[2 * j + 1]) for j in range(len(values) // 2)])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError(f"matrix CSV in {p} is not square")
    return validate_unitary(np.array(rows))


def save_matrix_json(path, matrix: NetworkMatrix):
    payload = {
        "dim": matrix.dim,
        "entries": [
            [[float(z.real), float(z.imag)] for z in row] for row in matrix.entries
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def save_matrix_csv(path, matrix: NetworkMatrix):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in matrix.entries:
            record = []
            for z in row:
                record.extend([repr(float(z.real)), repr(float(z.imag))])
            writer.writerow(record)


def parse_occupation(text: str) -> Occupation:
    return Occupation.parse(text)


def parse_fractions(text: str):
    """Colon-separated rationals, e.g. '1/2:1/2' -> (Fraction(1,2), Fraction(1,2))."""
    parts = [s.strip() for s in text.split(":")]
    if not parts:
        raise ValueError("empty fraction list")
    fracs = tuple(Fraction(s) for s in parts)
    if any(f < 0 for f in fracs):
        raise ValueError(f"fractions must be nonnegative: {text!r}")
    if sum(fracs) != 1:
        raise ValueError(f"fractions must sum to 1, got {sum(fracs)} from {text!r}")
    return fracs


def occupation_from_fractions(fracs, total: int):
    """Occupation total*f if every component is an integer, else None."""
    counts = []
    for f in fracs:
        v = f * total
        if v.denominator != 1:
            return None
        counts.append(int(v))
    return Occupation(tuple(counts))
