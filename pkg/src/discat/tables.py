"""Finite sample spaces and observed frequency tables.

Categories are 1-based integer codes. A table over ``k`` variables with
``levels = (J_1, ..., J_k)`` covers the full cartesian product of codes,
including cells that were never observed.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    EmptyTable,
    InputError,
    MissingValue,
    OutOfRangeCategory,
    RaggedRow,
)

Outcome = tuple  # tuple of 1-based category codes


@dataclass(frozen=True)
class ContingencyTable:
    """Observed counts ``N_z`` over the product space ``prod(levels)``.

    ``counts`` is a dense integer array of shape ``levels``; entry
    ``counts[z_1 - 1, ..., z_k - 1]`` holds ``N_z``.
    """

    levels: tuple
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.shape != tuple(self.levels):
            raise InputError(f"counts shape {counts.shape} does not match levels {self.levels}")
        if np.any(counts < 0):
            raise InputError("counts must be nonnegative")
        counts = counts.astype(np.int64)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "levels", tuple(int(j) for j in self.levels))

    @property
    def arity(self) -> int:
        return len(self.levels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.levels))

    def outcomes(self) -> list:
        """All outcomes of the sample space in row-major (C) order."""
        return list(itertools.product(*(range(1, j + 1) for j in self.levels)))

    def count(self, z: Sequence[int]) -> int:
        self._check_outcome(z)
        return int(self.counts[tuple(c - 1 for c in z)])

    def frequency(self, z: Sequence[int]) -> float:
        """Empirical relative frequency ``N_z / N``."""
        if self.total == 0:
            raise EmptyTable("frequency of an empty table is undefined")
        return self.count(z) / self.total

    def frequencies(self) -> np.ndarray:
        """Flattened vector of relative frequencies in :meth:`outcomes` order."""
        if self.total == 0:
            raise EmptyTable("frequency of an empty table is undefined")
        return self.counts.ravel() / self.total

    def support(self) -> dict:
        """Mapping of observed outcomes to their (positive) counts."""
        idx = np.argwhere(self.counts > 0)
        return {tuple(int(i) + 1 for i in row): int(self.counts[tuple(row)]) for row in idx}

    def _check_outcome(self, z):
        if len(z) != self.arity:
            raise RaggedRow(f"outcome {tuple(z)} has length {len(z)}, expected {self.arity}")
        for j, (c, lev) in enumerate(zip(z, self.levels)):
            if not 1 <= c <= lev:
                raise OutOfRangeCategory(f"category {c} of variable {j + 1} outside 1..{lev}")

    # construction -----------------------------------------------------

    @classmethod
    def from_raw(cls, rows: Iterable[Sequence[int]], levels: Sequence[int]) -> "ContingencyTable":
        """Cross-tabulate raw observations (one row per respondent)."""
        levels = tuple(int(j) for j in levels)
        k = len(levels)
        arr = np.asarray([tuple(r) for r in rows], dtype=object)
        if arr.size == 0:
            return cls(levels, np.zeros(levels, dtype=np.int64))
        for r in arr:
            if len(r) != k:
                raise RaggedRow(f"row {tuple(r)} has length {len(r)}, expected {k}")
        codes = np.array([list(r) for r in arr], dtype=np.int64)
        return cls.from_codes(codes, levels)

    @classmethod
    def from_codes(cls, codes: np.ndarray, levels: Sequence[int]) -> "ContingencyTable":
        """Fast path for an ``(N, k)`` integer array of category codes."""
        levels = tuple(int(j) for j in levels)
        codes = np.asarray(codes, dtype=np.int64)
        if codes.ndim != 2 or codes.shape[1] != len(levels):
            raise RaggedRow(f"expected an (N, {len(levels)}) array of codes, got shape {codes.shape}")
        lev = np.asarray(levels)
        bad = (codes < 1) | (codes > lev)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise OutOfRangeCategory(
                f"row {i + 1}: category {codes[i, j]} of variable {j + 1} outside 1..{levels[j]}"
            )
        flat = np.ravel_multi_index(tuple((codes - 1).T), levels) if len(codes) else np.empty(0, int)
        counts = np.bincount(flat, minlength=int(np.prod(levels))).reshape(levels)
        return cls(levels, counts)

    @classmethod
    def from_mapping(cls, counts: dict, levels: Sequence[int]) -> "ContingencyTable":
        levels = tuple(int(j) for j in levels)
        dense = np.zeros(levels, dtype=np.int64)
        tmp = cls(levels, dense)
        for z, n in counts.items():
            tmp._check_outcome(z)
            dense[tuple(c - 1 for c in z)] += int(n)
        return cls(levels, dense)

    def marginal(self, axis: int) -> np.ndarray:
        other = tuple(i for i in range(self.arity) if i != axis)
        return self.counts.sum(axis=other)

    # long CSV ---------------------------------------------------------

    def to_long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"c{j + 1}" for j in range(self.arity)] + ["count"])
        for z, n in zip(self.outcomes(), self.counts.ravel()):
            w.writerow(list(z) + [int(n)])
        return buf.getvalue()

    @classmethod
    def read_long_csv(cls, text: str, levels: Sequence[int] | None = None) -> "ContingencyTable":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty CSV: header row required") from None
        header = [h.strip() for h in header]
        if not header or header[-1] != "count":
            raise InputError("long-form table needs columns c1..ck,count")
        k = len(header) - 1
        expected = [f"c{j + 1}" for j in range(k)]
        if header[:-1] != expected:
            missing = [e for e in expected if e not in header]
            raise InputError(f"long-form table: missing column {missing[0] if missing else header}")
        cells = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != k + 1:
                raise RaggedRow(f"line {lineno}: expected {k + 1} fields, got {len(row)}")
            if any(f.strip() == "" for f in row):
                raise MissingValue(f"line {lineno}: empty field")
            try:
                vals = [int(f) for f in row]
            except ValueError:
                raise InputError(f"line {lineno}: non-integer field") from None
            z, n = tuple(vals[:k]), vals[k]
            if n < 0:
                raise InputError(f"line {lineno}: negative count")
            cells[z] = cells.get(z, 0) + n
        if levels is None:
            if not cells:
                raise InputError("cannot infer levels from an empty long-form table")
            levels = tuple(max(z[j] for z in cells) for j in range(k))
        return cls.from_mapping(cells, levels)


def read_raw_csv(text: str, cols: Sequence[str] | None = None) -> tuple[np.ndarray, list]:
    """Parse a raw observation CSV (header row, one respondent per row).

    Returns the ``(N, q)`` integer code matrix and the selected column names.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError("empty CSV: header row required") from None
    if cols is None:
        cols = header
    idx = []
    for c in cols:
        if c not in header:
            raise InputError(f"column '{c}' not found in CSV header")
        idx.append(header.index(c))
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise RaggedRow(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
        vals = []
        for i in idx:
            f = row[i].strip()
            if f == "":
                raise MissingValue(f"line {lineno}: empty field in column '{header[i]}'")
            try:
                vals.append(int(f))
            except ValueError:
                raise InputError(f"line {lineno}: non-integer value '{f}' in column '{header[i]}'") from None
        rows.append(vals)
    return np.asarray(rows, dtype=np.int64).reshape(len(rows), len(idx)), list(cols)
