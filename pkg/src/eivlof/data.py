"""Primary and validation samples and their CSV representation.

Files are UTF-8 CSV with a header row. Lines starting with ``#`` are
comments. Primary files have columns ``y,w1,...,wp``; validation files have
``w1,...,wp,x1,...,xp``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionMismatch, NonFiniteValue, ParseError


@dataclass(frozen=True)
class PrimarySample:
    """The n observed (y, w) pairs."""

    y: NDArray[np.float64]
    w: NDArray[np.float64]

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        w = np.asarray(self.w, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if w.ndim != 2 or w.shape[0] != y.shape[0]:
            raise DimensionMismatch(f"y has {y.shape[0]} rows but w has shape {w.shape}")
        if y.shape[0] < 2:
            raise DimensionMismatch("primary sample needs at least 2 rows")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            raise NonFiniteValue("primary sample contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.w.shape[1]


@dataclass(frozen=True)
class ValidationSample:
    """The N observed (w~, x~) pairs."""

    w_tilde: NDArray[np.float64]
    x_tilde: NDArray[np.float64]

    def __post_init__(self):
        w = np.asarray(self.w_tilde, dtype=float)
        x = np.asarray(self.x_tilde, dtype=float)
        if w.ndim == 1:
            w = w[:, None]
        if x.ndim == 1:
            x = x[:, None]
        if w.shape != x.shape or w.ndim != 2:
            raise DimensionMismatch(f"w~ has shape {w.shape} but x~ has shape {x.shape}")
        if w.shape[0] < 2:
            raise DimensionMismatch("validation sample needs at least 2 rows")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(x))):
            raise NonFiniteValue("validation sample contains non-finite values")
        object.__setattr__(self, "w_tilde", w)
        object.__setattr__(self, "x_tilde", x)

    @property
    def N(self) -> int:
        return self.w_tilde.shape[0]

    @property
    def p(self) -> int:
        return self.w_tilde.shape[1]


def _read_table(path) -> tuple[list[str], NDArray[np.float64]]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [(i + 1, line) for i, line in enumerate(fh)
                 if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise ParseError(f"{path}: file has no header")
    header_line, header_text = lines[0]
    header = [h.strip() for h in next(csv.reader([header_text]))]
    if not header or any(not h for h in header):
        raise ParseError(f"{path}: malformed header", row=header_line)
    rows = []
    for lineno, text in lines[1:]:
        fields = next(csv.reader([text]))
        if len(fields) != len(header):
            raise ParseError(f"{path}: expected {len(header)} fields, found {len(fields)}", row=lineno)
        vals = []
        for col, field in enumerate(fields):
            try:
                v = float(field)
            except ValueError:
                raise ParseError(f"{path}: cannot parse {field.strip()!r} as a number",
                                 row=lineno, column=header[col]) from None
            if not math.isfinite(v):
                raise NonFiniteValue(f"{path}: non-finite value {field.strip()!r}",
                                     row=lineno, column=header[col])
            vals.append(v)
        rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return header, np.array(rows, dtype=float)


def _expect_columns(path, header, expected):
    if header != expected:
        raise ParseError(f"{path}: expected header {','.join(expected)}, got {','.join(header)}", row=1)


def load_primary(path: str | os.PathLike) -> PrimarySample:
    header, table = _read_table(path)
    p = len(header) - 1
    if p < 1:
        raise ParseError(f"{path}: primary file needs columns y,w1,...,wp", row=1)
    _expect_columns(path, header, ["y"] + [f"w{k}" for k in range(1, p + 1)])
    return PrimarySample(y=table[:, 0], w=table[:, 1:])


def load_validation(path: str | os.PathLike, expected_p: int | None = None) -> ValidationSample:
    header, table = _read_table(path)
    if len(header) % 2 or not header:
        raise ParseError(f"{path}: validation file needs columns w1..wp,x1..xp", row=1)
    p = len(header) // 2
    if expected_p is not None and p != expected_p:
        raise DimensionMismatch(f"{path}: validation has p={p}, primary has p={expected_p}")
    _expect_columns(path, header, [f"w{k}" for k in range(1, p + 1)] + [f"x{k}" for k in range(1, p + 1)])
    return ValidationSample(w_tilde=table[:, :p], x_tilde=table[:, p:])


def _write(path, header, table):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in table:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def save_primary(sample: PrimarySample, path: str | os.PathLike) -> None:
    header = ["y"] + [f"w{k}" for k in range(1, sample.p + 1)]
    _write(path, header, np.column_stack([sample.y, sample.w]))


def save_validation(sample: ValidationSample, path: str | os.PathLike) -> None:
    p = sample.p
    header = [f"w{k}" for k in range(1, p + 1)] + [f"x{k}" for k in range(1, p + 1)]
    _write(path, header, np.column_stack([sample.w_tilde, sample.x_tilde]))
