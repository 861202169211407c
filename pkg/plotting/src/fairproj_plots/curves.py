"""Curve CSV parsing.

A curve file is the delimited sweep output: a fixed five-column header
followed by one row per grid point.  Rows whose metric cells are blank
record grid points where the solve failed; they carry no plottable data
and are dropped at load time.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

EXPECTED_HEADER = ["alpha", "accuracy", "meo", "statistical_parity", "runtime_s"]


class CurveFormatError(ValueError):
    """A curve file disagrees with the expected schema."""


class CurvePoint(NamedTuple):
    alpha: float
    accuracy: float
    meo: float
    statistical_parity: float
    runtime_s: float | None


@dataclass
class CurveFile:
    path: str
    label: str
    points: list[CurvePoint]


def load_curve(path: str, label: str | None = None) -> CurveFile:
    """Parse one curve file; the legend label defaults to the file stem."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != EXPECTED_HEADER:
            raise CurveFormatError(
                f"{path}: header must be exactly {','.join(EXPECTED_HEADER)!r}, "
                f"got {','.join(header) if header else '<empty file>'!r}"
            )
        points = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(EXPECTED_HEADER):
                raise CurveFormatError(
                    f"{path}: row {lineno} has {len(row)} cells, expected "
                    f"{len(EXPECTED_HEADER)}"
                )
            if "" in row[1:4]:
                continue
            try:
                alpha, accuracy, meo, parity = (float(cell) for cell in row[:4])
                runtime = float(row[4]) if row[4] != "" else None
            except ValueError:
                raise CurveFormatError(
                    f"{path}: row {lineno} holds a non-numeric cell"
                ) from None
            points.append(CurvePoint(alpha, accuracy, meo, parity, runtime))
    return CurveFile(path=str(path), label=label or Path(path).stem, points=points)
