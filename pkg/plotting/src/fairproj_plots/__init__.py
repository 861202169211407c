"""Standalone renderer for fairness-accuracy trade-off curves.

Consumes the curve CSV files written by ``fairproj sweep`` (or anything
else emitting the same schema) and draws accuracy against a fairness
column, one series per file.
"""

from .curves import EXPECTED_HEADER, CurveFile, CurveFormatError, CurvePoint, load_curve
from .render import X_CHOICES, render

__all__ = [
    "EXPECTED_HEADER",
    "CurveFile",
    "CurveFormatError",
    "CurvePoint",
    "X_CHOICES",
    "load_curve",
    "render",
]
