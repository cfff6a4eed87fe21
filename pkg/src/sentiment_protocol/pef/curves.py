"""Sampling a function's payoff curve for plotting."""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable, Sequence

import numpy as np

from ..core import Continuous, SentimentChoice
from ..errors import BadGrid
from .functions import PEFunction


def parse_grid(spec: str) -> list[float]:
    """``"start:stop:steps"`` -> ``steps`` evenly spaced positive points, endpoints included."""
    try:
        start_s, stop_s, steps_s = spec.split(":")
        start, stop, steps = float(start_s), float(stop_s), int(steps_s)
    except ValueError:
        raise BadGrid(f"grid must look like start:stop:steps, got {spec!r}") from None
    if steps < 1 or not (math.isfinite(start) and math.isfinite(stop)):
        raise BadGrid(f"bad grid {spec!r}")
    if start <= 0 or stop < start:
        raise BadGrid(f"grid needs 0 < start <= stop, got {spec!r}")
    return [float(x) for x in np.linspace(start, stop, steps)]


def curve_samples(f: PEFunction, s: SentimentChoice, grid: Sequence[float]) -> list[tuple[float, float]]:
    """``(o, f(o, s) / c)`` for each grid point."""
    scale = float(f.scale)
    return [(float(o), f.evaluate(Continuous(o), s) / scale) for o in grid]


def samples_to_csv(samples: Iterable[tuple[float, float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["outcome", "normalized_value"])
    for o, v in samples:
        w.writerow([repr(o), repr(v)])
    return buf.getvalue()
