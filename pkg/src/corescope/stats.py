"""Cycle normalization, histograms, percent-in-range queries and 2D intensity grids.

All functions are pure and operate on immutable sample data; safe to call
from anywhere. Interval samples arrive in nanoseconds and are normalized to
CPU cycles with the nominal clock so results from different machines are
comparable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

from .errors import UsageError

# 2 KCycles per bin matches the granularity the measurements are usually
# reported at (e.g. "38-44 KCycles").
DEFAULT_BIN_WIDTH_CYCLES = 2000


def to_cycles(ns: float, clock_ghz: float) -> int:
    """Convert a nanosecond interval to cycles at the given nominal clock.

    cycles = ns * clock_ghz, rounded half-up to the nearest integer
    (monotone in ns for fixed clock).
    """
    if clock_ghz <= 0:
        raise UsageError(f"clock_ghz must be > 0, got {clock_ghz}")
    return int(ns * clock_ghz + 0.5)


@dataclass
class Histogram:
    """1D histogram over cycle values with fixed-width bins."""

    bin_width_cycles: int = DEFAULT_BIN_WIDTH_CYCLES
    bins: Dict[int, int] = field(default_factory=dict)
    total: int = 0

    def add(self, cycles: int) -> None:
        idx = cycles // self.bin_width_cycles
        self.bins[idx] = self.bins.get(idx, 0) + 1
        self.total += 1

    def bin_range(self, idx: int) -> Tuple[int, int]:
        """[lo, hi) cycle range covered by bin `idx`."""
        return idx * self.bin_width_cycles, (idx + 1) * self.bin_width_cycles

    def percentages(self) -> List[dict]:
        """Per-bin share of samples, ascending by bin, as reportable ranges."""
        if self.total == 0:
            raise UsageError("histogram is empty")
        out = []
        for idx in sorted(self.bins):
            lo, hi = self.bin_range(idx)
            out.append({
                "lo_cycles": lo,
                "hi_cycles": hi,
                "percent": 100.0 * self.bins[idx] / self.total,
            })
        return out

    def to_json(self) -> dict:
        return {
            "bin_width_cycles": self.bin_width_cycles,
            "bins": {str(k): v for k, v in sorted(self.bins.items())},
            "total": self.total,
        }


def build_histogram(cycles: Iterable[int],
                    bin_width: int = DEFAULT_BIN_WIDTH_CYCLES) -> Histogram:
    h = Histogram(bin_width_cycles=bin_width)
    for c in cycles:
        h.add(c)
    return h


def percent_in_range(cycles: Sequence[int], lo_cycles: int, hi_cycles: int) -> float:
    """Share of samples with lo <= x < hi, as a percentage of all samples."""
    if lo_cycles > hi_cycles:
        raise UsageError(f"range is inverted: [{lo_cycles}, {hi_cycles})")
    if len(cycles) == 0:
        raise UsageError("empty sample set")
    n = sum(1 for c in cycles if lo_cycles <= c < hi_cycles)
    return 100.0 * n / len(cycles)


@dataclass
class IntensityGrid:
    """2D histogram over paired (a, b) cycle values, equal bin width on both axes.

    `diagonal_fraction` is the share of pairs strictly below the y=x line
    (b < a), computed from the exact pairs rather than the binned cells so
    it agrees with what an independent pass over the raw data produces.
    """

    bin_width_cycles: int = DEFAULT_BIN_WIDTH_CYCLES
    cells: Dict[Tuple[int, int], int] = field(default_factory=dict)
    total: int = 0
    below_diagonal: int = 0

    def add(self, a_cycles: int, b_cycles: int) -> None:
        key = (a_cycles // self.bin_width_cycles, b_cycles // self.bin_width_cycles)
        self.cells[key] = self.cells.get(key, 0) + 1
        self.total += 1
        if b_cycles < a_cycles:
            self.below_diagonal += 1

    @property
    def diagonal_fraction(self) -> float:
        if self.total == 0:
            raise UsageError("intensity grid is empty")
        return self.below_diagonal / self.total

    def marginal_a(self) -> Histogram:
        h = Histogram(bin_width_cycles=self.bin_width_cycles)
        for (ia, _), count in self.cells.items():
            h.bins[ia] = h.bins.get(ia, 0) + count
            h.total += count
        return h

    def marginal_b(self) -> Histogram:
        h = Histogram(bin_width_cycles=self.bin_width_cycles)
        for (_, ib), count in self.cells.items():
            h.bins[ib] = h.bins.get(ib, 0) + count
            h.total += count
        return h

    def to_json(self) -> dict:
        return {
            "bin_width_cycles": self.bin_width_cycles,
            "cells": [{"a_bin": a, "b_bin": b, "count": c}
                      for (a, b), c in sorted(self.cells.items())],
            "total": self.total,
            "diagonal_fraction": self.diagonal_fraction,
        }


def build_intensity(pairs_cycles: Sequence[Tuple[int, int]],
                    bin_width: int = DEFAULT_BIN_WIDTH_CYCLES) -> IntensityGrid:
    """Build the 2D grid from (a_cycles, b_cycles) pairs.

    Marginals of the returned grid equal the 1D histograms of the a and b
    columns built at the same bin width.
    """
    if len(pairs_cycles) == 0:
        raise UsageError("empty sample set")
    grid = IntensityGrid(bin_width_cycles=bin_width)
    for a, b in pairs_cycles:
        grid.add(a, b)
    return grid
