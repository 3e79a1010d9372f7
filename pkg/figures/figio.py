"""Readers for the simulator's output files.

The figure scripts consume the CLI's histogram CSVs and fit JSONs as plain
files; they never import the simulator or re-simulate anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BinnedHistogram:
    """Parsed ``bin_left,bin_right,count`` histogram file."""

    lo: float
    hi: float
    counts: np.ndarray
    underflow: int
    overflow: int

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.counts.size

    def edges(self) -> np.ndarray:
        return self.lo + self.bin_width * np.arange(self.counts.size + 1)

    def density(self) -> np.ndarray:
        """Bin heights scaled so the in-range area integrates to one."""
        total = self.counts.sum()
        if total == 0:
            return np.zeros(self.counts.size)
        return self.counts / (total * self.bin_width)


def read_histogram_csv(path) -> BinnedHistogram:
    lefts, rights, counts = [], [], []
    under = over = 0
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("bin_left"):
                continue
            left_s, right_s, count_s = line.split(",")
            if left_s == "-inf":
                under = int(count_s)
            elif right_s == "inf":
                over = int(count_s)
            else:
                lefts.append(float(left_s))
                rights.append(float(right_s))
                counts.append(int(count_s))
    if not counts:
        raise ValueError(f"no bin rows in {path}")
    return BinnedHistogram(
        lo=lefts[0],
        hi=rights[-1],
        counts=np.asarray(counts, dtype=np.int64),
        underflow=under,
        overflow=over,
    )


def read_fit_json(path) -> dict:
    with open(path) as fh:
        fit = json.load(fh)
    if "beta_star" not in fit:
        raise ValueError(f"{path} has no beta_star field")
    return fit
