#!/usr/bin/env python3
"""Render publication-style histogram panels from simulator output files.

    python3 figures/render.py --spec spec.json

The spec is a JSON object:

    {
      "grid": [2, 2],
      "out": "figure.png",
      "panels": [
        {"csv": "n3.csv", "title": "N = 3"},
        {"csv": "n10.csv", "title": "N = 10", "beta": 1.392},
        {"csv": "n50.csv", "title": "N = 50", "fit": "n50_fit.json"},
        ...
      ]
    }

Each panel draws the area-normalized histogram of one CSV; a symmetric
Beta density is overlaid when ``beta`` (a number) or ``fit`` (a fit JSON
with ``beta_star``) is given.  These scripts are pure consumers of the
CLI's files and never simulate.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from figio import BinnedHistogram, read_fit_json, read_histogram_csv


@dataclass(frozen=True)
class PanelSpec:
    csv: str
    title: str = ""
    beta: float | None = None


@dataclass(frozen=True)
class FigureSpec:
    panels: list[PanelSpec]
    grid: tuple[int, int]
    out: str

    @classmethod
    def from_json(cls, text: str, *, base=None) -> "FigureSpec":
        raw = json.loads(text)
        panels = []
        for p in raw["panels"]:
            beta = p.get("beta")
            if beta is None and "fit" in p:
                beta = float(read_fit_json(p["fit"])["beta_star"])
            panels.append(PanelSpec(csv=p["csv"], title=p.get("title", ""), beta=beta))
        rows, cols = raw.get("grid", [1, len(panels)])
        spec = cls(panels=panels, grid=(int(rows), int(cols)), out=raw["out"])
        if spec.grid[0] * spec.grid[1] != len(spec.panels):
            raise ValueError(
                f"grid {spec.grid} holds {spec.grid[0] * spec.grid[1]} panels, "
                f"spec lists {len(spec.panels)}"
            )
        return spec


def beta_density(x: np.ndarray, beta: float) -> np.ndarray:
    """Symmetric Beta(beta, beta) density on [0, 1]."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    ln_norm = math.lgamma(2 * beta) - 2 * math.lgamma(beta)
    out = np.zeros_like(x)
    inside = (x > 0) & (x < 1)
    with np.errstate(divide="ignore"):
        out[inside] = np.exp(
            ln_norm + (beta - 1) * (np.log(x[inside]) + np.log1p(-x[inside]))
        )
    if beta == 1.0:
        out[(x >= 0) & (x <= 1)] = 1.0
    return out


def _draw_panel(ax, hist: BinnedHistogram, title: str, beta: float | None) -> None:
    dens = hist.density()
    edges = hist.edges()
    ax.bar(edges[:-1], dens, width=hist.bin_width, align="edge",
           color="#4878a8", edgecolor="none")
    if beta is not None:
        lo, hi = hist.lo, hist.hi
        if lo < 0.0 or hi > 1.0:
            warnings.warn(
                f"histogram domain [{lo}, {hi}] exceeds [0, 1]; "
                "Beta overlay clipped to the unit interval"
            )
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        grid = np.linspace(lo, hi, 512)
        ax.plot(grid, beta_density(grid, beta), color="#b2432f", linewidth=1.4,
                label=f"Beta({beta:.3g}, {beta:.3g})")
        ax.legend(frameon=False, fontsize=8)
    ax.set_title(title, fontsize=10)
    ax.set_xlim(hist.lo, hist.hi)
    ax.set_ylim(bottom=0.0)


def render_histogram_panels(spec: FigureSpec) -> str:
    """Draw the grid of normalized histograms; returns the output path."""
    rows, cols = spec.grid
    fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.2 * rows),
                             squeeze=False)
    for ax, panel in zip(axes.ravel(), spec.panels):
        hist = read_histogram_csv(panel.csv)
        _draw_panel(ax, hist, panel.title, panel.beta)
    fig.tight_layout()
    fig.savefig(spec.out, dpi=150)
    plt.close(fig)
    return spec.out


def render_fit_overlay(hist_csv: str, fit_json: str, out: str, title: str = "") -> str:
    """Single histogram with its fitted symmetric-Beta density overlaid."""
    beta = float(read_fit_json(fit_json)["beta_star"])
    if beta <= 0:
        raise ValueError("fitted beta_star must be positive")
    spec = FigureSpec(panels=[PanelSpec(csv=hist_csv, title=title, beta=beta)],
                      grid=(1, 1), out=out)
    return render_histogram_panels(spec)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="render histogram figures")
    parser.add_argument("--spec", required=True, help="figure spec JSON path")
    args = parser.parse_args(argv)
    try:
        with open(args.spec) as fh:
            spec = FigureSpec.from_json(fh.read())
        render_histogram_panels(spec)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
