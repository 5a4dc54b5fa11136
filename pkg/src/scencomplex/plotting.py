"""Optional figures: scene top view, dimension profile of a report, suite coverage bars.

matplotlib is imported lazily with the Agg backend so the CLI stays fast and headless.
"""

from __future__ import annotations

import os
from typing import List

import numpy as np

from .analysis import AnalysisReport
from .coverage import SuiteCoverage
from .geometry import OrientedRect
from .scenario import Scenario, sample_times
from .taxonomy import DIMENSION_LABELS, DIMENSIONS

_STYLE = {
    "figure.dpi": 100,
    "savefig.dpi": 120,
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
_CLASS_COLOURS = {"vehicle": "tab:blue", "pedestrian": "tab:red", "object": "tab:gray"}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_scene(s: Scenario, out: str, snapshots: int = 4) -> str:
    """Top view: lanes, every track, and actor footprints at a few evenly spaced times."""
    plt = _pyplot()
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(9, 3.5))
        times = sample_times(s, 0.1)
        xs: List[float] = []
        for a in s.actors:
            kin = s.kinematics(a.id)
            x, y = kin.xy(times)
            xs += [float(x.min()), float(x.max())]
            colour = "k" if a.id == "ego" else _CLASS_COLOURS[a.actor_class]
            ax.plot(x, y, lw=0.8, color=colour, alpha=0.6)
            for t in np.linspace(times[0], times[-1], snapshots):
                (px,), (py,) = kin.xy(np.array([t]))
                h = float(kin.heading(np.array([t]))[0])
                pts = OrientedRect(float(px), float(py), h, a.length, a.width).corners()
                ax.fill(pts[:, 0], pts[:, 1], color=colour, alpha=0.25)
            ax.annotate(a.id, (x[0], y[0]), fontsize=7)
        lo, hi = min(xs) - 5, max(xs) + 5
        w = s.road.lane_width
        for k in range(s.road.lane_count + 1):
            style = "-" if k in (0, s.road.lane_count) else "--"
            ax.plot([lo, hi], [k * w, k * w], style, color="0.5", lw=0.7)
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_title(s.id)
        fig.tight_layout()
        fig.savefig(out)
        plt.close(fig)
    return out


def plot_profile(report: AnalysisReport, out: str) -> str:
    """Bars of per-dimension counts with the primary-dimension hits overlaid."""
    plt = _pyplot()
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6, 3))
        idx = np.arange(len(DIMENSIONS))
        ax.bar(idx, [report.score.per_dimension[d] for d in DIMENSIONS], color="0.75", label="present")
        ax.bar(idx, [report.score.primary_hits[d] for d in DIMENSIONS], width=0.4, color="tab:orange", label="primary")
        ax.set_xticks(idx)
        ax.set_xticklabels([DIMENSION_LABELS[d] for d in DIMENSIONS], rotation=25, ha="right")
        ax.set_ylabel("findings")
        ax.set_title(f"{report.scenario_id} (total {report.score.total})")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(out)
        plt.close(fig)
    return out


def plot_coverage(c: SuiteCoverage, out: str) -> str:
    plt = _pyplot()
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 2.8))
        parts = list(c.per_part)
        idx = np.arange(len(parts))
        ax.bar(idx, [c.per_part[p][1] for p in parts], color="0.85", label="leaves")
        ax.bar(idx, [c.per_part[p][0] for p in parts], color="tab:green", label="covered")
        ax.set_xticks(idx)
        ax.set_xticklabels(parts)
        ax.set_ylabel("leaves")
        ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(out)
        plt.close(fig)
    return out


def report_figures(s: Scenario, report: AnalysisReport, directory: str) -> List[str]:
    os.makedirs(directory, exist_ok=True)
    return [
        plot_scene(s, os.path.join(directory, f"{s.id}_scene.png")),
        plot_profile(report, os.path.join(directory, f"{s.id}_profile.png")),
    ]
