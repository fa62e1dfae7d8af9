"""Matplotlib renderings of the report artifacts, written next to the data files.

Only the command-line front end calls into this module; the library itself
never plots.  Figures are rendered headless to PNG.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402 (backend must be set first)
import numpy as np  # noqa: E402

from .analysis import SublevelSet  # noqa: E402
from .simulate import Trajectory  # noqa: E402

_FIGSIZE = (5.2, 4.4)


def save_invariant_set_figure(sets: list[SublevelSet], path,
                              trajectories: list[Trajectory] | None = None) -> None:
    """Nested sublevel boundaries, optionally over a simulated reach cloud."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    if trajectories:
        for traj in trajectories:
            ax.plot(traj.states[:, 0], traj.states[:, 1],
                    color="gold", alpha=0.15, linewidth=0.5, zorder=1)
    for s in sets:
        x = s.r * np.cos(s.theta)
        y = s.r * np.sin(s.theta)
        style = {"linestyle": "--", "color": "black"} if s.label == "intersection" else {}
        ax.plot(x, y, label=s.label, linewidth=1.2, zorder=2, **style)
    ax.plot(0, 0, "k+", markersize=6)
    ax.set_aspect("equal")
    ax.set_xlabel("x1")
    ax.set_ylabel("x2")
    ax.legend(fontsize=8, loc="upper right")
    ax.set_title("invariant sublevel sets")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trajectory_figure(trajectories: list[Trajectory], path) -> None:
    """Phase plane for planar runs, norm decay over time otherwise."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    planar = all(t.states is not None and t.states.shape[1] == 2 for t in trajectories)
    if planar:
        for traj in trajectories:
            ax.plot(traj.states[:, 0], traj.states[:, 1], alpha=0.4, linewidth=0.7)
        ax.plot(0, 0, "k+", markersize=6)
        ax.set_aspect("equal")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        for traj in trajectories:
            data = traj.states if traj.states is not None else \
                traj.outer_states.reshape(traj.outer_states.shape[0], -1)
            ax.semilogy(traj.times, np.linalg.norm(data, axis=1), alpha=0.5, linewidth=0.7)
        ax.set_xlabel("t")
        ax.set_ylabel("state norm")
    ax.set_title(f"{len(trajectories)} simulated trajectories")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(rows: list[dict], path) -> None:
    """Runtime against certificate order, infeasible levels marked."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ok = [r for r in rows if r["status"] == "feasible"]
    bad = [r for r in rows if r["status"] != "feasible"]
    if ok:
        ax.plot([r["order"] for r in ok], [r["runtime"] for r in ok],
                "o-", label="feasible")
    if bad:
        ax.plot([r["order"] for r in bad], [r["runtime"] for r in bad],
                "rx", label="not feasible")
    ax.set_xlabel("certificate order 2c")
    ax.set_ylabel("solve time [s]")
    ax.set_title("certification sweep")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
