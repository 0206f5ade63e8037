"""Figure rendering for the report paths.

Every plot lands in a file next to the delimited output; nothing opens a
window.  The trace figure mirrors the bench experiment layout: joint
angle on top, pivot position with the detent grid in the middle,
torque at the bottom.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis import StiffnessRangeReport, timing_window
from .mechanism import MechanismParams, detent_positions
from .sim import Trace


def render_trace_figure(trace: Trace, path: str | Path,
                        params: MechanismParams | None = None) -> None:
    if params is None and trace.config is not None:
        params = trace.config.params
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(10, 8))

    ax = axes[0]
    ax.plot(trace.t, np.degrees(trace.theta), lw=0.8, color="tab:blue")
    ax.set_ylabel("joint angle (deg)")
    ax.grid(alpha=0.3)

    ax = axes[1]
    if params is not None:
        for i, pos in enumerate(detent_positions(params), start=1):
            ax.axhline(pos * 1000.0, color="0.85", lw=0.6, zorder=0)
            ax.annotate(str(i), xy=(trace.t[-1], pos * 1000.0),
                        xytext=(3, 0), textcoords="offset points",
                        fontsize=7, color="0.5", va="center")
    ax.plot(trace.t, trace.x * 1000.0, lw=0.9, color="tab:orange")
    ax.set_ylabel("pivot position (mm)")
    ax.grid(alpha=0.3)

    ax = axes[2]
    ax.plot(trace.t, trace.tau, lw=0.8, color="tab:green")
    ax.set_ylabel("torque (Nm)")
    ax.set_xlabel("time (s)")
    ax.grid(alpha=0.3)

    for e in trace.events:
        if e.kind in ("DETENT_ADVANCE", "DETENT_DROP"):
            axes[1].axvline(e.t, color="tab:red" if e.kind == "DETENT_DROP"
                            else "tab:gray", lw=0.4, alpha=0.5)

    fig.suptitle("joint angle, pivot staircase, and spring torque")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_stiffness_range(report: StiffnessRangeReport, path: str | Path) -> None:
    idx = [r.index for r in report.rows]
    k = [r.k for r in report.rows]
    tau = [r.tau_at_30deg for r in report.rows]
    fig, ax1 = plt.subplots(figsize=(7, 4.5))
    ax1.plot(idx, k, "o-", color="tab:blue", label="stiffness (Nm/rad)")
    ax1.set_xlabel("shifter index")
    ax1.set_ylabel("stiffness (Nm/rad)", color="tab:blue")
    ax1.grid(alpha=0.3)
    ax2 = ax1.twinx()
    ax2.plot(idx, tau, "s--", color="tab:green", label="torque at 30 deg (Nm)")
    ax2.set_ylabel("torque at 30 deg (Nm)", color="tab:green")
    fig.suptitle("per-detent stiffness and reference torque")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_timing_window(path: str | Path, q_max: float = 1.0) -> None:
    q = np.linspace(0.0, q_max, 400)
    exact = np.array([timing_window(v).exact_fraction for v in q])
    bound = np.array([timing_window(v).bound_fraction for v in q])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(q, bound, label="bound (2/pi)*sqrt(q)", color="tab:orange")
    ax.plot(q, exact, label="exact window", color="tab:blue")
    ax.set_xlabel("force ratio q = f_max / F_max")
    ax.set_ylabel("window fraction of period")
    ax.legend()
    ax.grid(alpha=0.3)
    fig.suptitle("shift-window fraction vs available force ratio")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_calibration(table, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    cmap = plt.get_cmap("viridis")
    detents = table.detents
    for i, d in enumerate(detents):
        angles, torques = table.curves[d]
        ax.plot(np.degrees(angles), torques, color=cmap(i / max(1, len(detents) - 1)),
                lw=1.0, label=f"detent {d}")
    ax.set_xlabel("joint angle (deg)")
    ax.set_ylabel("torque (Nm)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.suptitle("torque-angle calibration curves")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_sweep(rows: list[dict], param_names: list[str], metric: str,
                 path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    xkey = param_names[0]
    if len(param_names) >= 2:
        ykey = param_names[1]
        groups = sorted({r[ykey] for r in rows})
        for g in groups:
            sub = [r for r in rows if r[ykey] == g]
            sub.sort(key=lambda r: r[xkey])
            ax.plot([r[xkey] for r in sub], [r[metric] for r in sub],
                    "o-", label=f"{ykey}={g:g}")
        ax.legend(fontsize=8)
    else:
        rows = sorted(rows, key=lambda r: r[xkey])
        ax.plot([r[xkey] for r in rows], [r[metric] for r in rows], "o-")
    ax.set_xlabel(xkey)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    fig.suptitle(f"{metric} vs {xkey}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
