"""Figure rendering for the report paths.

Every function writes one PNG next to the delimited output it
illustrates and returns the path written.  The Agg backend is forced so
reports render identically on headless machines.
"""

from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .engine import Trace
from .experiments import StudyRow, SustainResult, SweepResult
from .planner import PlanReport
from .resonator import Modes

__all__ = [
    "trace_figure",
    "sustain_figure",
    "sweep_figure",
    "study_figure",
    "modes_figure",
    "plan_figure",
]

_DPI = 130


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def trace_figure(tr: Trace, path, nodes: Optional[Sequence[str]] = None,
                 title: str = "") -> Path:
    """Overlay of recorded node voltages against time."""
    nodes = list(nodes) if nodes is not None else list(tr.nodes)
    if not nodes:
        raise ValueError("no nodes to plot")
    fig, ax = plt.subplots(figsize=(8, 4.5))
    t_us = tr.times * 1e6
    for nd in nodes:
        ax.plot(t_us, tr.voltage(nd), lw=0.8, label=nd)
    ax.set_xlabel("time [us]")
    ax.set_ylabel("voltage [V]")
    if title:
        ax.set_title(title)
    if len(nodes) <= 12:
        ax.legend(loc="upper right", fontsize=7, ncol=2)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def sustain_figure(res: SustainResult, path) -> Path:
    """Clock waveforms over the amplitude envelope, with the verdict
    thresholds drawn in.  The classic sustain-or-collapse picture."""
    s = res.scenario
    rules = s.rules
    clock_nodes = [n for n in res.trace.nodes
                   if n.startswith("p") and n[1:2] in "0123" and
                   not n[2:3].isalpha()][:4]
    if not clock_nodes:
        clock_nodes = list(res.trace.nodes)[:4]

    fig, (ax0, ax1) = plt.subplots(
        2, 1, figsize=(8, 6), sharex=True,
        gridspec_kw={"height_ratios": [2, 1]},
    )
    t_us = res.trace.times * 1e6
    for nd in clock_nodes:
        ax0.plot(t_us, res.trace.voltage(nd), lw=0.7, label=nd)
    if res.epg is not None:
        ax0.plot(t_us, res.trace.voltage(res.epg.outputs[0]), lw=0.9,
                 color="k", alpha=0.6, label=res.epg.outputs[0])
    ax0.set_ylabel("voltage [V]")
    ax0.legend(loc="upper right", fontsize=7, ncol=3)
    ax0.grid(alpha=0.3)
    verdict = "sustained" if res.sustained else "failed"
    ax0.set_title(f"power clocks: {verdict}")

    ax1.plot(res.envelope_times * 1e6, res.envelope / s.amplitude,
             lw=1.2, color="tab:blue", label="cycle amplitude")
    ax1.axhline(rules.amplitude_fraction, color="tab:green", ls="--", lw=0.8,
                label=f"sustain >= {rules.amplitude_fraction:g}")
    ax1.axhline(rules.collapse_fraction, color="tab:red", ls="--", lw=0.8,
                label=f"collapse < {rules.collapse_fraction:g}")
    tc = res.verdict.time_of_collapse
    if tc is not None:
        ax1.axvline(tc * 1e6, color="tab:red", lw=0.8, alpha=0.7)
    ax1.set_ylim(0.0, None)
    ax1.set_xlabel("time [us]")
    ax1.set_ylabel("fraction of nominal")
    ax1.legend(loc="best", fontsize=7)
    ax1.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def sweep_figure(sw: SweepResult, path) -> Path:
    """Final amplitude fraction against drive resistance, sustained points
    filled, failed points open, with the estimated threshold R*."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    r = np.array([row.parameter for row in sw.rows])
    frac = np.array([row.final_amplitude_fraction for row in sw.rows])
    ok = np.array([row.sustained for row in sw.rows])
    ax.plot(r, frac, lw=0.8, color="0.6")
    ax.plot(r[ok], frac[ok], "o", color="tab:green", label="sustained")
    ax.plot(r[~ok], frac[~ok], "o", mfc="none", color="tab:red",
            label="failed")
    if sw.threshold is not None:
        ax.axvline(sw.threshold, color="k", ls=":", lw=1.0,
                   label=f"R* = {sw.threshold:.0f} ohm")
    ax.set_xscale("log")
    ax.set_xlabel("drive resistance [ohm]")
    ax.set_ylabel("final amplitude / nominal")
    ax.grid(alpha=0.3, which="both")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def study_figure(rows: Sequence[StudyRow], path) -> Path:
    """Dissipation per cycle (left axis, log-log) and recycling
    efficiency (right axis) against clock rate."""
    f = np.array([row.frequency for row in rows])
    e = np.array([row.dissipation_J_per_cycle for row in rows])
    eff = np.array([row.efficiency for row in rows])
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.loglog(f, e, "o-", color="tab:blue", lw=1.0)
    ax.set_xlabel("clock rate [Hz]")
    ax.set_ylabel("dissipation per cycle [J]", color="tab:blue")
    ax.grid(alpha=0.3, which="both")
    ax2 = ax.twinx()
    ax2.semilogx(f, eff, "s--", color="tab:orange", lw=1.0)
    ax2.set_ylabel("recycling efficiency", color="tab:orange")
    ax2.set_ylim(min(0.9, float(eff.min()) - 0.01), 1.001)
    fig.tight_layout()
    return _save(fig, path)


def modes_figure(modes: Modes, path) -> Path:
    """Eigenfrequency stem plot beside the mode-shape matrix."""
    fig, (ax0, ax1) = plt.subplots(
        1, 2, figsize=(9, 4), gridspec_kw={"width_ratios": [1, 1.4]}
    )
    f_hz = modes.frequencies_hz()
    ax0.stem(np.arange(len(f_hz)), f_hz)
    ax0.set_xlabel("mode index")
    ax0.set_ylabel("frequency [Hz]")
    ax0.grid(alpha=0.3)

    vmax = float(np.max(np.abs(modes.shapes))) or 1.0
    im = ax1.imshow(modes.shapes, aspect="auto", cmap="RdBu_r",
                    vmin=-vmax, vmax=vmax)
    ax1.set_xlabel("mode index")
    ax1.set_yticks(np.arange(len(modes.nodes)))
    ax1.set_yticklabels(modes.nodes, fontsize=6)
    fig.colorbar(im, ax=ax1, label="shape (C-orthonormal)")
    fig.tight_layout()
    return _save(fig, path)


def plan_figure(report: PlanReport, path) -> Path:
    """Recyclable power density per layer count against clock rate, with
    the chip's demand and operating point marked."""
    e_layer = report.energy_density  # J/m^2 per layer
    f_op = report.power_density / e_layer  # chip clock implied by the plan
    f = np.geomspace(f_op / 32.0, f_op * 8.0, 200)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for layers in range(1, report.layers_required + 2):
        ax.loglog(f, layers * e_layer * f * 1e-4 * 1e3, lw=1.0,
                  label=f"{layers} layer{'s' if layers > 1 else ''}")
    ax.axhline(report.chip_power_density * 1e-4 * 1e3, color="k", ls="--",
               lw=1.0, label="chip demand")
    ax.axvline(f_op, color="0.5", ls=":", lw=0.9)
    ax.plot([f_op], [report.layers_required * report.power_density * 1e-4 * 1e3],
            "o", color="tab:red", zorder=5)
    ax.set_xlabel("clock rate [Hz]")
    ax.set_ylabel("recyclable power density [mW/cm^2]")
    ax.set_title(f"{report.process} under {report.chip}: "
                 f"{report.layers_required} layer(s) required")
    ax.grid(alpha=0.3, which="both")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
