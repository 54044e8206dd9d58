"""Render the report figures that accompany the delimited output files.

Pure presentation: every number plotted here is read back from the rows
the driver already wrote, so switching figures off never changes the CSV
bytes. Uses the non-interactive Agg backend; files are PNG.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def render_reference_convergence(path, grid, errors_by_n, windows) -> None:
    """Log-scale truncation error per basis size, windows shaded."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for n, err in sorted(errors_by_n.items()):
        positive = np.maximum(np.asarray(err), 1e-300)
        ax.semilogy(grid, positive, label=f"N = {n}")
    for label, (lo, hi) in windows.items():
        ax.axvspan(lo, hi, alpha=0.12, label=f"{label} window")
    ax.set_xscale("log")
    ax.set_xlabel("x")
    ax.set_ylabel("|exact - partial sum|")
    ax.set_title("Reference-wave expansion truncation error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_scatter_phase(path, energies, deltas, flags) -> None:
    """Unwrapped phase shift over the sweep; flagged points marked."""
    energies = np.asarray(energies)
    deltas = np.asarray(deltas)
    ok = np.array([f == "ok" for f in flags])
    finite = np.isfinite(deltas)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.plot(energies[finite], deltas[finite], "-", color="0.6", lw=0.8)
    ax.plot(energies[ok & finite], deltas[ok & finite], "o", ms=3.5, label="ok")
    marked = finite & ~ok
    if marked.any():
        ax.plot(energies[marked], deltas[marked], "x", ms=5, color="C3", label="flagged")
    ax.set_xlabel("E")
    ax.set_ylabel("phase shift (rad, unwrapped)")
    ax.set_title("Scattering phase shift")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_scatter_unitarity(path, energies, defects) -> None:
    energies = np.asarray(energies)
    defects = np.asarray(defects)
    finite = np.isfinite(defects)
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    floor = np.maximum(defects[finite], 1e-18)
    ax.semilogy(energies[finite], floor, "o-", ms=3)
    ax.set_xlabel("E")
    ax.set_ylabel("| |S| - 1 |")
    ax.set_title("Unitarity defect over the sweep")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
