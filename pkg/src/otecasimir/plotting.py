"""Report figures rendered next to the CSV output (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

AXIS_LABELS = {
    "d": "separation d (m)",
    "t1": "temperature of body 1 (K)",
    "t2": "temperature of body 2 (K)",
    "tenv": "environment temperature (K)",
    "tb": "common body temperature (K)",
    "f": "filling fraction f",
    "D": "grating period D (m)",
    "h": "corrugation depth h (m)",
}


def sweep_figure(path, axis, values, totals, pfa=None, log_x=False):
    """Pressure against the swept parameter; PFA overlay when available."""
    values = np.asarray(values, dtype=float)
    totals = np.asarray(totals, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(values, totals, "o-", label="pressure")
    if pfa is not None:
        pfa = np.asarray(pfa, dtype=float)
        if np.isfinite(pfa).any():
            ax.plot(values, pfa, "s--", label="proximity-force estimate")
            ax.legend()
    if log_x:
        ax.set_xscale("log")
    mag = np.abs(totals[totals != 0])
    if mag.size and mag.max() / mag.min() > 50.0:
        ax.set_yscale("symlog", linthresh=float(mag.min()))
    if (totals > 0).any() and (totals < 0).any():
        ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel(AXIS_LABELS.get(axis, axis))
    ax.set_ylabel("pressure (N/m$^2$), negative = attraction")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def spectrum_figure(path, omegas, density):
    """Frequency density of the two-temperature correction."""
    omegas = np.asarray(omegas, dtype=float)
    density = np.asarray(density, dtype=float)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(omegas, density, "-")
    ax.set_xscale("log")
    if (density > 0).any() and (density < 0).any():
        ax.axhline(0.0, color="0.6", lw=0.8)
    ax.set_xlabel(r"angular frequency $\omega$ (rad/s)")
    ax.set_ylabel(r"correction density $\Delta(\omega)$ (N s / m$^2$ / rad)")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
