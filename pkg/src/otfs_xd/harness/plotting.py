"""Render sweep results to image files (non-interactive backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "legend.fontsize": 8,
    "savefig.dpi": 150,
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_ber(records, path) -> Path:
    """BER against Es/N0, one curve per detector; zero-error points are dropped."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for det in dict.fromkeys(r.detector for r in records):
            pts = sorted((r.snr_db, r.ber) for r in records if r.detector == det and r.bit_errors > 0)
            if pts:
                ax.semilogy(*zip(*pts), marker="o", label=det)
        ax.set_xlabel("Es/N0 [dB]")
        ax.set_ylabel("BER")
        if ax.get_legend_handles_labels()[0]:
            ax.legend()
        return _save(fig, path)


def plot_mse(trace, path) -> Path:
    """Simulated MSE per iteration against the state-evolution curves."""
    markers = {"exact": "s", "tin": "v", "genie": "^"}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        it = range(1, len(trace.mc_mse) + 1)
        ax.semilogy(it, trace.mc_mse, "k-o", label="simulation")
        for name, traj in trace.trajectories.items():
            ax.semilogy(it, traj.v_pT, "--", marker=markers.get(name, "x"), label=f"SE ({name})")
        ax.set_xlabel("iteration")
        ax.set_ylabel("MSE")
        ax.set_title(f"{trace.snr_db:g} dB, {trace.frames} frames")
        ax.legend()
        return _save(fig, path)


def plot_bench(rows, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        labels = [r.detector for r in rows]
        ax.bar(labels, [r.median_ms_per_iter for r in rows], color=["C0", "C3"][:len(rows)])
        ax.set_yscale("log")
        ax.set_ylabel("median time per iteration [ms]")
        if rows:
            ax.set_title(f"M={rows[0].M}, N={rows[0].N}")
        return _save(fig, path)
