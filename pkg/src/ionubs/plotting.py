"""PNG figures written next to CSV outputs (Agg backend, no display needed)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.4),
    "axes.labelsize": 11,
    "axes.titlesize": 11,
    "legend.fontsize": 9,
    "xtick.direction": "in",
    "ytick.direction": "in",
    "savefig.dpi": 120,
}


def png_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".png")


def _save(fig, csv_path) -> Path:
    out = png_path(csv_path)
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(out, metadata={"Software": None})
    plt.close(fig)
    return out


def plot_fidelity_sweep(rows, csv_path, benchmark: float = 0.99) -> Path:
    """Fidelity against n for each sigma^2; rows are (sigma_sq, n, fidelity, ...)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for s2 in sorted({r[0] for r in rows}):
            pts = sorted((r[1], r[2]) for r in rows if r[0] == s2)
            ax.plot([p[0] for p in pts], [p[1] for p in pts], "o-", ms=4, label=f"$\\sigma^2$ = {s2:g}")
        ax.axhline(benchmark, ls=":", color="k", lw=1)
        ax.set_xlabel("phonon number $n_+ = n_-$")
        ax.set_ylabel("fidelity")
        ax.legend(frameon=False)
        return _save(fig, csv_path)


def plot_separation(times, r, omega_minus, csv_path) -> Path:
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(2, 1, sharex=True)
        a1.plot(times, r)
        a1.set_yscale("log")
        a1.set_ylabel("separation $r/l_0$")
        a2.plot(times, omega_minus)
        a2.set_ylabel(r"$\omega_-/\omega_0$")
        a2.set_xlabel(r"$\omega_0 t$")
        return _save(fig, csv_path)


def plot_profile(times, values, label, csv_path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(times, values)
        ax.set_xlabel(r"$\omega_0 t$")
        ax.set_ylabel(label)
        return _save(fig, csv_path)


def plot_distribution(rows, csv_path) -> Path:
    """Phonon-number marginals; rows are (mode, n, probability)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        modes = sorted({r[0] for r in rows})
        width = 0.8 / max(len(modes), 1)
        for j, m in enumerate(modes):
            pts = [(r[1], r[2]) for r in rows if r[0] == m]
            ax.bar([p[0] + j * width for p in pts], [p[1] for p in pts], width, label=f"mode {m}")
        ax.set_xlabel("n")
        ax.set_ylabel("probability")
        ax.legend(frameon=False)
        return _save(fig, csv_path)
