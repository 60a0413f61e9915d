"""One figure per scan, written next to the CSV/JSON output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .results import ScanResult  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
}

_LABELS = {"dT": r"$\Delta T$", "z_m": r"$z_m$", "N": "cluster size N", "acceleration": "a"}


def _xlabel(result: ScanResult) -> str:
    unit = result.units[result.parameter]
    name = _LABELS.get(result.parameter, result.parameter)
    return name if unit == "1" else f"{name} ({unit})"


def plot_scan(result: ScanResult, path: str | Path, title: str | None = None,
              fit_curve: tuple[np.ndarray, np.ndarray] | None = None) -> Path:
    """Plot every delta_sn-like column against the scanned parameter."""
    path = Path(path)
    x = result.x
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        curves = [c for c in result.columns if c.startswith("dsn") or c == "delta_sn"]
        colors: dict[str, str] = {}
        for name in curves:
            band = "_a" in name
            base = name.split("_a")[0]
            color = colors.setdefault(base, f"C{len(colors)}")
            ax.plot(x, result[name], ls="--" if band else "-", lw=0.8 if band else 1.4,
                    marker="" if band else "o", ms=3, color=color, label=name)
        if "sigma_delta_sn" in result.columns:
            ax.errorbar(x, result["delta_sn"], yerr=result["sigma_delta_sn"], fmt="none",
                        ecolor="0.4", capsize=2)
        if fit_curve is not None:
            fx, fy = fit_curve
            ax.plot(fx, fy, color="k", lw=1, label="fit")
        ax.axhline(0.0, color="0.7", lw=0.6)
        ax.set_xlabel(_xlabel(result))
        ax.set_ylabel(r"$\Delta S_N$")
        if title:
            ax.set_title(title)
        if curves:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, dpi=150)
        plt.close(fig)
    return path
