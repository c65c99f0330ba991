"""Report figures rendered to files alongside the delimited output.

All plots are written as PNG at fixed size and dpi so repeated runs of
the same campaign produce byte-identical images.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 120

RESPONSE_LABELS = {
    "Y1": "TT purity (%)",
    "Y2": "TT productivity (mg/h)",
    "Y3": "FG purity (%)",
    "Y4": "FG productivity (mg/h)",
}


def parity_grid(diags: dict, path) -> None:
    """Observed-vs-predicted panels, one per response."""
    names = list(diags)
    fig, axes = plt.subplots(2, 2, figsize=(8, 7), dpi=_DPI)
    for ax, name in zip(axes.ravel(), names):
        d = diags[name]
        obs = np.array(d.observed)
        pred = np.array(d.predicted)
        lo = min(obs.min(), pred.min())
        hi = max(obs.max(), pred.max())
        pad = 0.05 * (hi - lo if hi > lo else 1.0)
        ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad],
                color="0.6", lw=1, zorder=1)
        ax.scatter(obs, pred, s=24, zorder=2)
        ax.set_xlabel(f"measured {RESPONSE_LABELS.get(name, name)}")
        ax.set_ylabel(f"predicted {RESPONSE_LABELS.get(name, name)}")
        ax.set_title(f"{name}: R$^2$ = {d.r_squared:.3f}")
    for ax in axes.ravel()[len(names):]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def design_space_plot(grid, point, path) -> None:
    """Inside/outside markers of a grid slice with the validated point."""
    xs = np.array(grid.x_values)
    ys = np.array(grid.y_values)
    inside = np.array(grid.inside, dtype=bool)
    XX, YY = np.meshgrid(xs, ys)
    fig, ax = plt.subplots(figsize=(6, 5), dpi=_DPI)
    ax.contourf(XX, YY, inside.astype(float), levels=[-0.5, 0.5, 1.5],
                colors=["#f5c6c6", "#c8e6c9"], alpha=0.8)
    ax.scatter(XX[~inside], YY[~inside], marker="x", s=12, color="#b23b3b",
               linewidths=0.8, label="outside")
    ax.scatter(XX[inside], YY[inside], marker="o", s=10,
               facecolors="none", edgecolors="#2d7d46", linewidths=0.8,
               label="inside")
    px = point.values()[grid.spec.swept[0] - 1]
    py = point.values()[grid.spec.swept[1] - 1]
    ax.scatter([px], [py], marker="*", s=180, color="#1f4e9c", zorder=5,
               label="validated point")
    ax.set_xlabel(f"X{grid.spec.swept[0]}")
    ax.set_ylabel(f"X{grid.spec.swept[1]}")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def pareto_front_plot(front, representatives, path) -> None:
    """Objective-space scatter of the front with chosen representatives."""
    F = np.array([s.objectives for s in front.solutions])
    R = np.array([s.objectives for s in representatives.solutions])
    names = front.objective_names
    pairs = [(0, 1), (2, 3)] if F.shape[1] >= 4 else [(0, min(1, F.shape[1] - 1))]
    fig, axes = plt.subplots(1, len(pairs), figsize=(5.5 * len(pairs), 4.5),
                             dpi=_DPI, squeeze=False)
    for ax, (i, j) in zip(axes[0], pairs):
        ax.scatter(F[:, i], F[:, j], s=6, color="0.7", label="front")
        ax.scatter(R[:, i], R[:, j], s=60, marker="D", color="#1f4e9c",
                   label="selected")
        ax.set_xlabel(RESPONSE_LABELS.get(names[i], names[i]))
        ax.set_ylabel(RESPONSE_LABELS.get(names[j], names[j]))
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
