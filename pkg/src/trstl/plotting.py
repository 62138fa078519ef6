"""Static figures for synthesis and monitoring runs (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

from .stl import Trajectory  # noqa: E402


def _stairs(ax, values, label=None, **kw):
    t = np.arange(len(values))
    ax.step(t, values, where="post", label=label, **kw)


def plot_run(path: str | Path, traj: Trajectory, profiles: Mapping[str, Sequence[int]],
             inputs: np.ndarray | None = None, title: str = "",
             plan: Sequence[tuple[str, str]] = (), regions: Mapping[str, list] | None = None) -> Path:
    """States, inputs and robustness profiles over time, plus an optional plan view.

    ``plan`` lists ``(x_name, y_name)`` pairs drawn as paths in the plane
    together with the rectangles in ``regions``.
    """
    panels = 2 + (inputs is not None and inputs.size > 0) + bool(plan)
    fig, axes = plt.subplots(panels, 1, figsize=(7, 2.4 * panels), squeeze=False)
    axes = list(axes[:, 0])
    names = traj.names or tuple(f"x{i}" for i in range(traj.dim))
    t = np.arange(traj.horizon + 1)

    ax = axes.pop(0)
    for i, name in enumerate(names):
        ax.plot(t, traj.states[:, i], label=name, lw=1.2)
    ax.set_ylabel("state")
    ax.legend(fontsize=7, ncol=min(4, len(names)), loc="best")
    if title:
        ax.set_title(title)

    if inputs is not None and inputs.size > 0:
        ax = axes.pop(0)
        for j in range(inputs.shape[1]):
            _stairs(ax, inputs[:, j], label=f"u{j}", lw=1.0)
        ax.set_ylabel("input")
        ax.legend(fontsize=7, ncol=4, loc="best")

    ax = axes.pop(0)
    for label, values in profiles.items():
        _stairs(ax, list(values), label=label, lw=1.2)
    ax.axhline(0, color="0.6", lw=0.6)
    ax.set_ylabel(r"$\theta$")
    ax.set_xlabel("t")
    if profiles:
        ax.legend(fontsize=7, loc="best")

    if plan:
        ax = axes.pop(0)
        for name, box in (regions or {}).items():
            if len(box) != 2:
                continue
            (x0, x1), (y0, y1) = box
            ax.add_patch(Rectangle((x0, y0), x1 - x0, y1 - y0, alpha=0.25, color="tab:green"))
            ax.annotate(name, ((x0 + x1) / 2, (y0 + y1) / 2), ha="center", va="center", fontsize=7)
        for xn, yn in plan:
            xi, yi = names.index(xn), names.index(yn)
            ax.plot(traj.states[:, xi], traj.states[:, yi], marker=".", ms=3, lw=0.8, label=f"({xn}, {yn})")
            ax.plot(traj.states[0, xi], traj.states[0, yi], marker="*", ms=9, color="k")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(fontsize=7, loc="best")

    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
