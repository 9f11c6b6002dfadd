"""Training-curve charts rendered to standalone SVG files.

One line per arm, averaged over seeds at each epoch.  Rendering is pinned
for byte-identical output given identical records: fixed hash salt, text
kept as SVG text elements, and no embedded date.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CHART_METRICS = ("loss", "w1_oracle", "risk", "b", "ms")

_RC = {
    "svg.hashsalt": "gqhuber",
    "svg.fonttype": "none",
    "figure.figsize": (7.0, 4.5),
    "figure.dpi": 100,
}


def _series(records, metric):
    """arm -> (epochs, seed-averaged values), dropping rows without the metric."""
    by_arm = {}
    for rec in records:
        value = getattr(rec, metric)
        if value is None:
            continue
        by_arm.setdefault(rec.arm, {}).setdefault(rec.epoch, []).append(value)
    out = {}
    for arm, per_epoch in by_arm.items():
        epochs = sorted(per_epoch)
        out[arm] = (epochs, [sum(per_epoch[e]) / len(per_epoch[e]) for e in epochs])
    return out


def emit_chart(records, metric: str, path: str) -> None:
    """Write one SVG of ``metric`` over epochs, one seed-averaged line per arm."""
    if not records:
        raise ValueError("records must be nonempty")
    if metric not in CHART_METRICS:
        raise ValueError(f"unknown metric {metric!r}, expected one of {CHART_METRICS}")
    if not path.endswith(".svg"):
        raise ValueError(f"chart path must end in .svg, got {path!r}")
    series = _series(records, metric)
    if not series:
        raise ValueError(f"no {metric} values in records")

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for arm in sorted(series):
            epochs, values = series[arm]
            marker = "o" if len(epochs) == 1 else None
            ax.plot(epochs, values, label=arm, marker=marker)
        ax.set_xlabel("epoch")
        ax.set_ylabel(metric)
        ax.legend()
        fig.tight_layout()
        tmp = f"{path}.tmp.svg"
        fig.savefig(tmp, format="svg", metadata={"Date": None})
        plt.close(fig)
    os.replace(tmp, path)
