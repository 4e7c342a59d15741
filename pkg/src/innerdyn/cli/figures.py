"""Quick-look renderings of report series.

One PNG per series next to its CSV. These are conveniences for eyeballing
a run; the CSVs stay the canonical output and nothing downstream reads
the images back.
"""

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _wants_log(columns_of_values):
    # log scale when everything is positive and the spread is wide
    lo = min((v for col in columns_of_values for v in col), default=0.0)
    hi = max((v for col in columns_of_values for v in col), default=0.0)
    return lo > 0.0 and hi / lo > 1e3


def render(report, out_dir):
    for name in sorted(report.series):
        spec = report.series[name]
        rows = [r for r in spec["rows"] if all(v is not None for v in r)]
        if not rows:
            continue
        ns = [r[0] for r in rows]
        value_cols = [
            [float(r[i]) for r in rows] for i in range(1, len(spec["columns"]))
        ]
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for label, col in zip(spec["columns"][1:], value_cols):
            ax.plot(ns, col, marker=".", linewidth=1.0, label=label)
        if _wants_log(value_cols):
            ax.set_yscale("log")
        ax.set_xlabel(spec["columns"][0])
        ax.set_title(f"{report.kind}: {name}")
        if len(value_cols) > 1:
            ax.legend()
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(os.path.join(out_dir, f"figure_{name}.png"), dpi=120)
        plt.close(fig)
