"""Deterministic figure rendering from report CSVs.

Every figure is a pure function of its input files: style constants are
fixed, matplotlib's SVG hash salt is pinned, and no timestamps are embedded,
so rerunning a render produces byte-identical vector output.
"""

from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .schemas import SchemaError, curve_column, load_rows  # noqa: E402

COLORS = ("#3b6fb6", "#d26a4c", "#4c9f70", "#8e6bb5", "#b0913c", "#5a5a5a")
HEATMAP = "viridis"
FIGSIZE = (6.4, 4.2)
DPI = 150

matplotlib.rcParams["svg.hashsalt"] = "meshfig"
matplotlib.rcParams["font.family"] = "DejaVu Sans"


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple
    labels: tuple
    out: str
    formats: tuple = ("svg",)

    def __post_init__(self):
        if len(self.inputs) == 0:
            raise SchemaError("at least one input file is required")
        if len(self.labels) != len(self.inputs):
            raise SchemaError(f"{len(self.inputs)} inputs but "
                              f"{len(self.labels)} labels")


def _color(i):
    return COLORS[i % len(COLORS)]


# ------------------------------------------------------------- renderers ---

def _effort_figure(datasets, labels):
    """Grouped bars, one group per block, error bars from the std column."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    blocks = [row["block"] for row in datasets[0]]
    for rows in datasets[1:]:
        if [row["block"] for row in rows] != blocks:
            raise SchemaError("effort inputs disagree on block names")
    n = len(labels)
    width = 0.8 / n
    x = np.arange(len(blocks))
    for i, (rows, label) in enumerate(zip(datasets, labels)):
        means = [row["mean"] for row in rows]
        stds = [row["std"] for row in rows]
        ax.bar(x + (i - (n - 1) / 2) * width, means, width, label=label,
               color=_color(i), yerr=stds, capsize=3,
               error_kw={"linewidth": 1})
    ax.set_xticks(x)
    ax.set_xticklabels(blocks, rotation=30, ha="right")
    ax.set_ylabel("effort")
    ax.set_ylim(bottom=0)
    if n > 1:
        ax.legend(frameon=False)
    return fig


def _cka_matrix(rows):
    """(stages, matrix) from long-form stage_a/stage_b/mean rows."""
    stages = []
    for row in rows:
        if row["stage_a"] not in stages:
            stages.append(row["stage_a"])
    index = {s: i for i, s in enumerate(stages)}
    mat = np.full((len(stages), len(stages)), np.nan)
    for row in rows:
        if row["stage_b"] not in index:
            raise SchemaError(f"stage {row['stage_b']!r} appears only as "
                              f"stage_b")
        mat[index[row["stage_a"]], index[row["stage_b"]]] = row["mean"]
    if np.isnan(mat).any():
        raise SchemaError("cka rows do not cover the full stage square")
    return stages, mat


def _cka_figure(datasets, labels):
    """One annotated heatmap panel per variant."""
    n = len(labels)
    fig, axes = plt.subplots(1, n, figsize=(FIGSIZE[0] * n * 0.75,
                                            FIGSIZE[1]), squeeze=False)
    for ax, rows, label in zip(axes[0], datasets, labels):
        stages, mat = _cka_matrix(rows)
        ax.imshow(mat, cmap=HEATMAP, vmin=0.0, vmax=1.0)
        ax.set_xticks(range(len(stages)))
        ax.set_yticks(range(len(stages)))
        ax.set_xticklabels(stages, rotation=45, ha="right")
        ax.set_yticklabels(stages)
        for i in range(len(stages)):
            for j in range(len(stages)):
                dark = mat[i, j] < 0.5
                ax.text(j, i, f"{mat[i, j]:.2f}", ha="center", va="center",
                        fontsize=7, color="white" if dark else "black")
        ax.set_title(label)
    return fig


def _spectrum_figure(datasets, labels):
    """sigma_i / sigma_0 per stage on a log Y axis, std as a band."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = 0
    for rows, label in zip(datasets, labels):
        stages = []
        for row in rows:
            if row["stage"] not in stages:
                stages.append(row["stage"])
        for stage in stages:
            sub = sorted((r for r in rows if r["stage"] == stage),
                         key=lambda r: r["index"])
            idx = [r["index"] for r in sub]
            mean = np.array([r["mean"] for r in sub])
            std = np.array([r["std"] for r in sub])
            name = stage if len(datasets) == 1 else f"{label} {stage}"
            ax.plot(idx, mean, label=name, color=_color(series),
                    linewidth=1.5)
            ax.fill_between(idx, np.maximum(mean - std, 1e-12), mean + std,
                            color=_color(series), alpha=0.2, linewidth=0)
            series += 1
    ax.set_yscale("log")
    ax.set_xlabel("singular value index")
    ax.set_ylabel("sigma_i / sigma_0")
    ax.legend(frameon=False, fontsize=8)
    return fig


def _curves_figure(datasets, labels):
    """Training curves over steps on a log X axis."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    y_names = []
    for i, (rows, label) in enumerate(zip(datasets, labels)):
        col = curve_column(rows)
        y_names.append(col)
        steps = [max(row["step"], 1.0) for row in rows]  # log axis, step 0
        ax.plot(steps, [row[col] for row in rows], label=label,
                color=_color(i), linewidth=1.5)
    ax.set_xscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel(" / ".join(dict.fromkeys(y_names)))
    ax.legend(frameon=False)
    return fig


_RENDERERS = {
    "effort": _effort_figure,
    "cka": _cka_figure,
    "spectrum": _spectrum_figure,
    "curves": _curves_figure,
}


# ------------------------------------------------------------ entry point --

def build_figure(spec):
    """The matplotlib Figure for a spec (no files written)."""
    datasets = [load_rows(path, spec.kind) for path in spec.inputs]
    fig = _RENDERERS[spec.kind](datasets, list(spec.labels))
    fig.tight_layout()
    return fig


def render(spec):
    """Render and save; returns the written paths."""
    fig = build_figure(spec)
    written = []
    try:
        for fmt in spec.formats:
            path = spec.out if spec.out.endswith(f".{fmt}") else \
                f"{spec.out}.{fmt}"
            # Date=None keeps SVG output byte-stable across reruns
            fig.savefig(path, format=fmt, dpi=DPI,
                        metadata={"Date": None} if fmt == "svg" else None)
            written.append(path)
    finally:
        plt.close(fig)
    return written
