"""Figure rendering: log-log convergence panels and blended-lattice scatter."""

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import FormatError, group_series, read_dump, read_records_csv

ERROR_PANELS = (
    ("err_w12", "relative W^{1,2} error"),
    ("err_w1inf", "relative W^{1,inf} error"),
    ("err_energy_abs", "|energy error|"),
)
_MARKERS = ("o", "s", "^", "d", "v", "*")


@dataclass
class FigureSpec:
    csv_paths: list
    out_path: str
    panels: tuple = ERROR_PANELS
    slopes: tuple = (-0.5, -1.0, -1.5)
    title: str = ""
    dpi: int = 150


def _slope_guide(ax, dofs, values, slope):
    """Reference-slope segment spanning the data's DoF range."""
    lo, hi = dofs.min(), dofs.max()
    if lo == hi:
        return
    anchor = np.nanmin(values) * 0.6
    y0 = anchor * (hi / lo) ** (-slope) if slope < 0 else anchor
    ax.loglog([lo, hi], [y0, y0 * (hi / lo) ** slope], "k--", lw=0.8,
              alpha=0.6)
    ax.annotate(f"{slope:g}", xy=(hi, y0 * (hi / lo) ** slope),
                fontsize=7, ha="left", va="center")


def render_convergence(spec):
    """Log-log error-vs-DoF panels, one line per method, slope guides.

    Returns the per-panel plotted series {(panel, method): (dof, values)}
    exactly as read from disk (no resampling), so callers can verify the
    round trip.
    """
    rows = []
    for path in spec.csv_paths:
        rows.extend(read_records_csv(path))
    columns = [c for c, _ in spec.panels]
    series = group_series(rows, columns)
    plotted = {}
    fig, axes = plt.subplots(1, len(spec.panels),
                             figsize=(4.2 * len(spec.panels), 3.6))
    axes = np.atleast_1d(axes)
    for ax, (column, label) in zip(axes, spec.panels):
        finite_vals = []
        for k, s in enumerate(series):
            vals = s.values[column]
            keep = np.isfinite(vals) & (vals > 0)
            if not keep.any():
                continue
            ax.loglog(s.dof[keep], vals[keep],
                      marker=_MARKERS[k % len(_MARKERS)], ms=4, lw=1.0,
                      label=s.method)
            plotted[(column, s.method)] = (s.dof[keep], vals[keep])
            finite_vals.append(vals[keep])
        if not finite_vals:
            raise FormatError(f"no positive data to plot for {column!r}")
        all_dof = np.concatenate([s.dof for s in series])
        all_vals = np.concatenate(finite_vals)
        for slope in spec.slopes:
            _slope_guide(ax, all_dof, all_vals, slope)
        ax.set_xlabel("DoF")
        ax.set_ylabel(label)
        ax.grid(True, which="both", alpha=0.25)
        ax.legend(fontsize=7)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    fig.savefig(spec.out_path, dpi=spec.dpi)
    plt.close(fig)
    return plotted


def render_lattice(dump_path, out_path, dpi=150):
    """Scatter of the dumped positions colored and sized by beta."""
    dump = read_dump(dump_path)
    if dump.beta.size == 0:
        raise FormatError(f"{dump_path}: dump has no beta section")
    of = {int(i): k for k, i in enumerate(dump.ids)}
    rows = np.array([of[int(i)] for i in dump.beta_ids])
    xy = dump.xy[rows]
    beta = dump.beta
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    sizes = 2.0 + 14.0 * (1.0 - beta)
    sc = ax.scatter(xy[:, 0], xy[:, 1], c=beta, s=sizes, cmap="viridis",
                    vmin=0.0, vmax=1.0, linewidths=0)
    fig.colorbar(sc, ax=ax, label="blending function")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(out_path, dpi=dpi)
    plt.close(fig)
    return xy, beta
