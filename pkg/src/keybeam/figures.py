"""Plot rendering for simulation and optimization reports.

Everything renders through the Agg backend into PNG bytes, so callers can
assemble a whole report in memory and only touch the filesystem once the run
has succeeded.
"""

from __future__ import annotations

import io


def _new_axes(title: str, xlabel: str, ylabel: str):
    import matplotlib

    matplotlib.use("Agg", force=False)
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.0, 4.0), dpi=120)
    ax = fig.add_subplot(1, 1, 1)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _render(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", bbox_inches="tight")
    return buf.getvalue()


def rank_cdf_png(curves: dict[str, list[tuple[int, float]]], title: str = "Selection rank CDF") -> bytes:
    """Step curves of cumulative fraction vs rank, one per label."""
    fig, ax = _new_axes(title, "rank k", "fraction of words at rank <= k")
    for label, points in curves.items():
        if not points:
            continue
        xs = [k for k, _ in points]
        ys = [f for _, f in points]
        ax.step(xs, ys, where="post", label=label)
    ax.set_ylim(0.0, 1.05)
    if curves:
        ax.legend(loc="lower right", fontsize=8)
    return _render(fig)


def metric_bars_png(labels: list[str], values: list[float], ylabel: str, title: str) -> bytes:
    fig, ax = _new_axes(title, "", ylabel)
    xs = range(len(labels))
    ax.bar(xs, values, color="#4878a8")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    return _render(fig)


def loss_curve_png(trajectory: list[tuple[int, float, float]], title: str = "Layout optimization") -> bytes:
    """Soft and hard objective traces over iterations for the best restart."""
    fig, ax = _new_axes(title, "iteration", "collision cost")
    if trajectory:
        its = [t for t, _, _ in trajectory]
        ax.plot(its, [s for _, s, _ in trajectory], label="soft objective", alpha=0.8)
        ax.plot(its, [h for _, _, h in trajectory], label="hard objective", alpha=0.8)
        ax.legend(fontsize=8)
    return _render(fig)
