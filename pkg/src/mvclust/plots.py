"""Figure rendering for experiment reports.

Renders learning curves (mean pairwise F-measure vs. constraint count,
one line per method, one panel per mapping fraction), propagated
constraint growth, and propagated-constraint precision, next to the
delimited output.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_MARKERS = {"cp": "o", "direct": "s", "cluster-membership": "^",
            "single-view": "v", "single-view-cp": "D"}


def _lines(cells, fraction, value):
    by_method: dict[str, tuple[list[int], list[float], list[float]]] = {}
    for c in cells:
        if c.fraction != fraction:
            continue
        xs, ys, es = by_method.setdefault(c.method, ([], [], []))
        v = value(c)
        if v is None:
            continue
        xs.append(c.count)
        ys.append(v)
        es.append(c.stderr_f)
    return by_method


def render_figures(cells, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    fractions = sorted(set(c.fraction for c in cells))

    fig, axes = plt.subplots(
        1, len(fractions), figsize=(4.5 * len(fractions), 3.6), squeeze=False,
        sharey=True,
    )
    for ax, fraction in zip(axes[0], fractions):
        for method, (xs, ys, es) in sorted(_lines(cells, fraction, lambda c: c.mean_f).items()):
            ax.errorbar(
                xs, ys, yerr=es, marker=_MARKERS.get(method, "x"), capsize=2,
                label=method,
            )
        ax.set_title(f"{int(round(fraction * 100))}% mapped")
        ax.set_xlabel("constraints per view")
        ax.grid(alpha=0.3)
    axes[0][0].set_ylabel("mean pairwise F-measure")
    axes[0][-1].legend(fontsize=8)
    fig.tight_layout()
    path = out / "f_measure.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for fraction in fractions:
        for method, (xs, ys, _) in sorted(
            _lines(cells, fraction, lambda c: c.prop_ml + c.prop_cl).items()
        ):
            if all(y == 0 for y in ys):
                continue
            ax.plot(
                xs, ys, marker=_MARKERS.get(method, "x"),
                label=f"{method} ({int(round(fraction * 100))}%)",
            )
    ax.set_xlabel("constraints per view")
    ax.set_ylabel("propagated constraints")
    ax.grid(alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=8)
    fig.tight_layout()
    path = out / "propagated_counts.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    plotted = False
    for fraction in fractions:
        for method in sorted(set(c.method for c in cells)):
            pts = [
                c for c in cells
                if c.method == method and c.fraction == fraction
                and c.wprec_ml is not None
            ]
            if not pts:
                continue
            plotted = True
            ax.plot(
                [c.count for c in pts], [c.wprec_ml for c in pts], linestyle="-",
                marker=_MARKERS.get(method, "x"),
                label=f"{method} ML ({int(round(fraction * 100))}%)",
            )
            ax.plot(
                [c.count for c in pts],
                [c.wprec_cl for c in pts], linestyle="--",
                marker=_MARKERS.get(method, "x"),
                label=f"{method} CL ({int(round(fraction * 100))}%)",
            )
    if plotted:
        ax.set_xlabel("constraints per view")
        ax.set_ylabel("weighted precision")
        ax.set_ylim(0, 1.05)
        ax.grid(alpha=0.3)
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / "precision.png"
        fig.savefig(path, dpi=150)
        written.append(path)
    plt.close(fig)
    return written
