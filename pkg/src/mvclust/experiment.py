"""Experiment harness: trial loops over constraint counts and mapping
fractions, paired across methods, with plot-ready CSV output.

Every method in a cell consumes the identical sampled constraints and
mapping, so comparisons are paired. Failed cells are recorded with an
error tag and execution continues. Given the same base seed, the raw
rows CSV is byte-identical across runs.
"""

from __future__ import annotations

import csv
import time
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import coem, data, embedding
from .ckmeans import ClusteringConfig, cluster
from .model import (
    CANNOT_LINK,
    MUST_LINK,
    ConstraintSet,
    RelationMap,
    ViewData,
    build_closure,
    map_constraints,
    max_union,
)
from .evaluate import mean_f, pairwise_f, weighted_precision

METHODS = ("cp", "direct", "cluster-membership", "single-view", "single-view-cp")


@dataclass
class ExperimentConfig:
    dataset: data.DatasetSpec
    methods: list[str]
    constraint_counts: list[int]
    mapping_fractions: list[float]
    trials: int = 25
    base_seed: int = 0
    k: int = 2
    variant: str = "pck"
    thresholds: dict[str, float] = field(default_factory=dict)
    default_threshold: float = 0.75
    embed: bool = False
    embed_dims: Optional[int] = None
    embed_sigma: float = 1.0
    gamma: float = 1e-6
    max_outer_iters: int = 20
    max_em_iters: int = 100
    epsilon: float = 1e-6

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        if not self.constraint_counts:
            raise ValueError("constraint_counts must be non-empty")
        for c in self.constraint_counts:
            if c % 2 != 0:
                raise ValueError("constraint counts must be even")
        if not self.mapping_fractions:
            raise ValueError("mapping_fractions must be non-empty")
        for f in self.mapping_fractions:
            if not (0.0 <= f <= 1.0):
                raise ValueError("mapping fractions must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")

    def threshold_for(self, view_id: str) -> float:
        return self.thresholds.get(view_id, self.default_threshold)


@dataclass
class TrialRow:
    method: str
    fraction: float
    count: int
    trial: int
    mean_f: Optional[float] = None
    per_view_f: dict[str, float] = field(default_factory=dict)
    prop_ml: int = 0
    prop_cl: int = 0
    wprec_ml: Optional[float] = None
    wprec_cl: Optional[float] = None
    outer_iterations: int = 0
    runtime: float = 0.0
    error: Optional[str] = None


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    view_ids: list[str]
    rows: list[TrialRow] = field(default_factory=list)

    @property
    def n_failures(self) -> int:
        return sum(1 for r in self.rows if r.error is not None)

    def cell_rows(self, method: str, fraction: float, count: int) -> list[TrialRow]:
        return [
            r
            for r in self.rows
            if r.method == method and r.fraction == fraction and r.count == count
            and r.error is None
        ]


def _labels_of(view: ViewData) -> dict[str, str]:
    assert view.labels is not None
    return dict(zip(view.instance_ids, view.labels))


def _combined_wprec(
    propagated: dict[str, ConstraintSet], labels: dict[str, dict[str, str]]
) -> tuple[Optional[float], Optional[float]]:
    merged_labels: dict[str, str] = {}
    for lab in labels.values():
        merged_labels.update(lab)
    merged = ConstraintSet()
    for cs in propagated.values():
        merged = max_union(merged, cs)
    wp = weighted_precision(merged, merged_labels)
    return wp[MUST_LINK], wp[CANNOT_LINK]


def _prop_counts(propagated: dict[str, ConstraintSet]) -> tuple[int, int]:
    ml = sum(cs.count(MUST_LINK) for cs in propagated.values())
    cl = sum(cs.count(CANNOT_LINK) for cs in propagated.values())
    return ml, cl


def _run_method(
    method: str,
    views: list[ViewData],
    constraints: dict[str, ConstraintSet],
    mapping: RelationMap,
    config: ExperimentConfig,
    seed: int,
) -> TrialRow:
    clustering = ClusteringConfig(
        k=config.k,
        variant=config.variant,
        max_em_iters=config.max_em_iters,
        epsilon=config.epsilon,
        seed=seed,
    )
    coem_config = coem.CoEmConfig(
        thresholds={v.view_id: config.threshold_for(v.view_id) for v in views},
        clustering=clustering,
        gamma=config.gamma,
        max_outer_iters=config.max_outer_iters,
    )
    labels = {v.view_id: _labels_of(v) for v in views}
    row = TrialRow(method=method, fraction=0.0, count=0, trial=0)

    if method == "cp" or method == "cluster-membership":
        mode = (
            coem.INFER_PROPAGATION if method == "cp" else coem.INFER_MEMBERSHIP
        )
        result = coem.run_multi_view(views, constraints, [mapping], coem_config, mode)
        assignments = {v: result.models[v].model.assignment for v in result.models}
        row.outer_iterations = result.outer_iterations
        row.prop_ml, row.prop_cl = _prop_counts(result.propagated)
        row.wprec_ml, row.wprec_cl = _combined_wprec(result.propagated, labels)
    elif method == "direct":
        closed, aug_rels, _ = build_closure(constraints, [mapping])
        rel_lookup = {}
        for rel in aug_rels:
            rel_lookup[(rel.from_view, rel.to_view)] = rel
            rel_lookup[(rel.to_view, rel.from_view)] = rel.reverse()
        assignments = {}
        for view in views:
            c_tilde = closed.get(view.view_id, ConstraintSet())
            for other in views:
                if other.view_id == view.view_id:
                    continue
                rel = rel_lookup.get((other.view_id, view.view_id))
                if rel is None:
                    continue
                c_tilde = max_union(
                    c_tilde,
                    map_constraints(
                        closed.get(other.view_id, ConstraintSet()), rel
                    ),
                )
            run = cluster(view, c_tilde, clustering)
            assignments[view.view_id] = run.model.assignment
        row.outer_iterations = 1
    elif method == "single-view":
        assignments = {}
        for view in views:
            run = cluster(
                view, constraints.get(view.view_id, ConstraintSet()), clustering
            )
            assignments[view.view_id] = run.model.assignment
        row.outer_iterations = 1
    elif method == "single-view-cp":
        assignments = {}
        propagated: dict[str, ConstraintSet] = {}
        iters = 0
        for view in views:
            result = coem.run_single_view_cp(
                view, constraints.get(view.view_id, ConstraintSet()), coem_config
            )
            assignments[view.view_id] = result.models[view.view_id].model.assignment
            propagated[view.view_id] = result.propagated[view.view_id]
            iters = max(iters, result.outer_iterations)
        row.outer_iterations = iters
        row.prop_ml, row.prop_cl = _prop_counts(propagated)
        row.wprec_ml, row.wprec_cl = _combined_wprec(propagated, labels)
    else:
        raise ValueError(f"unknown method {method!r}")

    per_view_f = {
        v.view_id: pairwise_f(assignments[v.view_id], labels[v.view_id]).f_measure
        for v in views
    }
    row.per_view_f = per_view_f
    row.mean_f = mean_f(list(per_view_f.values()))
    return row


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run every (method, fraction, count, trial) cell on shared samples."""
    views, _, relations = data.read_dataset(config.dataset)
    if len(relations) != 1:
        raise ValueError("the experiment harness expects a two-view dataset")
    full_mapping = relations[0]

    if config.embed:
        embedded = []
        for view in views:
            dims = config.embed_dims or embedding.default_out_dims(view.dim)
            cfg = embedding.EmbeddingConfig(sigma=config.embed_sigma, out_dims=dims)
            emb, _ = embedding.spectral_embed(view, cfg)
            embedded.append(emb)
        views = embedded

    report = ExperimentReport(config=config, view_ids=[v.view_id for v in views])
    for trial in range(config.trials):
        trial_seed = config.base_seed + trial
        for fraction in config.mapping_fractions:
            mapping = data.sample_mapping(
                full_mapping, fraction, trial_seed * 1000 + 7
            )
            for count in config.constraint_counts:
                constraints = {
                    view.view_id: data.sample_constraints(
                        view, count, trial_seed * 1000 + 11 * (i + 1)
                    )
                    for i, view in enumerate(views)
                }
                for method in config.methods:
                    start = time.perf_counter()
                    try:
                        row = _run_method(
                            method, views, constraints, mapping, config, trial_seed
                        )
                    except Exception:
                        row = TrialRow(
                            method=method,
                            fraction=fraction,
                            count=count,
                            trial=trial,
                            error=traceback.format_exc(limit=1).strip().splitlines()[-1],
                        )
                    row.method, row.fraction, row.count, row.trial = (
                        method,
                        fraction,
                        count,
                        trial,
                    )
                    row.runtime = time.perf_counter() - start
                    report.rows.append(row)
    report.rows.sort(key=lambda r: (r.method, r.fraction, r.count, r.trial))
    return report


def _fmt_opt(x: Optional[float]) -> str:
    return "" if x is None else format(x, ".17g")


def write_raw_csv(report: ExperimentReport, path: str | Path) -> None:
    """One row per cell; deterministic given the base seed (no wall-clock
    columns)."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["method", "fraction", "count", "trial", "mean_f"]
        header += [f"f_{v}" for v in report.view_ids]
        header += ["prop_ml", "prop_cl", "wprec_ml", "wprec_cl", "outer_iters", "error"]
        writer.writerow(header)
        for r in report.rows:
            row = [
                r.method,
                format(r.fraction, ".17g"),
                r.count,
                r.trial,
                _fmt_opt(r.mean_f),
            ]
            row += [_fmt_opt(r.per_view_f.get(v)) for v in report.view_ids]
            row += [
                r.prop_ml,
                r.prop_cl,
                _fmt_opt(r.wprec_ml),
                _fmt_opt(r.wprec_cl),
                r.outer_iterations,
                r.error or "",
            ]
            writer.writerow(row)


@dataclass
class CellSummary:
    method: str
    fraction: float
    count: int
    n_trials: int
    mean_f: float
    stderr_f: float
    prop_ml: float
    prop_cl: float
    wprec_ml: Optional[float]
    wprec_cl: Optional[float]
    runtime: float


def aggregate(report: ExperimentReport) -> list[CellSummary]:
    """Mean and standard error per (method, fraction, count) cell."""
    out: list[CellSummary] = []
    for method in sorted(set(r.method for r in report.rows)):
        for fraction in sorted(set(r.fraction for r in report.rows)):
            for count in sorted(set(r.count for r in report.rows)):
                rows = report.cell_rows(method, fraction, count)
                if not rows:
                    continue
                fs = np.array([r.mean_f for r in rows])
                stderr = (
                    float(fs.std(ddof=1) / np.sqrt(len(fs))) if len(fs) > 1 else 0.0
                )
                wml = [r.wprec_ml for r in rows if r.wprec_ml is not None]
                wcl = [r.wprec_cl for r in rows if r.wprec_cl is not None]
                out.append(
                    CellSummary(
                        method=method,
                        fraction=fraction,
                        count=count,
                        n_trials=len(rows),
                        mean_f=float(fs.mean()),
                        stderr_f=stderr,
                        prop_ml=float(np.mean([r.prop_ml for r in rows])),
                        prop_cl=float(np.mean([r.prop_cl for r in rows])),
                        wprec_ml=float(np.mean(wml)) if wml else None,
                        wprec_cl=float(np.mean(wcl)) if wcl else None,
                        runtime=float(np.mean([r.runtime for r in rows])),
                    )
                )
    return out


def write_summary_csv(cells: list[CellSummary], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "method", "fraction", "count", "n_trials", "mean_f", "stderr_f",
                "prop_ml", "prop_cl", "wprec_ml", "wprec_cl",
            ]
        )
        for c in cells:
            writer.writerow(
                [
                    c.method,
                    format(c.fraction, ".17g"),
                    c.count,
                    c.n_trials,
                    format(c.mean_f, ".17g"),
                    format(c.stderr_f, ".17g"),
                    format(c.prop_ml, ".17g"),
                    format(c.prop_cl, ".17g"),
                    _fmt_opt(c.wprec_ml),
                    _fmt_opt(c.wprec_cl),
                ]
            )


def write_summary_txt(
    report: ExperimentReport, cells: list[CellSummary], path: str | Path
) -> None:
    lines = [
        f"dataset: {report.config.dataset.name}",
        f"views: {', '.join(report.view_ids)}",
        f"trials: {report.config.trials}  base_seed: {report.config.base_seed}",
        f"variant: {report.config.variant}  k: {report.config.k}",
        f"failed cells: {report.n_failures}",
        "",
        f"{'method':<20}{'frac':>6}{'count':>7}{'mean F':>10}{'+-SE':>9}"
        f"{'|P|ml':>9}{'|P|cl':>9}{'sec':>8}",
    ]
    for c in cells:
        lines.append(
            f"{c.method:<20}{c.fraction:>6.2f}{c.count:>7d}{c.mean_f:>10.4f}"
            f"{c.stderr_f:>9.4f}{c.prop_ml:>9.1f}{c.prop_cl:>9.1f}{c.runtime:>8.2f}"
        )
    errors = [r for r in report.rows if r.error is not None]
    if errors:
        lines.append("")
        lines.append("errors:")
        for r in errors:
            lines.append(
                f"  {r.method} frac={r.fraction} count={r.count} trial={r.trial}: "
                f"{r.error}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_report(report: ExperimentReport, out_dir: str | Path, figures: bool = True):
    """Emit raw.csv, summary.csv, summary.txt, and (optionally) figures."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cells = aggregate(report)
    write_raw_csv(report, out / "raw.csv")
    write_summary_csv(cells, out / "summary.csv")
    write_summary_txt(report, cells, out / "summary.txt")
    if figures:
        from . import plots

        plots.render_figures(cells, out / "figures")
    return cells
