"""Soft-constrained K-Means with optional per-cluster metric learning.

Two flavors are supported: ``pck`` clusters under the identity metric
with unit constraint penalties, while ``mpck`` additionally learns a
diagonal metric per cluster. Both minimize the same objective: the
K-Means log-likelihood term plus weighted penalties for violated
must-link and cannot-link constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import CANNOT_LINK, MUST_LINK, ConstraintSet, ViewData, _UnionFind

PCK = "pck"
MPCK = "mpck"

_METRIC_FLOOR = 1e-9
_METRIC_CEIL = 1e9
_METRIC_RIDGE = 1e-9


@dataclass
class ClusteringConfig:
    k: int
    variant: str = PCK
    max_em_iters: int = 100
    epsilon: float = 1e-6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.variant not in (PCK, MPCK):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_em_iters < 1:
            raise ValueError("max_em_iters must be positive")


@dataclass
class ClusterModel:
    """Centroids, per-cluster metrics, and the current assignment.

    ``extreme_pairs`` caches, per cluster, the indices of the two points
    with the greatest separation under that cluster's metric together
    with their squared metric distance; this feeds the cannot-link
    penalty.
    """

    centroids: np.ndarray  # (k, d)
    metrics: np.ndarray  # (k, d, d), symmetric positive-definite
    assignment: dict[str, int] = field(default_factory=dict)
    extreme_pairs: Optional[list[tuple[int, int, float]]] = None

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def max_separation(self, h: int) -> float:
        if self.extreme_pairs is None:
            return 0.0
        return self.extreme_pairs[h][2]

    def check_metrics(self) -> None:
        for h in range(self.k):
            diag = np.diagonal(self.metrics[h])
            if np.any(diag <= 0) or np.linalg.det(self.metrics[h]) <= 0:
                raise ValueError(f"metric of cluster {h} is not positive-definite")


def maha_sq(diff: np.ndarray, metric: np.ndarray) -> float:
    """Squared Mahalanobis distance of a difference vector under a metric."""
    return float(diff @ metric @ diff)


def penalty_ml(
    x_i: np.ndarray,
    x_j: np.ndarray,
    metric_i: np.ndarray,
    metric_j: np.ndarray,
    variant: str = MPCK,
) -> float:
    """Must-link violation cost: half the squared metric distance under
    each endpoint's cluster metric; constant 1 for the pck variant."""
    if variant == PCK:
        return 1.0
    diff = x_i - x_j
    return 0.5 * maha_sq(diff, metric_i) + 0.5 * maha_sq(diff, metric_j)


def penalty_cl(
    x_i: np.ndarray,
    x_j: np.ndarray,
    metric_i: np.ndarray,
    max_separation_i: float,
    variant: str = MPCK,
) -> float:
    """Cannot-link violation cost: the separation of the farthest pair in
    x_i's cluster minus the pair's own distance, clamped at zero;
    constant 1 for the pck variant."""
    if variant == PCK:
        return 1.0
    value = max_separation_i - maha_sq(x_i - x_j, metric_i)
    return max(value, 0.0)


def _adjacency(constraints: ConstraintSet) -> dict[str, list[tuple[str, float, str]]]:
    adj: dict[str, list[tuple[str, float, str]]] = {}
    for c in constraints:
        adj.setdefault(c.a, []).append((c.b, c.weight, c.kind))
        adj.setdefault(c.b, []).append((c.a, c.weight, c.kind))
    return adj


def objective_value(
    view: ViewData,
    constraints: ConstraintSet,
    model: ClusterModel,
    variant: str = MPCK,
) -> float:
    """Evaluate the clustering objective: distance terms minus log-dets,
    plus weighted penalties for each violated constraint."""
    model.check_metrics()
    total = 0.0
    logdets = [float(np.linalg.slogdet(model.metrics[h])[1]) for h in range(model.k)]
    for iid in view.instance_ids:
        h = model.assignment[iid]
        diff = view.row(iid) - model.centroids[h]
        total += maha_sq(diff, model.metrics[h]) - logdets[h]
    for c in constraints:
        if c.a not in model.assignment or c.b not in model.assignment:
            continue
        ha, hb = model.assignment[c.a], model.assignment[c.b]
        xa, xb = view.row(c.a), view.row(c.b)
        if c.kind == MUST_LINK and ha != hb:
            total += c.weight * penalty_ml(
                xa, xb, model.metrics[ha], model.metrics[hb], variant
            )
        elif c.kind == CANNOT_LINK and ha == hb:
            total += c.weight * penalty_cl(
                xa, xb, model.metrics[ha], model.max_separation(ha), variant
            )
    return total


def init_centroids(
    view: ViewData, constraints: ConstraintSet, k: int, seed: int
) -> np.ndarray:
    """Seed centroids from must-link components, then farthest points.

    Must-link components of the view's constraints are ranked by size;
    the centroids of the k largest become seeds. Remaining slots are
    filled by farthest-point selection (first pick seeded-random when no
    component exists).
    """
    if k > view.n:
        raise ValueError(f"k={k} exceeds the number of instances ({view.n})")
    uf = _UnionFind()
    ml_ids: set[str] = set()
    for c in constraints.of_kind(MUST_LINK):
        if c.a in view and c.b in view:
            uf.union(c.a, c.b)
            ml_ids.update((c.a, c.b))
    groups: dict[str, list[str]] = {}
    for iid in sorted(ml_ids):
        groups.setdefault(uf.find(iid), []).append(iid)
    ranked = sorted(groups.values(), key=lambda g: (-len(g), g[0]))
    seeds: list[np.ndarray] = []
    for group in ranked[:k]:
        pts = np.stack([view.row(iid) for iid in group])
        seeds.append(pts.mean(axis=0))

    rng = np.random.default_rng(seed)
    while len(seeds) < k:
        if not seeds:
            seeds.append(view.instances[int(rng.integers(view.n))].copy())
            continue
        centers = np.stack(seeds)
        d2 = ((view.instances[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        nearest = d2.min(axis=1)
        seeds.append(view.instances[int(np.argmax(nearest))].copy())
    return np.stack(seeds)


def assign_step(
    view: ViewData,
    constraints: ConstraintSet,
    model: ClusterModel,
    variant: str = MPCK,
) -> dict[str, int]:
    """Single pass in ascending id order, placing each instance in the
    cluster that minimizes its own objective contribution.

    Partner penalties use the most recent assignments; partners not yet
    assigned contribute nothing. Ties break to the lowest cluster index.
    """
    assignment = dict(model.assignment)
    adj = _adjacency(constraints)
    logdets = np.array(
        [float(np.linalg.slogdet(model.metrics[h])[1]) for h in range(model.k)]
    )
    # distance terms for all (instance, cluster) pairs in one shot
    diffs = view.instances[:, None, :] - model.centroids[None, :, :]
    dist2 = np.einsum("ihd,hde,ihe->ih", diffs, model.metrics, diffs)
    pck = variant == PCK
    for iid in sorted(view.instance_ids):
        row_idx = view.index_of(iid)
        x = view.row(iid)
        costs = dist2[row_idx] - logdets
        for partner, w, kind in adj.get(iid, ()):
            g = assignment.get(partner)
            if g is None:
                continue
            if kind == MUST_LINK:
                for h in range(model.k):
                    if g == h:
                        continue
                    costs[h] += w * (
                        1.0
                        if pck
                        else penalty_ml(
                            x, view.row(partner),
                            model.metrics[h], model.metrics[g], variant,
                        )
                    )
            else:
                costs[g] += w * (
                    1.0
                    if pck
                    else penalty_cl(
                        x, view.row(partner), model.metrics[g],
                        model.max_separation(g), variant,
                    )
                )
        assignment[iid] = int(np.argmin(costs))
    return assignment


def _extreme_pairs(
    view: ViewData, assignment: dict[str, int], metrics: np.ndarray, k: int
) -> list[tuple[int, int, float]]:
    """Farthest pair per cluster under that cluster's metric."""
    members: list[list[int]] = [[] for _ in range(k)]
    for iid, h in assignment.items():
        members[h].append(view.index_of(iid))
    out: list[tuple[int, int, float]] = []
    for h in range(k):
        idx = sorted(members[h])
        best = (0, 0, 0.0)
        if len(idx) >= 2:
            pts = view.instances[idx]
            diffs = pts[:, None, :] - pts[None, :, :]
            d2 = np.einsum("ijd,de,ije->ij", diffs, metrics[h], diffs)
            i, j = np.unravel_index(int(np.argmax(d2)), d2.shape)
            best = (idx[i], idx[j], float(d2[i, j]))
        out.append(best)
    return out


def update_step(
    view: ViewData,
    constraints: ConstraintSet,
    assignment: dict[str, int],
    k: int,
    variant: str = MPCK,
    prev_model: Optional[ClusterModel] = None,
) -> tuple[ClusterModel, list[str]]:
    """Re-estimate centroids (and, for mpck, the diagonal metrics).

    Empty clusters are reseeded with the instance farthest from its own
    centroid under the current metric; each such event is reported.
    """
    d = view.dim
    assignment = dict(assignment)
    events: list[str] = []

    def cluster_members() -> list[list[str]]:
        members: list[list[str]] = [[] for _ in range(k)]
        for iid in sorted(assignment):
            members[assignment[iid]].append(iid)
        return members

    members = cluster_members()
    for h in range(k):
        if members[h]:
            continue
        # farthest instance from its current centroid, under the current metric
        best_iid, best_dist = None, -1.0
        metrics = prev_model.metrics if prev_model is not None else np.stack([np.eye(d)] * k)
        cents = prev_model.centroids if prev_model is not None else None
        for iid in sorted(assignment):
            g = assignment[iid]
            if len(members[g]) <= 1:
                continue
            if cents is not None:
                diff = view.row(iid) - cents[g]
            else:
                grp = np.stack([view.row(j) for j in members[g]])
                diff = view.row(iid) - grp.mean(axis=0)
            dist = maha_sq(diff, metrics[g])
            if dist > best_dist:
                best_iid, best_dist = iid, dist
        if best_iid is None:
            raise ValueError("cannot reseed empty cluster: too few instances")
        members[assignment[best_iid]].remove(best_iid)
        assignment[best_iid] = h
        members[h].append(best_iid)
        events.append(f"reseeded empty cluster {h} with instance {best_iid}")

    centroids = np.zeros((k, d))
    for h in range(k):
        pts = np.stack([view.row(iid) for iid in members[h]])
        centroids[h] = pts.mean(axis=0)

    metrics = np.stack([np.eye(d)] * k)
    if variant == MPCK:
        scatter = np.zeros((k, d))
        for h in range(k):
            pts = np.stack([view.row(iid) for iid in members[h]])
            scatter[h] = ((pts - centroids[h]) ** 2).sum(axis=0)
        viol = np.zeros((k, d))
        prev_metrics = (
            prev_model.metrics if prev_model is not None else metrics
        )
        extremes = _extreme_pairs(view, assignment, prev_metrics, k)
        for c in constraints:
            if c.a not in assignment or c.b not in assignment:
                continue
            ha, hb = assignment[c.a], assignment[c.b]
            dsq = (view.row(c.a) - view.row(c.b)) ** 2
            if c.kind == MUST_LINK and ha != hb:
                viol[ha] += 0.5 * c.weight * dsq
                viol[hb] += 0.5 * c.weight * dsq
            elif c.kind == CANNOT_LINK and ha == hb:
                ia, ib, _ = extremes[ha]
                ext = (view.instances[ia] - view.instances[ib]) ** 2
                viol[ha] += c.weight * np.maximum(ext - dsq, 0.0)
        for h in range(k):
            denom = scatter[h] + viol[h] + _METRIC_RIDGE
            diag = np.clip(len(members[h]) / denom, _METRIC_FLOOR, _METRIC_CEIL)
            metrics[h] = np.diag(diag)

    model = ClusterModel(centroids=centroids, metrics=metrics, assignment=assignment)
    model.extreme_pairs = _extreme_pairs(view, assignment, metrics, k)
    return model, events


@dataclass
class ClusterRun:
    model: ClusterModel
    objective_trace: list[float]
    events: list[str]

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def cluster(
    view: ViewData, constraints: ConstraintSet, config: ClusteringConfig
) -> ClusterRun:
    """Alternate assignment and update steps until the objective change
    drops below epsilon or the iteration cap is reached."""
    centroids = init_centroids(view, constraints, config.k, config.seed)
    d = view.dim
    model = ClusterModel(
        centroids=centroids,
        metrics=np.stack([np.eye(d)] * config.k),
        assignment={},
        extreme_pairs=[(0, 0, 0.0)] * config.k,
    )
    trace: list[float] = []
    events: list[str] = []
    prev_obj = np.inf
    for _ in range(config.max_em_iters):
        assignment = assign_step(view, constraints, model, config.variant)
        model, step_events = update_step(
            view, constraints, assignment, config.k, config.variant, prev_model=model
        )
        events.extend(step_events)
        obj = objective_value(view, constraints, model, config.variant)
        trace.append(obj)
        if abs(prev_obj - obj) < config.epsilon:
            break
        prev_obj = obj
    return ClusterRun(model=model, objective_trace=trace, events=events)
