"""Co-EM drivers that alternate clustering with constraint propagation.

Each outer iteration runs, for every view in turn, an M-step (cluster
under the unified constraint set, which merges the view's own
constraints with constraints transferred from the other views) and an
E-step (propagate the view's constraints to its mapped instances). The
loop stops when every view's propagated set and clustering objective
have stabilized. A single-view variant propagates within one view over
all of its instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import propagation
from .ckmeans import ClusterRun, ClusteringConfig, cluster
from .model import (
    CANNOT_LINK,
    MUST_LINK,
    ClosureConflict,
    ConstraintSet,
    RelationMap,
    ViewData,
    build_closure,
    map_constraints,
    mapped_subset,
    max_union,
)

INFER_PROPAGATION = "propagation"
INFER_MEMBERSHIP = "membership"

_PROP_WEIGHT_ATOL = 1e-9


@dataclass
class CoEmConfig:
    thresholds: dict[str, float]
    clustering: ClusteringConfig
    gamma: float = 1e-6
    max_outer_iters: int = 20
    view_order: str = "fixed"  # or "seeded-random"
    order_seed: int = 0

    def __post_init__(self) -> None:
        for v, t in self.thresholds.items():
            if not (0.0 < t <= 1.0):
                raise ValueError(f"threshold for view {v!r} must lie in (0, 1]")
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be at least 1")
        if self.view_order not in ("fixed", "seeded-random"):
            raise ValueError(f"unknown view_order {self.view_order!r}")


@dataclass
class CoEmState:
    propagated: dict[str, ConstraintSet]
    objectives: dict[str, float]
    iteration: int


def has_converged(
    prev: Optional[CoEmState], curr: CoEmState, epsilon: float, max_outer_iters: int
) -> tuple[bool, bool]:
    """Return (converged, forced) for two consecutive outer iterations.

    Converged means every view's propagated set is unchanged (same keys,
    weights within tolerance) and its objective moved by less than
    epsilon. Hitting the iteration cap counts as a forced stop.
    """
    if curr.iteration >= max_outer_iters:
        return True, True
    if prev is None:
        return False, False
    for view_id, p_curr in curr.propagated.items():
        p_prev = prev.propagated.get(view_id)
        if p_prev is None or not p_prev.close_weights(p_curr, _PROP_WEIGHT_ATOL):
            return False, False
        if abs(curr.objectives[view_id] - prev.objectives[view_id]) >= epsilon:
            return False, False
    return True, False


@dataclass
class CoEmResult:
    models: dict[str, ClusterRun]
    propagated: dict[str, ConstraintSet]
    unified: dict[str, ConstraintSet]
    trace: list[dict]
    converged: bool
    forced_stop: bool
    outer_iterations: int
    conflicts: list[ClosureConflict] = field(default_factory=list)


def run_multi_view(
    views: list[ViewData],
    constraints: dict[str, ConstraintSet],
    relations: list[RelationMap],
    config: CoEmConfig,
    infer_mode: str = INFER_PROPAGATION,
) -> CoEmResult:
    """Co-EM over two or more views with cross-view constraint transfer.

    Missing relation maps between a pair of views are treated as empty
    mappings: no transfer happens along that edge.
    """
    if infer_mode not in (INFER_PROPAGATION, INFER_MEMBERSHIP):
        raise ValueError(f"unknown infer_mode {infer_mode!r}")
    view_ids = [v.view_id for v in views]
    by_id = {v.view_id: v for v in views}
    base = {v: constraints.get(v, ConstraintSet()) for v in view_ids}

    closed, aug_relations, conflicts = build_closure(base, relations)
    closed = {v: closed.get(v, ConstraintSet()) for v in view_ids}
    subsets = {v: mapped_subset(by_id[v], aug_relations) for v in view_ids}

    rel_lookup: dict[tuple[str, str], RelationMap] = {}
    for rel in aug_relations:
        rel_lookup[(rel.from_view, rel.to_view)] = rel
        rel_lookup[(rel.to_view, rel.from_view)] = rel.reverse()

    prop: dict[str, ConstraintSet] = {v: ConstraintSet() for v in view_ids}
    runs: dict[str, ClusterRun] = {}
    unified: dict[str, ConstraintSet] = {}
    trace: list[dict] = []
    rng = np.random.default_rng(config.order_seed)

    prev_state: Optional[CoEmState] = None
    converged = forced = False
    iteration = 0
    while not converged:
        iteration += 1
        if config.view_order == "seeded-random":
            order = [view_ids[i] for i in rng.permutation(len(view_ids))]
        else:
            order = list(view_ids)
        record: dict = {"iteration": iteration, "views": {}}
        for v in order:
            view = by_id[v]
            # M-step: unify own (closed) constraints with transfers
            c_tilde = closed[v]
            for u in view_ids:
                if u == v:
                    continue
                rel = rel_lookup.get((u, v))
                if rel is None or not rel.pairs:
                    continue
                c_tilde = max_union(c_tilde, map_constraints(prop[u], rel))
            run = cluster(view, c_tilde, config.clustering)
            runs[v] = run
            unified[v] = c_tilde
            # E-step: infer constraints over the mapped subset
            if infer_mode == INFER_PROPAGATION:
                gaussians = propagation.cluster_gaussians(
                    view, run.model, config.clustering.variant, config.gamma
                )
                params = propagation.PropagationParams(
                    threshold=config.thresholds[v],
                    candidates=subsets[v],
                    gamma=config.gamma,
                )
                prop[v] = propagation.propagate(
                    view, closed[v], run.model, gaussians, params
                )
            else:
                prop[v] = baseline_cluster_membership(
                    run.model.assignment, subsets[v].ids
                )
            record["views"][v] = {
                "objective": run.objective,
                "n_propagated": len(prop[v]),
                "n_unified": len(c_tilde),
            }
        trace.append(record)
        state = CoEmState(
            propagated={v: prop[v].copy() for v in view_ids},
            objectives={v: runs[v].objective for v in view_ids},
            iteration=iteration,
        )
        converged, forced = has_converged(
            prev_state, state, config.clustering.epsilon, config.max_outer_iters
        )
        prev_state = state

    return CoEmResult(
        models=runs,
        propagated=prop,
        unified=unified,
        trace=trace,
        converged=True,
        forced_stop=forced,
        outer_iterations=iteration,
        conflicts=conflicts,
    )


def run_two_view(
    view_a: ViewData,
    view_b: ViewData,
    constraints: dict[str, ConstraintSet],
    relations: RelationMap,
    config: CoEmConfig,
    infer_mode: str = INFER_PROPAGATION,
) -> CoEmResult:
    """Two-view co-EM; thin wrapper over the general driver."""
    return run_multi_view(
        [view_a, view_b], constraints, [relations], config, infer_mode
    )


def run_single_view_cp(
    view: ViewData, constraints: ConstraintSet, config: CoEmConfig
) -> CoEmResult:
    """Constraint propagation within one view over all of its instances."""
    closed, _, conflicts = build_closure({view.view_id: constraints}, [])
    base = closed.get(view.view_id, ConstraintSet())
    all_ids = propagation.MappedSubset(view.view_id, set(view.instance_ids))

    prop = ConstraintSet()
    trace: list[dict] = []
    prev_state: Optional[CoEmState] = None
    converged = forced = False
    iteration = 0
    run: Optional[ClusterRun] = None
    unified = base
    while not converged:
        iteration += 1
        unified = max_union(base, prop)
        run = cluster(view, unified, config.clustering)
        gaussians = propagation.cluster_gaussians(
            view, run.model, config.clustering.variant, config.gamma
        )
        params = propagation.PropagationParams(
            threshold=config.thresholds[view.view_id],
            candidates=all_ids,
            gamma=config.gamma,
        )
        prop = propagation.propagate(view, base, run.model, gaussians, params)
        trace.append(
            {
                "iteration": iteration,
                "views": {
                    view.view_id: {
                        "objective": run.objective,
                        "n_propagated": len(prop),
                        "n_unified": len(unified),
                    }
                },
            }
        )
        state = CoEmState(
            propagated={view.view_id: prop.copy()},
            objectives={view.view_id: run.objective},
            iteration=iteration,
        )
        converged, forced = has_converged(
            prev_state, state, config.clustering.epsilon, config.max_outer_iters
        )
        prev_state = state

    return CoEmResult(
        models={view.view_id: run},
        propagated={view.view_id: prop},
        unified={view.view_id: unified},
        trace=trace,
        converged=True,
        forced_stop=forced,
        outer_iterations=iteration,
        conflicts=conflicts,
    )


def baseline_cluster_membership(
    assignment: dict[str, int], mapped_ids: set[str]
) -> ConstraintSet:
    """Infer a unit-weight constraint per mapped pair from relative
    cluster membership: same cluster gives a must-link, different
    clusters a cannot-link."""
    out = ConstraintSet()
    ids = sorted(i for i in mapped_ids if i in assignment)
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            kind = MUST_LINK if assignment[a] == assignment[b] else CANNOT_LINK
            out.add(a, b, 1.0, kind)
    return out
