import numpy as np
import pytest

from conftest import random_constraints, random_view
from mvclust.ckmeans import ClusteringConfig, cluster
from mvclust.coem import (
    CoEmConfig,
    CoEmState,
    baseline_cluster_membership,
    has_converged,
    run_multi_view,
    run_single_view_cp,
    run_two_view,
)
from mvclust.model import (
    CANNOT_LINK,
    MUST_LINK,
    ConstraintSet,
    RelationMap,
    build_closure,
)


def _config(view_ids, seed=0, t=0.75, max_outer=20):
    return CoEmConfig(
        thresholds={v: t for v in view_ids},
        clustering=ClusteringConfig(k=2, variant="pck", seed=seed),
        max_outer_iters=max_outer,
    )


def _two_views(rng, n=20):
    va = random_view(rng, n, 2, view_id="A")
    vb = random_view(rng, n, 2, view_id="B")
    rel = RelationMap(
        "A", "B",
        {(va.instance_ids[i], vb.instance_ids[i]) for i in range(0, n, 2)},
    )
    return va, vb, rel


def test_config_validation():
    clustering = ClusteringConfig(k=2)
    with pytest.raises(ValueError):
        CoEmConfig(thresholds={"A": 0.0}, clustering=clustering)
    with pytest.raises(ValueError):
        CoEmConfig(thresholds={"A": 0.5}, clustering=clustering, max_outer_iters=0)
    with pytest.raises(ValueError):
        CoEmConfig(thresholds={"A": 0.5}, clustering=clustering, view_order="zigzag")


def test_has_converged_cases():
    cs = ConstraintSet()
    cs.add("a", "b", 1.0, MUST_LINK)
    s1 = CoEmState(propagated={"A": cs.copy()}, objectives={"A": 10.0}, iteration=1)
    s2 = CoEmState(propagated={"A": cs.copy()}, objectives={"A": 10.0}, iteration=2)
    assert has_converged(None, s1, 1e-6, 20) == (False, False)
    assert has_converged(s1, s2, 1e-6, 20) == (True, False)
    # iteration cap forces a stop regardless of state
    s_cap = CoEmState(propagated={"A": ConstraintSet()}, objectives={"A": 0.0}, iteration=20)
    assert has_converged(s1, s_cap, 1e-6, 20) == (True, True)
    # a moved objective blocks convergence
    s3 = CoEmState(propagated={"A": cs.copy()}, objectives={"A": 10.1}, iteration=2)
    assert has_converged(s1, s3, 1e-6, 20) == (False, False)
    # a weight shift beyond tolerance blocks convergence
    cs_shift = ConstraintSet()
    cs_shift.add("a", "b", 1.0 + 1e-6, MUST_LINK)
    s4 = CoEmState(propagated={"A": cs_shift}, objectives={"A": 10.0}, iteration=2)
    assert has_converged(s1, s4, 1e-6, 20) == (False, False)
    # a weight shift inside tolerance does not
    cs_tiny = ConstraintSet()
    cs_tiny.add("a", "b", 1.0 + 1e-10, MUST_LINK)
    s5 = CoEmState(propagated={"A": cs_tiny}, objectives={"A": 10.0}, iteration=2)
    assert has_converged(s1, s5, 1e-6, 20) == (True, False)


def test_empty_relations_reduce_to_standalone_clustering(rng):
    va, vb, _ = _two_views(rng)
    constraints = {
        "A": random_constraints(rng, va.instance_ids, 8),
        "B": random_constraints(rng, vb.instance_ids, 8),
    }
    empty = RelationMap("A", "B", set())
    config = _config(["A", "B"])
    result = run_two_view(va, vb, constraints, empty, config)
    closed, _, _ = build_closure(constraints, [empty])
    for view in (va, vb):
        solo = cluster(view, closed[view.view_id], config.clustering)
        assert result.models[view.view_id].model.assignment == solo.model.assignment
        assert len(result.propagated[view.view_id]) == 0


def test_two_view_is_multi_view_with_two_views(rng):
    va, vb, rel = _two_views(rng)
    constraints = {
        "A": random_constraints(rng, va.instance_ids, 6),
        "B": random_constraints(rng, vb.instance_ids, 6),
    }
    config = _config(["A", "B"])
    r1 = run_two_view(va, vb, constraints, rel, config)
    r2 = run_multi_view([va, vb], constraints, [rel], config)
    for v in ("A", "B"):
        assert r1.models[v].model.assignment == r2.models[v].model.assignment
        assert r1.propagated[v].close_weights(r2.propagated[v], atol=0.0)


def test_coem_deterministic(rng):
    va, vb, rel = _two_views(rng)
    constraints = {
        "A": random_constraints(rng, va.instance_ids, 10),
        "B": random_constraints(rng, vb.instance_ids, 10),
    }
    r1 = run_two_view(va, vb, constraints, rel, _config(["A", "B"], seed=5))
    r2 = run_two_view(va, vb, constraints, rel, _config(["A", "B"], seed=5))
    for v in ("A", "B"):
        assert r1.models[v].model.assignment == r2.models[v].model.assignment
        assert r1.propagated[v].close_weights(r2.propagated[v], atol=0.0)
    assert r1.outer_iterations == r2.outer_iterations


def test_coem_trace_and_forced_stop(rng):
    va, vb, rel = _two_views(rng)
    constraints = {
        "A": random_constraints(rng, va.instance_ids, 10),
        "B": random_constraints(rng, vb.instance_ids, 10),
    }
    result = run_two_view(va, vb, constraints, rel, _config(["A", "B"], max_outer=1))
    assert result.forced_stop
    assert result.outer_iterations == 1
    assert len(result.trace) == 1
    rec = result.trace[0]["views"]
    for v in ("A", "B"):
        assert {"objective", "n_propagated", "n_unified"} <= set(rec[v])


def test_three_view_smoke(rng):
    va = random_view(rng, 14, 2, view_id="A")
    vb = random_view(rng, 14, 2, view_id="B")
    vc = random_view(rng, 14, 2, view_id="C")
    rel_ab = RelationMap("A", "B", {(va.instance_ids[i], vb.instance_ids[i]) for i in range(7)})
    rel_bc = RelationMap("B", "C", {(vb.instance_ids[i], vc.instance_ids[i]) for i in range(7)})
    constraints = {v.view_id: random_constraints(rng, v.instance_ids, 6) for v in (va, vb, vc)}
    config = _config(["A", "B", "C"])
    result = run_multi_view([va, vb, vc], constraints, [rel_ab, rel_bc], config)
    assert set(result.models) == {"A", "B", "C"}
    assert result.converged


def test_single_view_cp_runs_and_is_deterministic(rng):
    view = random_view(rng, 25, 2, view_id="A")
    constraints = random_constraints(rng, view.instance_ids, 10)
    config = _config(["A"])
    r1 = run_single_view_cp(view, constraints, config)
    r2 = run_single_view_cp(view, constraints, config)
    assert r1.models["A"].model.assignment == r2.models["A"].model.assignment
    assert r1.propagated["A"].close_weights(r2.propagated["A"], atol=0.0)
    # propagation covers the whole view, so constraints can land anywhere
    assert r1.propagated["A"].instance_ids() <= set(view.instance_ids)


def test_baseline_cluster_membership():
    assignment = {"a": 0, "b": 0, "c": 1, "z": 0}
    out = baseline_cluster_membership(assignment, {"a", "b", "c", "missing"})
    assert out.weight("a", "b", MUST_LINK) == 1.0
    assert out.weight("a", "c", CANNOT_LINK) == 1.0
    assert out.weight("b", "c", CANNOT_LINK) == 1.0
    assert len(out) == 3


def test_seeded_random_view_order(rng):
    va, vb, rel = _two_views(rng)
    constraints = {
        "A": random_constraints(rng, va.instance_ids, 8),
        "B": random_constraints(rng, vb.instance_ids, 8),
    }
    config = CoEmConfig(
        thresholds={"A": 0.75, "B": 0.75},
        clustering=ClusteringConfig(k=2, variant="pck", seed=0),
        view_order="seeded-random",
        order_seed=3,
    )
    r1 = run_two_view(va, vb, constraints, rel, config)
    r2 = run_two_view(va, vb, constraints, rel, config)
    for v in ("A", "B"):
        assert r1.models[v].model.assignment == r2.models[v].model.assignment
