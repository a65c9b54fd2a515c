import numpy as np
import pytest

import oracles
from conftest import random_view
from mvclust.ckmeans import ClusteringConfig, cluster
from mvclust.evaluate import (
    expected_propagation_counts,
    mean_f,
    overlap_diagnostics,
    pairwise_f,
    symmetric_kl,
    weighted_precision,
)
from mvclust.model import CANNOT_LINK, MUST_LINK, ConstraintSet
from mvclust.propagation import cluster_gaussians


def test_pairwise_f_hand_example():
    # truth: {a, b} vs {c, d}; prediction lumps everything together:
    # 6 predicted pairs, 2 of them truly same-cluster
    assignment = {"a": 0, "b": 0, "c": 0, "d": 0}
    truth = {"a": "x", "b": "x", "c": "y", "d": "y"}
    scores = pairwise_f(assignment, truth)
    assert scores.precision == pytest.approx(2 / 6)
    assert scores.recall == 1.0
    assert scores.f_measure == pytest.approx(0.5)


def test_pairwise_f_perfect_and_degenerate():
    assignment = {"a": 0, "b": 0, "c": 1}
    truth = {"a": "x", "b": "x", "c": "y"}
    assert pairwise_f(assignment, truth).f_measure == 1.0
    # all singleton prediction: no predicted pairs, precision defaults to 1
    singles = {"a": 0, "b": 1, "c": 2}
    scores = pairwise_f(singles, truth)
    assert scores.precision == 1.0
    assert scores.recall == 0.0
    assert scores.f_measure == pytest.approx(0.0)
    # all-singleton truth: no true pairs, recall defaults to 1
    lone = {"a": "x", "b": "y", "c": "z"}
    assert pairwise_f(singles, lone).recall == 1.0
    with pytest.raises(ValueError):
        pairwise_f({"a": 0}, {"b": "x"})


def test_pairwise_f_matches_enumeration_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(2, 101))
        ids = [f"i{j:03d}" for j in range(n)]
        assignment = {i: int(rng.integers(1, 6)) for i in ids}
        truth = {i: f"c{int(rng.integers(1, 5))}" for i in ids}
        got = pairwise_f(assignment, truth)
        p, r, f = oracles.naive_pairwise_f(assignment, truth)
        assert got.precision == pytest.approx(p, abs=1e-12)
        assert got.recall == pytest.approx(r, abs=1e-12)
        assert got.f_measure == pytest.approx(f, abs=1e-12)


def test_mean_f():
    assert mean_f([1.0, 0.5]) == pytest.approx(0.75)
    with pytest.raises(ValueError):
        mean_f([])


def test_weighted_precision_and_scale_invariance():
    truth = {"a": "x", "b": "x", "c": "y"}
    cs = ConstraintSet()
    cs.add("a", "b", 2.0, MUST_LINK)   # correct
    cs.add("a", "c", 1.0, MUST_LINK)   # wrong
    cs.add("b", "c", 4.0, CANNOT_LINK) # correct
    wp = weighted_precision(cs, truth)
    assert wp[MUST_LINK] == pytest.approx(2.0 / 3.0)
    assert wp[CANNOT_LINK] == 1.0
    scaled = ConstraintSet()
    for c in cs:
        scaled.add(c.a, c.b, 10.0 * c.weight, c.kind)
    assert weighted_precision(scaled, truth) == pytest.approx(wp)
    # absent kind reports None, not zero
    ml_only = ConstraintSet()
    ml_only.add("a", "b", 1.0, MUST_LINK)
    assert weighted_precision(ml_only, truth)[CANNOT_LINK] is None
    with pytest.raises(ValueError):
        weighted_precision(cs, {"a": "x"})


def test_expected_propagation_counts():
    assert expected_propagation_counts(1000, 10) == (4949, 449999)
    assert expected_propagation_counts(4, 2) == (0, 3)
    with pytest.raises(ValueError):
        expected_propagation_counts(10, 3)


def test_symmetric_kl_identity_covariances(rng):
    for _ in range(10):
        d = int(rng.integers(1, 5))
        mu1 = rng.normal(size=d)
        mu2 = rng.normal(size=d)
        got = symmetric_kl(mu1, np.eye(d), mu2, np.eye(d))
        assert got == pytest.approx(float((mu2 - mu1) @ (mu2 - mu1)), abs=1e-10)
    assert symmetric_kl(np.zeros(2), np.eye(2), np.zeros(2), np.eye(2)) == pytest.approx(0.0)
    with pytest.raises(ValueError):
        symmetric_kl(np.zeros(2), np.zeros((2, 2)), np.zeros(2), np.eye(2))


def test_overlap_diagnostics(rng):
    view = random_view(rng, 30, 2, k_labels=2)
    run = cluster(view, ConstraintSet(), ClusteringConfig(k=2, seed=0))
    gaussians = cluster_gaussians(view, run.model, "pck")
    report = overlap_diagnostics(gaussians, view, run.model.assignment)
    assert set(report.pairwise_kl) == {(0, 1)}
    assert 0.0 <= report.disagreement_rate <= 1.0
    # an absurd threshold always warns
    noisy = overlap_diagnostics(
        gaussians, view, run.model.assignment, kl_threshold=1e12
    )
    assert noisy.warnings
