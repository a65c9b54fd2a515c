"""Clustering evaluation and diagnostics.

Pairwise F-measure against ground-truth labels, weighted precision of
propagated constraints, closed-form propagation target counts, and
model-appropriateness diagnostics (cluster overlap via symmetric KL
divergence and model/partition disagreement).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import CANNOT_LINK, MUST_LINK, ConstraintSet, ViewData
from .propagation import ClusterGaussians, membership_weight


@dataclass
class PairwiseScores:
    precision: float
    recall: float
    f_measure: float


def pairwise_f(
    assignment: dict[str, int], true_labels: dict[str, str]
) -> PairwiseScores:
    """Pair-level precision/recall/F over same-cluster instance pairs.

    Conventions for empty denominators: no predicted same-cluster pairs
    gives precision 1, no true same-cluster pairs gives recall 1, and
    the F-measure of (0, 0) is 0.
    """
    if set(assignment) != set(true_labels):
        raise ValueError("assignment and labels must cover the same ids")
    pred_sizes: dict[int, int] = {}
    true_sizes: dict[str, int] = {}
    both_sizes: dict[tuple[int, str], int] = {}
    for iid, h in assignment.items():
        lab = true_labels[iid]
        pred_sizes[h] = pred_sizes.get(h, 0) + 1
        true_sizes[lab] = true_sizes.get(lab, 0) + 1
        both_sizes[(h, lab)] = both_sizes.get((h, lab), 0) + 1

    def pairs(n: int) -> int:
        return n * (n - 1) // 2

    n_pred = sum(pairs(n) for n in pred_sizes.values())
    n_same = sum(pairs(n) for n in true_sizes.values())
    n_correct = sum(pairs(n) for n in both_sizes.values())
    precision = n_correct / n_pred if n_pred else 1.0
    recall = n_correct / n_same if n_same else 1.0
    if precision + recall == 0:
        f = 0.0
    else:
        f = 2.0 * precision * recall / (precision + recall)
    return PairwiseScores(precision, recall, f)


def mean_f(values: list[float]) -> float:
    if not values:
        raise ValueError("need at least one view")
    return float(np.mean(values))


def weighted_precision(
    propagated: ConstraintSet, true_labels: dict[str, str]
) -> dict[str, Optional[float]]:
    """Per-kind weight-weighted fraction of label-consistent constraints.

    A kind with no constraints is reported as absent (None), not as 0.
    """
    sums = {MUST_LINK: 0.0, CANNOT_LINK: 0.0}
    good = {MUST_LINK: 0.0, CANNOT_LINK: 0.0}
    for c in propagated:
        if c.a not in true_labels or c.b not in true_labels:
            raise ValueError(f"labels missing for constraint endpoints {c.a}, {c.b}")
        same = true_labels[c.a] == true_labels[c.b]
        sums[c.kind] += c.weight
        if (c.kind == MUST_LINK) == same:
            good[c.kind] += c.weight
    return {
        kind: (good[kind] / sums[kind] if sums[kind] > 0 else None)
        for kind in (MUST_LINK, CANNOT_LINK)
    }


def expected_propagation_counts(n: int, k: int) -> tuple[int, int]:
    """Closed-form counts of correct propagation targets for one
    must-link / cannot-link constraint over k equal clusters of n/k
    points; degenerate negatives are clamped at 0."""
    if n % k != 0:
        raise ValueError("k must divide n")
    per = n // k
    num_ml = math.comb(per, 2) - 1
    num_cl = math.comb(n, 2) - k * math.comb(per, 2) - 1
    return max(num_ml, 0), max(num_cl, 0)


def symmetric_kl(
    mu1: np.ndarray, cov1: np.ndarray, mu2: np.ndarray, cov2: np.ndarray
) -> float:
    """Symmetric KL divergence between two multivariate normals."""
    d = mu1.shape[0]
    inv1 = np.linalg.inv(cov1)
    inv2 = np.linalg.inv(cov2)
    sign1, logdet1 = np.linalg.slogdet(cov1)
    sign2, logdet2 = np.linalg.slogdet(cov2)
    if sign1 <= 0 or sign2 <= 0:
        raise ValueError("covariance matrix is singular or not positive-definite")
    diff = mu2 - mu1
    kl12 = 0.5 * (
        np.trace(inv2 @ cov1) + diff @ inv2 @ diff - d + logdet2 - logdet1
    )
    kl21 = 0.5 * (
        np.trace(inv1 @ cov2) + diff @ inv1 @ diff - d + logdet1 - logdet2
    )
    return float(kl12 + kl21)


@dataclass
class OverlapReport:
    pairwise_kl: dict[tuple[int, int], float]
    disagreement_rate: float
    warnings: list[str] = field(default_factory=list)


def overlap_diagnostics(
    gaussians: ClusterGaussians,
    view: ViewData,
    assignment: dict[str, int],
    kl_threshold: float = 1.0,
    disagreement_threshold: float = 0.25,
) -> OverlapReport:
    """Check whether the learned cluster distributions look usable for
    propagation: low symmetric KL between a cluster pair or a high
    model/partition disagreement rate triggers a warning. Warnings never
    gate execution."""
    k = gaussians.k
    if k < 2:
        raise ValueError("need at least two clusters")
    kls: dict[tuple[int, int], float] = {}
    warnings: list[str] = []
    for i in range(k):
        for j in range(i + 1, k):
            kl = symmetric_kl(
                gaussians.centroids[i],
                gaussians.covariances[i],
                gaussians.centroids[j],
                gaussians.covariances[j],
            )
            kls[(i, j)] = kl
            if kl < kl_threshold:
                warnings.append(
                    f"clusters {i} and {j} overlap (symmetric KL {kl:.4g} < "
                    f"{kl_threshold:.4g}); the data may be inappropriate for "
                    "constraint propagation"
                )
    disagree = 0
    for iid, h in assignment.items():
        x = view.row(iid)
        dens = [
            membership_weight(x, gaussians.centroids[g], gaussians.inverses[g])
            for g in range(k)
        ]
        if int(np.argmax(dens)) != h:
            disagree += 1
    rate = disagree / max(len(assignment), 1)
    if rate > disagreement_threshold:
        warnings.append(
            f"model/partition disagreement rate {rate:.3f} exceeds "
            f"{disagreement_threshold:.3f}; the data may be inappropriate for "
            "constraint propagation"
        )
    return OverlapReport(pairwise_kl=kls, disagreement_rate=rate, warnings=warnings)
