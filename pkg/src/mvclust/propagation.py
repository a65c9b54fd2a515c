"""Gaussian constraint propagation over the mapped instances of a view.

The learned clustering is reinterpreted as a mixture of Gaussians: each
cluster's metric inverse is rescaled against the empirical covariance so
that the first principal components match, giving an absolute-scale
covariance. Each given constraint is then propagated to nearby candidate
pairs via a radial basis weighting centered at the constraint endpoints,
with per-endpoint covariances shrunk by the model's confidence in the
endpoint's cluster membership. Endpoint evaluations are memoized, and
for diagonal covariances the exponent is accumulated incrementally with
early stopping once the propagation weight is guaranteed to fall below
the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ckmeans import MPCK, PCK, ClusterModel
from .model import ConstraintSet, MappedSubset, ViewData

_EIG_FLOOR = 1e-12


@dataclass
class ClusterGaussians:
    """Per-cluster Gaussian models: rescaled covariances and inverses."""

    centroids: np.ndarray  # (k, d)
    covariances: np.ndarray  # (k, d, d)
    inverses: np.ndarray  # (k, d, d)
    alphas: np.ndarray  # (k,)
    empirical: np.ndarray  # (k, d, d)
    diagonal: bool

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass
class PropagationParams:
    threshold: float
    candidates: MappedSubset
    gamma: float = 1e-6

    def __post_init__(self) -> None:
        if not (0.0 < self.threshold <= 1.0):
            raise ValueError("threshold must lie in (0, 1]")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def empirical_cov(points: np.ndarray, gamma: float) -> np.ndarray:
    """Mean outer-product scatter of the points plus a gamma*I ridge."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("need at least one point")
    mu = points.mean(axis=0)
    centered = points - mu
    cov = centered.T @ centered / points.shape[0]
    return cov + gamma * np.eye(points.shape[1])


def _check_spd(mat: np.ndarray, name: str) -> np.ndarray:
    mat = np.asarray(mat, dtype=float)
    if not np.allclose(mat, mat.T, atol=1e-10):
        raise ValueError(f"{name} is not symmetric")
    eigvals = np.linalg.eigvalsh(mat)
    if eigvals[0] <= 0:
        raise ValueError(f"{name} is not positive-definite")
    return mat


def rescale_alpha(
    metric_inverse: np.ndarray, empirical: np.ndarray
) -> tuple[float, np.ndarray]:
    """Scale the metric inverse so its first principal component has the
    same variance as the empirical covariance's."""
    metric_inverse = _check_spd(metric_inverse, "metric_inverse")
    empirical = _check_spd(empirical, "empirical")
    top_inv = float(np.linalg.eigvalsh(metric_inverse)[-1])
    top_emp = float(np.linalg.eigvalsh(empirical)[-1])
    alpha = top_emp / top_inv
    return alpha, alpha * metric_inverse


def cluster_gaussians(
    view: ViewData, model: ClusterModel, variant: str, gamma: float = 1e-6
) -> ClusterGaussians:
    """Build the per-cluster Gaussians backing propagation.

    pck uses the empirical covariance directly; mpck rescales the learned
    metric inverse, falling back to the empirical covariance when the
    metric inverse is degenerate.
    """
    k, d = model.k, view.dim
    covs = np.zeros((k, d, d))
    invs = np.zeros((k, d, d))
    alphas = np.ones(k)
    emps = np.zeros((k, d, d))
    diagonal = True
    members: list[list[int]] = [[] for _ in range(k)]
    for iid, h in model.assignment.items():
        members[h].append(view.index_of(iid))
    for h in range(k):
        pts = view.instances[sorted(members[h])]
        emps[h] = empirical_cov(pts, gamma)
        if variant == MPCK:
            metric_inv = np.linalg.inv(model.metrics[h])
            top = float(np.linalg.eigvalsh(metric_inv)[-1])
            if top <= _EIG_FLOOR:
                covs[h] = emps[h]
            else:
                alphas[h], covs[h] = rescale_alpha(metric_inv, emps[h])
        else:
            covs[h] = emps[h]
        invs[h] = np.linalg.inv(covs[h])
        if not np.allclose(covs[h], np.diag(np.diagonal(covs[h]))):
            diagonal = False
    return ClusterGaussians(
        centroids=model.centroids.copy(),
        covariances=covs,
        inverses=invs,
        alphas=alphas,
        empirical=emps,
        diagonal=diagonal,
    )


def membership_weight(x: np.ndarray, mu: np.ndarray, cov_inv: np.ndarray) -> float:
    """Gaussian density of x under a cluster, normalized to 1 at the centroid."""
    diff = np.asarray(x, dtype=float) - mu
    return float(np.exp(-0.5 * (diff @ cov_inv @ diff)))


def _endpoint_cov_inv(
    x_u: np.ndarray, c_u: int, gaussians: ClusterGaussians
) -> np.ndarray:
    """Inverse covariance of the propagation Gaussian around one endpoint."""
    g = membership_weight(x_u, gaussians.centroids[c_u], gaussians.inverses[c_u])
    return gaussians.inverses[c_u] / g


def pair_weight(
    x_i: np.ndarray,
    x_j: np.ndarray,
    x_u: np.ndarray,
    x_v: np.ndarray,
    c_u: int,
    c_v: int,
    weight: float,
    gaussians: ClusterGaussians,
) -> float:
    """Weight of the constraint propagated from (x_u, x_v) to (x_i, x_j).

    Both pairings of constraint endpoints to target endpoints are
    evaluated and the larger kept, so the result is invariant under a
    swap of the candidate endpoints.
    """
    inv_u = _endpoint_cov_inv(x_u, c_u, gaussians)
    inv_v = _endpoint_cov_inv(x_v, c_v, gaussians)

    def w_prime(a: np.ndarray, b: np.ndarray) -> float:
        da = a - x_u
        db = b - x_v
        return float(np.exp(-0.5 * (da @ inv_u @ da)) * np.exp(-0.5 * (db @ inv_v @ db)))

    return weight * max(w_prime(x_i, x_j), w_prime(x_j, x_i))


def _endpoint_weights(
    cand: np.ndarray,
    x_u: np.ndarray,
    cov_inv_u: np.ndarray,
    diagonal: bool,
    cutoff: float,
) -> np.ndarray:
    """Memoized endpoint propagation G(x_i, x_u) for all candidates.

    For a diagonal covariance the exponent is accumulated dimension by
    dimension; once a candidate's running sum exceeds the cutoff its
    weight is pinned to zero and no further terms are evaluated for it.
    """
    diff = cand - x_u
    if diagonal:
        inv_diag = np.diagonal(cov_inv_u)
        total = np.zeros(cand.shape[0])
        alive = np.ones(cand.shape[0], dtype=bool)
        for dim in range(cand.shape[1]):
            total[alive] += diff[alive, dim] ** 2 * inv_diag[dim]
            alive &= total <= cutoff
        out = np.exp(-0.5 * total)
        out[~alive] = 0.0
        return out
    quad = np.einsum("id,de,ie->i", diff, cov_inv_u, diff)
    return np.exp(-0.5 * quad)


def propagate(
    view: ViewData,
    constraints: ConstraintSet,
    model: ClusterModel,
    gaussians: ClusterGaussians,
    params: PropagationParams,
) -> ConstraintSet:
    """Propagate every source constraint to all candidate pairs.

    Candidate pairs are the unordered pairs of mapped instances; for each
    pair and source constraint the propagated weight is the source weight
    times the better of the two endpoint pairings. Pairs whose best
    weight per kind reaches the threshold are emitted, merged by maximum
    weight.
    """
    cand_ids = sorted(i for i in params.candidates.ids if i in view)
    sources = list(constraints)
    out = ConstraintSet()
    if not cand_ids or not sources:
        return out

    cand = np.stack([view.row(i) for i in cand_ids])
    endpoint_ids = sorted(constraints.instance_ids())
    w_cap = max(c.weight for c in sources)
    if w_cap <= 0:
        return out
    ratio = params.threshold / max(w_cap, params.threshold)
    cutoff = -2.0 * np.log(ratio) if ratio < 1.0 else 0.0

    memo: dict[str, np.ndarray] = {}
    for uid in endpoint_ids:
        x_u = view.row(uid)
        c_u = model.assignment[uid]
        inv_u = _endpoint_cov_inv(x_u, c_u, gaussians)
        memo[uid] = _endpoint_weights(cand, x_u, inv_u, gaussians.diagonal, cutoff)

    n = len(cand_ids)
    best: dict[str, np.ndarray] = {}
    for c in sources:
        g_u, g_v = memo[c.a], memo[c.b]
        w_mat = c.weight * np.maximum(np.outer(g_u, g_v), np.outer(g_v, g_u))
        if c.kind in best:
            np.maximum(best[c.kind], w_mat, out=best[c.kind])
        else:
            best[c.kind] = w_mat

    iu, ju = np.triu_indices(n, k=1)
    for kind, w_mat in best.items():
        weights = w_mat[iu, ju]
        keep = weights >= params.threshold
        for a, b, w in zip(iu[keep], ju[keep], weights[keep]):
            out.add(cand_ids[a], cand_ids[b], float(w), kind)
    return out
