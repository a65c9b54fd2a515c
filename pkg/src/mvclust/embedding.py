"""Spectral feature preprocessing.

RBF affinity over the raw features, normalized graph Laplacian, and a
low-dimensional embedding from the Laplacian's low eigenvectors (the
constant first eigenvector dropped), standardized per column. Views are
embedded independently of one another.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ViewData


@dataclass
class EmbeddingConfig:
    sigma: float = 1.0
    out_dims: int = 2
    standardize: bool = True

    def __post_init__(self) -> None:
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.out_dims < 1:
            raise ValueError("out_dims must be positive")


def affinity(view: ViewData, sigma: float = 1.0) -> np.ndarray:
    """exp(-||x_i - x_j||^2 / (2 sigma^2)) for every instance pair."""
    x = view.instances
    sq = ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    a = np.exp(-sq / (2.0 * sigma**2))
    return (a + a.T) / 2.0


def laplacian(aff: np.ndarray) -> np.ndarray:
    """Normalized Laplacian I - D^{-1/2} A D^{-1/2}."""
    aff = np.asarray(aff, dtype=float)
    deg = aff.sum(axis=1)
    if np.any(deg <= 0):
        raise ValueError("affinity matrix has a zero-degree row")
    d_inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(aff.shape[0]) - d_inv_sqrt[:, None] * aff * d_inv_sqrt[None, :]
    return (lap + lap.T) / 2.0


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Deterministic sign: the largest-magnitude component of each column
    is made positive (first occurrence on magnitude ties)."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        i = int(np.argmax(np.abs(col)))
        if col[i] < 0:
            out[:, j] = -col
    return out


def spectral_embed(
    view: ViewData, config: EmbeddingConfig
) -> tuple[ViewData, list[str]]:
    """Embed a view into the 2nd..(d+1)th eigenvectors of its Laplacian.

    Returns the embedded view plus a list of reported degeneracies
    (eigenvalue ties within the selected block). Columns within a tied
    block are ordered lexicographically after the sign fix.
    """
    d = config.out_dims
    if d + 1 > view.n:
        raise ValueError("out_dims + 1 must not exceed the number of instances")
    lap = laplacian(affinity(view, config.sigma))
    eigvals, eigvecs = np.linalg.eigh(lap)
    sel_vals = eigvals[1 : d + 1]
    sel_vecs = _fix_signs(eigvecs[:, 1 : d + 1])

    reports: list[str] = []
    tie_tol = 1e-10
    order = list(range(d))
    blocks: list[list[int]] = [[0]]
    for j in range(1, d):
        if abs(sel_vals[j] - sel_vals[j - 1]) <= tie_tol:
            blocks[-1].append(j)
        else:
            blocks.append([j])
    order = []
    for block in blocks:
        if len(block) > 1:
            reports.append(
                f"degenerate eigenvalue block of size {len(block)} "
                f"at eigenvalue {sel_vals[block[0]]:.6g}"
            )
            block = sorted(block, key=lambda j: tuple(sel_vecs[:, j]))
        order.extend(block)
    sel_vecs = sel_vecs[:, order]

    if config.standardize:
        mean = sel_vecs.mean(axis=0)
        std = sel_vecs.std(axis=0)
        std[std == 0] = 1.0
        sel_vecs = (sel_vecs - mean) / std

    embedded = ViewData(
        view_id=view.view_id,
        instances=sel_vecs,
        instance_ids=list(view.instance_ids),
        labels=list(view.labels) if view.labels is not None else None,
    )
    return embedded, reports


def default_out_dims(raw_dim: int) -> int:
    """Default embedding dimensionality: ceil(sqrt(d))."""
    return int(np.ceil(np.sqrt(raw_dim)))
