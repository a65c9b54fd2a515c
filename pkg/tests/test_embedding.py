import numpy as np
import pytest

from conftest import random_view
from mvclust.embedding import (
    EmbeddingConfig,
    affinity,
    default_out_dims,
    laplacian,
    spectral_embed,
)
from mvclust.model import ViewData


def test_affinity_symmetric_and_bounded(rng):
    view = random_view(rng, 20, 3)
    a = affinity(view, sigma=1.3)
    assert np.allclose(a, a.T, atol=1e-12)
    assert np.allclose(np.diagonal(a), 1.0)
    assert np.all(a > 0) and np.all(a <= 1.0)


def test_laplacian_symmetric_and_psd(rng):
    view = random_view(rng, 20, 3)
    lap = laplacian(affinity(view, sigma=1.0))
    assert np.allclose(lap, lap.T, atol=1e-12)
    eigvals = np.linalg.eigvalsh(lap)
    assert eigvals[0] >= -1e-10
    # the constant-direction eigenvalue is zero
    assert eigvals[0] == pytest.approx(0.0, abs=1e-10)


def test_laplacian_rejects_zero_degree():
    with pytest.raises(ValueError):
        laplacian(np.zeros((3, 3)))


def test_embedding_standardized(rng):
    view = random_view(rng, 30, 4)
    emb, _ = spectral_embed(view, EmbeddingConfig(sigma=1.0, out_dims=2))
    assert emb.instances.shape == (30, 2)
    assert np.allclose(emb.instances.mean(axis=0), 0.0, atol=1e-9)
    assert np.allclose(emb.instances.std(axis=0), 1.0, atol=1e-9)
    assert emb.instance_ids == view.instance_ids
    assert emb.labels == view.labels


def test_embedding_deterministic(rng):
    view = random_view(rng, 25, 3)
    e1, _ = spectral_embed(view, EmbeddingConfig(sigma=1.0, out_dims=3))
    e2, _ = spectral_embed(view, EmbeddingConfig(sigma=1.0, out_dims=3))
    assert np.array_equal(e1.instances, e2.instances)


def test_embedding_separates_far_blobs(rng):
    a = rng.normal(scale=0.3, size=(15, 2)) + np.array([0.0, 0.0])
    b = rng.normal(scale=0.3, size=(15, 2)) + np.array([20.0, 0.0])
    x = np.vstack([a, b])
    ids = [f"i{j:02d}" for j in range(30)]
    labels = ["x"] * 15 + ["y"] * 15
    view = ViewData("V", x, ids, labels)
    emb, _ = spectral_embed(view, EmbeddingConfig(sigma=2.0, out_dims=1))
    first = emb.instances[:, 0]
    # the leading nontrivial eigenvector splits the blobs by sign
    assert len(set(np.sign(first[:15]))) == 1
    assert len(set(np.sign(first[15:]))) == 1
    assert np.sign(first[0]) != np.sign(first[-1])


def test_embedding_dimension_guard(rng):
    view = random_view(rng, 5, 2)
    with pytest.raises(ValueError):
        spectral_embed(view, EmbeddingConfig(out_dims=5))


def test_config_validation():
    with pytest.raises(ValueError):
        EmbeddingConfig(sigma=0.0)
    with pytest.raises(ValueError):
        EmbeddingConfig(out_dims=0)


def test_default_out_dims():
    assert default_out_dims(1) == 1
    assert default_out_dims(4) == 2
    assert default_out_dims(10) == 4
    assert default_out_dims(100) == 10
