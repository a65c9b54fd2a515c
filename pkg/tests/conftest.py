import numpy as np
import pytest

from mvclust.model import CANNOT_LINK, MUST_LINK, ConstraintSet, ViewData


def random_view(rng, n, d, view_id="V", k_labels=2):
    centers = rng.normal(scale=4.0, size=(k_labels, d))
    labels = [f"c{int(rng.integers(k_labels))}" for _ in range(n)]
    rows = np.stack(
        [centers[int(lab[1:])] + rng.normal(size=d) for lab in labels]
    )
    ids = [f"{view_id}{i:03d}" for i in range(n)]
    return ViewData(view_id, rows, ids, labels)


def random_constraints(rng, ids, count, weight_range=(1.0, 1.0)):
    out = ConstraintSet()
    ids = list(ids)
    for _ in range(count):
        a, b = rng.choice(len(ids), size=2, replace=False)
        kind = MUST_LINK if rng.random() < 0.5 else CANNOT_LINK
        w = float(rng.uniform(*weight_range))
        out.add(ids[int(a)], ids[int(b)], w, kind)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0)
