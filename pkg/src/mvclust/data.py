"""Synthetic data generation, sampling, and file formats.

File formats (all CSV with headers):

- dataset: ``id,<f1>,<f2>,...[,label]``, one instance per row
- constraints: ``id_a,id_b,weight,kind`` with kind in {ML, CL}
- relations: ``id_u,id_v``

Floats are serialized with 17 significant digits so that a write/read
round trip reproduces the exact binary values.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .model import (
    CANNOT_LINK,
    MUST_LINK,
    Constraint,
    ConstraintSet,
    RelationMap,
    ViewData,
)

_KIND_TO_TOKEN = {MUST_LINK: "ML", CANNOT_LINK: "CL"}
_TOKEN_TO_KIND = {"ML": MUST_LINK, "CL": CANNOT_LINK}

QUADRANT_MEANS = {
    "q1": (3.0, 3.0),
    "q2": (-3.0, 3.0),
    "q3": (-3.0, -3.0),
    "q4": (3.0, -3.0),
}
# quadrants 1 and 4 share a cluster, 2 and 3 the other
QUADRANT_CLUSTER = {"q1": "c0", "q4": "c0", "q2": "c1", "q3": "c1"}


@dataclass
class DatasetSpec:
    name: str
    generator: str  # four-quadrants | paired-views | file
    seed: int = 0
    per_quadrant: int = 50
    view_files: dict[str, str] = field(default_factory=dict)
    constraint_files: dict[str, str] = field(default_factory=dict)
    relation_file: Optional[str] = None
    class_pairings: list[tuple[str, str]] = field(default_factory=list)
    source_file: Optional[str] = None


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def gen_four_quadrants(
    seed: int, per_quadrant: int = 50
) -> tuple[ViewData, ViewData, RelationMap]:
    """Two-view synthetic benchmark of four unit Gaussians at (+-3, +-3).

    Draws per_quadrant points from each Gaussian, alternates the draws
    between the two views, and pairs nearest neighbors across views
    within the same quadrant (greedy by ascending distance, without
    replacement). True cluster labels pair quadrants I & IV against
    II & III, so the split is unrecoverable without constraints.
    """
    rng = np.random.default_rng(seed)
    rows_a: list[np.ndarray] = []
    rows_b: list[np.ndarray] = []
    ids_a: list[str] = []
    ids_b: list[str] = []
    labels_a: list[str] = []
    labels_b: list[str] = []
    pairs: set[tuple[str, str]] = set()
    for quad in ("q1", "q2", "q3", "q4"):
        mean = np.array(QUADRANT_MEANS[quad])
        draws = rng.normal(size=(per_quadrant, 2)) + mean
        quad_a: list[int] = []
        quad_b: list[int] = []
        for i in range(per_quadrant):
            if i % 2 == 0:
                ids_a.append(f"A_{quad}_{i:03d}")
                labels_a.append(QUADRANT_CLUSTER[quad])
                rows_a.append(draws[i])
                quad_a.append(len(rows_a) - 1)
            else:
                ids_b.append(f"B_{quad}_{i:03d}")
                labels_b.append(QUADRANT_CLUSTER[quad])
                rows_b.append(draws[i])
                quad_b.append(len(rows_b) - 1)
        # greedy nearest-neighbor matching within the quadrant
        cand = sorted(
            (
                (float(np.linalg.norm(rows_a[ia] - rows_b[ib])), ids_a[ia], ids_b[ib])
                for ia in quad_a
                for ib in quad_b
            )
        )
        used_a: set[str] = set()
        used_b: set[str] = set()
        for _, ida, idb in cand:
            if ida in used_a or idb in used_b:
                continue
            pairs.add((ida, idb))
            used_a.add(ida)
            used_b.add(idb)

    view_a = ViewData("A", np.stack(rows_a), ids_a, labels_a)
    view_b = ViewData("B", np.stack(rows_b), ids_b, labels_b)
    return view_a, view_b, RelationMap("A", "B", pairs)


def pair_views(
    single_view: ViewData,
    class_pairings: list[tuple[str, str]],
    seed: int,
    view_ids: tuple[str, str] = ("A", "B"),
) -> tuple[ViewData, ViewData, RelationMap]:
    """Split one labeled dataset into two views by pairing classes.

    The first class of each pairing goes to view A and the second to
    view B; instances across each pairing are matched uniformly at
    random without replacement up to the smaller class size, leaving the
    leftovers isolated in the mapping.
    """
    if single_view.labels is None:
        raise ValueError("pair_views requires labels")
    classes = set(single_view.labels)
    for ca, cb in class_pairings:
        for c in (ca, cb):
            if c not in classes:
                raise ValueError(f"unknown class token {c!r}")
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {}
    for i, lab in enumerate(single_view.labels):
        by_class.setdefault(lab, []).append(i)

    def subview(view_id: str, class_list: list[str]) -> ViewData:
        idx = [i for c in class_list for i in by_class[c]]
        return ViewData(
            view_id,
            single_view.instances[idx],
            [f"{view_id}_{single_view.instance_ids[i]}" for i in idx],
            [single_view.labels[i] for i in idx],
        )

    first = [ca for ca, _ in class_pairings]
    second = [cb for _, cb in class_pairings]
    view_a = subview(view_ids[0], first)
    view_b = subview(view_ids[1], second)

    pairs: set[tuple[str, str]] = set()
    for ca, cb in class_pairings:
        ids_a = [f"{view_ids[0]}_{single_view.instance_ids[i]}" for i in by_class[ca]]
        ids_b = [f"{view_ids[1]}_{single_view.instance_ids[i]}" for i in by_class[cb]]
        m = min(len(ids_a), len(ids_b))
        sel_a = list(rng.permutation(len(ids_a))[:m])
        sel_b = list(rng.permutation(len(ids_b))[:m])
        for ia, ib in zip(sel_a, sel_b):
            pairs.add((ids_a[ia], ids_b[ib]))
    return view_a, view_b, RelationMap(view_ids[0], view_ids[1], pairs)


def sample_constraints(view: ViewData, count: int, seed: int) -> ConstraintSet:
    """Sample equal numbers of must-links (same-label pairs) and
    cannot-links (different-label pairs), all with weight 1."""
    if view.labels is None:
        raise ValueError("sample_constraints requires labels")
    if count % 2 != 0:
        raise ValueError("constraint count must be even")
    ids = view.instance_ids
    same: list[tuple[str, str]] = []
    diff: list[tuple[str, str]] = []
    for i in range(view.n):
        for j in range(i + 1, view.n):
            pair = (ids[i], ids[j]) if ids[i] <= ids[j] else (ids[j], ids[i])
            if view.labels[i] == view.labels[j]:
                same.append(pair)
            else:
                diff.append(pair)
    half = count // 2
    if half > len(same):
        raise ValueError(
            f"requested {half} must-links but only {len(same)} same-label pairs exist"
        )
    if half > len(diff):
        raise ValueError(
            f"requested {half} cannot-links but only {len(diff)} "
            "different-label pairs exist"
        )
    rng = np.random.default_rng(seed)
    out = ConstraintSet()
    same.sort()
    diff.sort()
    for idx in rng.choice(len(same), size=half, replace=False):
        a, b = same[int(idx)]
        out.add(a, b, 1.0, MUST_LINK)
    for idx in rng.choice(len(diff), size=half, replace=False):
        a, b = diff[int(idx)]
        out.add(a, b, 1.0, CANNOT_LINK)
    return out


def sample_mapping(relations: RelationMap, fraction: float, seed: int) -> RelationMap:
    """Keep ceil(fraction * |pairs|) relation pairs, sampled uniformly
    without replacement."""
    if not (0.0 <= fraction <= 1.0):
        raise ValueError("fraction must lie in [0, 1]")
    pairs = sorted(relations.pairs)
    m = math.ceil(fraction * len(pairs))
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(pairs), size=m, replace=False) if m else []
    return RelationMap(
        relations.from_view,
        relations.to_view,
        {pairs[int(i)] for i in idx},
    )


class ParseError(ValueError):
    pass


def write_view(view: ViewData, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["id"] + [f"f{j + 1}" for j in range(view.dim)]
        if view.labels is not None:
            header.append("label")
        writer.writerow(header)
        for i, iid in enumerate(view.instance_ids):
            row = [iid] + [_fmt(x) for x in view.instances[i]]
            if view.labels is not None:
                row.append(view.labels[i])
            writer.writerow(row)


def read_view(path: str | Path, view_id: Optional[str] = None) -> ViewData:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file")
        if not header or header[0] != "id":
            raise ParseError(f"{path}: expected header starting with 'id'")
        has_label = header[-1] == "label"
        n_feat = len(header) - 1 - (1 if has_label else 0)
        if n_feat < 1:
            raise ParseError(f"{path}: no feature columns")
        ids: list[str] = []
        labels: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(header)} fields, "
                    f"got {len(row)}"
                )
            ids.append(row[0])
            try:
                rows.append([float(x) for x in row[1 : 1 + n_feat]])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            if has_label:
                labels.append(row[-1])
    return ViewData(
        view_id or path.stem,
        np.array(rows),
        ids,
        labels if has_label else None,
    )


def write_constraints(constraints: ConstraintSet, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id_a", "id_b", "weight", "kind"])
        for c in constraints:
            writer.writerow([c.a, c.b, _fmt(c.weight), _KIND_TO_TOKEN[c.kind]])


def read_constraints(
    path: str | Path, known_ids: Optional[set[str]] = None
) -> ConstraintSet:
    path = Path(path)
    out = ConstraintSet()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id_a", "id_b", "weight", "kind"]:
            raise ParseError(f"{path}: bad constraint header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ParseError(
                    f"{path}: line {lineno}: expected 4 fields, got {len(row)}"
                )
            a, b, weight_s, kind_s = row
            if kind_s not in _TOKEN_TO_KIND:
                raise ParseError(f"{path}: line {lineno}: unknown kind {kind_s!r}")
            if known_ids is not None and (a not in known_ids or b not in known_ids):
                raise ParseError(f"{path}: line {lineno}: unknown instance id")
            try:
                w = float(weight_s)
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from exc
            out.add(a, b, w, _TOKEN_TO_KIND[kind_s])
    return out


def write_relations(relations: RelationMap, path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id_u", "id_v"])
        for u, v in sorted(relations.pairs):
            writer.writerow([u, v])


def read_relations(
    path: str | Path,
    from_view: str,
    to_view: str,
    known_u: Optional[set[str]] = None,
    known_v: Optional[set[str]] = None,
) -> RelationMap:
    path = Path(path)
    pairs: set[tuple[str, str]] = set()
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id_u", "id_v"]:
            raise ParseError(f"{path}: bad relation header {header}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 2:
                raise ParseError(
                    f"{path}: line {lineno}: expected 2 fields, got {len(row)}"
                )
            u, v = row
            if known_u is not None and u not in known_u:
                raise ParseError(f"{path}: line {lineno}: unknown id {u!r}")
            if known_v is not None and v not in known_v:
                raise ParseError(f"{path}: line {lineno}: unknown id {v!r}")
            pairs.add((u, v))
    return RelationMap(from_view, to_view, pairs)


def read_spec_file(path: str | Path) -> dict[str, str]:
    """Flat key=value file with '#' comments."""
    values: dict[str, str] = {}
    with Path(path).open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}: line {lineno}: expected key=value")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def read_dataset(
    spec: DatasetSpec,
) -> tuple[list[ViewData], dict[str, ConstraintSet], list[RelationMap]]:
    """Materialize a dataset from its spec (generate or load)."""
    if spec.generator == "four-quadrants":
        view_a, view_b, rel = gen_four_quadrants(spec.seed, spec.per_quadrant)
        return [view_a, view_b], {}, [rel]
    if spec.generator == "paired-views":
        if spec.source_file is None:
            raise ValueError("paired-views generator needs a source file")
        base = read_view(spec.source_file)
        view_a, view_b, rel = pair_views(base, spec.class_pairings, spec.seed)
        return [view_a, view_b], {}, [rel]
    if spec.generator == "file":
        views = [
            read_view(path, view_id) for view_id, path in sorted(spec.view_files.items())
        ]
        by_id = {v.view_id: v for v in views}
        constraints = {
            view_id: read_constraints(path, set(by_id[view_id].instance_ids))
            for view_id, path in sorted(spec.constraint_files.items())
        }
        rels: list[RelationMap] = []
        if spec.relation_file is not None:
            if len(views) != 2:
                raise ValueError("a single relation file needs exactly two views")
            rels.append(
                read_relations(
                    spec.relation_file,
                    views[0].view_id,
                    views[1].view_id,
                    set(views[0].instance_ids),
                    set(views[1].instance_ids),
                )
            )
        return views, constraints, rels
    raise ValueError(f"unknown generator {spec.generator!r}")
