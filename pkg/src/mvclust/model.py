"""Domain types and constraint algebra.

Holds the per-view data container, pairwise must-link/cannot-link
constraints, cross-view relation maps, and the operations that combine
them: transitive closure over must-links and relations, max-weight union
of constraint sets, and mapping of constraints across views through a
bipartite relation map.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

MUST_LINK = "must-link"
CANNOT_LINK = "cannot-link"
KINDS = (MUST_LINK, CANNOT_LINK)


def _canonical_pair(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


@dataclass
class ViewData:
    """One view of the data: an instance matrix plus stable identifiers.

    Parameters
    ----------
    view_id : str
        Label for this view.
    instances : ndarray of shape (n, d)
        Row-per-instance feature matrix; all entries must be finite.
    instance_ids : list of str
        Unique identifier per row.
    labels : list of str, optional
        Ground-truth class tokens, used only for sampling constraints
        and for evaluation.
    """

    view_id: str
    instances: np.ndarray
    instance_ids: list[str]
    labels: Optional[list[str]] = None
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.instances = np.asarray(self.instances, dtype=float)
        if self.instances.ndim != 2:
            raise ValueError("instances must be a 2-D matrix")
        n, d = self.instances.shape
        if n < 1 or d < 1:
            raise ValueError("view must have at least one instance and one feature")
        if not np.all(np.isfinite(self.instances)):
            raise ValueError(f"view {self.view_id!r} contains non-finite values")
        if len(self.instance_ids) != n:
            raise ValueError("instance_ids length does not match instance count")
        if len(set(self.instance_ids)) != n:
            raise ValueError(f"duplicate instance ids in view {self.view_id!r}")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("labels length does not match instance count")
        self._index = {iid: i for i, iid in enumerate(self.instance_ids)}

    @property
    def n(self) -> int:
        return self.instances.shape[0]

    @property
    def dim(self) -> int:
        return self.instances.shape[1]

    def row(self, instance_id: str) -> np.ndarray:
        return self.instances[self._index[instance_id]]

    def index_of(self, instance_id: str) -> int:
        return self._index[instance_id]

    def __contains__(self, instance_id: str) -> bool:
        return instance_id in self._index


@dataclass(frozen=True)
class Constraint:
    """An unordered pairwise constraint with a non-negative weight."""

    a: str
    b: str
    weight: float
    kind: str

    def __post_init__(self) -> None:
        if self.a == self.b:
            raise ValueError("constraint endpoints must differ")
        if self.weight < 0:
            raise ValueError("constraint weight must be non-negative")
        if self.kind not in KINDS:
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    @property
    def key(self) -> tuple[str, str, str]:
        x, y = _canonical_pair(self.a, self.b)
        return (x, y, self.kind)


class ConstraintSet:
    """Collection of constraints keyed by (unordered pair, kind).

    A pair may carry both a must-link and a cannot-link entry; the
    engines treat constraints as soft, so inconsistency is tolerated.
    Adding a constraint under an existing key keeps the maximum weight.
    """

    def __init__(self, constraints: Iterable[Constraint] = ()) -> None:
        self._weights: dict[tuple[str, str, str], float] = {}
        for c in constraints:
            self.add(c.a, c.b, c.weight, c.kind)

    def add(self, a: str, b: str, weight: float, kind: str) -> None:
        c = Constraint(a, b, weight, kind)
        key = c.key
        prev = self._weights.get(key)
        if prev is None or weight > prev:
            self._weights[key] = weight

    def weight(self, a: str, b: str, kind: str) -> Optional[float]:
        x, y = _canonical_pair(a, b)
        return self._weights.get((x, y, kind))

    def __iter__(self) -> Iterator[Constraint]:
        for (a, b, kind), w in sorted(self._weights.items()):
            yield Constraint(a, b, w, kind)

    def __len__(self) -> int:
        return len(self._weights)

    def __contains__(self, key: tuple[str, str, str]) -> bool:
        a, b, kind = key
        x, y = _canonical_pair(a, b)
        return (x, y, kind) in self._weights

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConstraintSet):
            return NotImplemented
        return self._weights == other._weights

    def of_kind(self, kind: str) -> Iterator[Constraint]:
        return (c for c in self if c.kind == kind)

    def count(self, kind: str) -> int:
        return sum(1 for k in self._weights if k[2] == kind)

    def instance_ids(self) -> set[str]:
        ids: set[str] = set()
        for a, b, _ in self._weights:
            ids.add(a)
            ids.add(b)
        return ids

    def items(self) -> Iterator[tuple[tuple[str, str, str], float]]:
        return iter(sorted(self._weights.items()))

    def copy(self) -> "ConstraintSet":
        out = ConstraintSet()
        out._weights = dict(self._weights)
        return out

    def close_weights(self, other: "ConstraintSet", atol: float = 1e-9) -> bool:
        """True when both sets share the same keys with weights within atol."""
        if set(self._weights) != set(other._weights):
            return False
        return all(
            abs(w - other._weights[k]) <= atol for k, w in self._weights.items()
        )


@dataclass
class RelationMap:
    """Bipartite cross-view correspondences between two views."""

    from_view: str
    to_view: str
    pairs: set[tuple[str, str]] = field(default_factory=set)

    def reverse(self) -> "RelationMap":
        return RelationMap(
            self.to_view, self.from_view, {(v, u) for u, v in self.pairs}
        )

    def fanout(self) -> dict[str, list[str]]:
        """Map each from-view id to the sorted list of its partners."""
        out: dict[str, list[str]] = {}
        for u, v in sorted(self.pairs):
            out.setdefault(u, []).append(v)
        return out

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class MappedSubset:
    """Instance ids of one view that participate in any cross-view relation."""

    view_id: str
    ids: set[str] = field(default_factory=set)


@dataclass
class ClosureConflict:
    """A must-link path joining the endpoints of a cannot-link."""

    constraint: Constraint
    component: frozenset[tuple[str, str]]


class _UnionFind:
    def __init__(self) -> None:
        self._parent: dict = {}

    def find(self, x):
        parent = self._parent
        if x not in parent:
            parent[x] = x
            return x
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, x, y) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            # deterministic: smaller root wins
            if ry < rx:
                rx, ry = ry, rx
            self._parent[ry] = rx


def max_union(left: ConstraintSet, right: ConstraintSet) -> ConstraintSet:
    """Merge two constraint sets keeping the maximum weight per key."""
    out = left.copy()
    for c in right:
        out.add(c.a, c.b, c.weight, c.kind)
    return out


def map_constraints(source: ConstraintSet, relations: RelationMap) -> ConstraintSet:
    """Map constraints from one view to another through a relation map.

    Every combination of mapped partners of the two endpoints yields a
    constraint in the target view with the source weight; constraints
    with an unmapped endpoint produce nothing, and self-pairs are
    dropped. Results are merged by maximum weight.
    """
    fan = {u: tuple(vs) for u, vs in relations.fanout().items()}
    # Endpoints frequently share a fan-out (closure gives every member of
    # a component the same partners), so aggregate the max weight per
    # (fan-out, fan-out, kind) group before expanding the products.
    grouped: dict[tuple[tuple[str, ...], tuple[str, ...], str], float] = {}
    for (a, b, kind), w in source.items():
        fa = fan.get(a)
        fb = fan.get(b)
        if not fa or not fb:
            continue
        gkey = (fa, fb, kind) if fa <= fb else (fb, fa, kind)
        prev = grouped.get(gkey)
        if prev is None or w > prev:
            grouped[gkey] = w

    weights: dict[tuple[str, str, str], float] = {}
    for (fa, fb, kind), w in grouped.items():
        for u in fa:
            for v in fb:
                if u == v:
                    continue
                key = (u, v, kind) if u <= v else (v, u, kind)
                prev = weights.get(key)
                if prev is None or w > prev:
                    weights[key] = w
    out = ConstraintSet()
    out._weights = weights
    return out


def mapped_subset(view: ViewData, relations: Iterable[RelationMap]) -> MappedSubset:
    """Collect the ids of `view` that appear in any relation pair."""
    ids: set[str] = set()
    for rel in relations:
        if rel.from_view == view.view_id:
            ids.update(u for u, _ in rel.pairs)
        if rel.to_view == view.view_id:
            ids.update(v for _, v in rel.pairs)
    return MappedSubset(view.view_id, ids)


def build_closure(
    constraint_sets: dict[str, ConstraintSet],
    relations: Iterable[RelationMap],
) -> tuple[dict[str, ConstraintSet], list[RelationMap], list[ClosureConflict]]:
    """Transitive closure over must-links and cross-view relations.

    Must-link constraints and relations form the edges of one graph over
    (view, id) nodes. Every intra-view pair inside a connected component
    gains a must-link, every cross-view pair augments the relation set,
    and every cannot-link between two components lifts to cannot-links
    between all intra-view pairs spanning them. A must-link path joining
    the endpoints of a cannot-link is reported as a conflict; the derived
    constraints from it are dropped while all originals are kept.
    """
    relations = list(relations)
    uf = _UnionFind()
    for view_id, cs in constraint_sets.items():
        for c in cs.of_kind(MUST_LINK):
            uf.union((view_id, c.a), (view_id, c.b))
    for rel in relations:
        for u, v in rel.pairs:
            uf.union((rel.from_view, u), (rel.to_view, v))

    components: dict[tuple[str, str], list[tuple[str, str]]] = {}
    seen: set[tuple[str, str]] = set()
    for view_id, cs in constraint_sets.items():
        for iid in cs.instance_ids():
            seen.add((view_id, iid))
    for rel in relations:
        for u, v in rel.pairs:
            seen.add((rel.from_view, u))
            seen.add((rel.to_view, v))
    for node in sorted(seen):
        components.setdefault(uf.find(node), []).append(node)

    # Weight carried by a derived must-link: the maximum must-link edge
    # weight inside the component (relations count as weight-1 links).
    comp_weight: dict[tuple[str, str], float] = {}
    for rel in relations:
        for u, v in rel.pairs:
            root = uf.find((rel.from_view, u))
            comp_weight[root] = max(comp_weight.get(root, 0.0), 1.0)
    for view_id, cs in constraint_sets.items():
        for c in cs.of_kind(MUST_LINK):
            root = uf.find((view_id, c.a))
            comp_weight[root] = max(comp_weight.get(root, 0.0), c.weight)

    out_constraints = {v: cs.copy() for v, cs in constraint_sets.items()}
    rel_pairs: dict[tuple[str, str], set[tuple[str, str]]] = {}
    rel_order: list[tuple[str, str]] = []
    for rel in relations:
        key = (rel.from_view, rel.to_view)
        if key not in rel_pairs:
            rel_pairs[key] = set()
            rel_order.append(key)
        rel_pairs[key].update(rel.pairs)

    for root, members in components.items():
        w = comp_weight.get(root, 1.0)
        for i, (va, ia) in enumerate(members):
            for vb, ib in members[i + 1 :]:
                if va == vb:
                    if va not in out_constraints:
                        out_constraints[va] = ConstraintSet()
                    out_constraints[va].add(ia, ib, w, MUST_LINK)
                else:
                    key = (va, vb)
                    rkey = (vb, va)
                    if key in rel_pairs:
                        rel_pairs[key].add((ia, ib))
                    elif rkey in rel_pairs:
                        rel_pairs[rkey].add((ib, ia))
                    else:
                        rel_pairs[key] = {(ia, ib)}
                        rel_order.append(key)

    by_view: dict[tuple[str, str], dict[str, list[str]]] = {}
    for root, members in components.items():
        views: dict[str, list[str]] = {}
        for v, i in members:
            views.setdefault(v, []).append(i)
        by_view[root] = views

    conflicts: list[ClosureConflict] = []
    # dedupe cannot-link lifts per component pair, keeping the max weight
    lifted: dict[tuple, float] = {}
    for view_id, cs in constraint_sets.items():
        for c in cs.of_kind(CANNOT_LINK):
            ra = uf.find((view_id, c.a))
            rb = uf.find((view_id, c.b))
            if ra == rb:
                conflicts.append(
                    ClosureConflict(c, frozenset(components.get(ra, [])))
                )
                continue
            key = (ra, rb) if ra <= rb else (rb, ra)
            prev = lifted.get(key)
            if prev is None or c.weight > prev:
                lifted[key] = c.weight
    for (ra, rb), w in lifted.items():
        views_a = by_view.get(ra, {})
        views_b = by_view.get(rb, {})
        for v in views_a.keys() & views_b.keys():
            target = out_constraints.setdefault(v, ConstraintSet())
            for ia in views_a[v]:
                for ib in views_b[v]:
                    if ia != ib:
                        target.add(ia, ib, w, CANNOT_LINK)

    out_relations = [
        RelationMap(fv, tv, rel_pairs[(fv, tv)]) for fv, tv in rel_order
    ]
    return out_constraints, out_relations, conflicts
