"""
Hypergraphs, junction trees and cherry trees.

Vertices are positive integers.  Clusters (hyperedges) are stored as
``frozenset`` objects and tree edges refer to clusters by their position in
``JunctionTree.clusters``.  All containers are immutable after construction.
"""
from __future__ import annotations

import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InternalInvariantError, StructureError

Cluster = frozenset

#: Hypergraphs with at most this many hyperedges fall back to exhaustive
#: search over orderings when the greedy search finds no RIP ordering.
EXHAUSTIVE_LIMIT = 8


@dataclass(frozen=True)
class Violation:
    rule: str
    description: str
    elements: tuple = ()

    def to_dict(self):
        return {
            "rule": self.rule,
            "description": self.description,
            "elements": [sorted(e) if isinstance(e, (set, frozenset)) else e
                         for e in self.elements],
        }


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()
    witness_ordering: tuple | None = None

    def __post_init__(self):
        if bool(self.violations) == (self.witness_ordering is not None):
            raise InternalInvariantError(
                "a report carries a witness ordering exactly when it is valid")

    @property
    def valid(self) -> bool:
        return not self.violations

    def to_dict(self):
        return {
            "valid": self.valid,
            "violations": [v.to_dict() for v in self.violations],
            "witness_ordering": (list(self.witness_ordering)
                                 if self.witness_ordering is not None else None),
        }


def _vertex_tuple(vertices: Iterable[int]) -> tuple:
    labels = tuple(int(v) for v in vertices)
    if not labels:
        raise StructureError("vertex set must be nonempty")
    if len(set(labels)) != len(labels):
        raise StructureError(f"duplicate vertex labels in {labels}")
    return labels


def _as_clusters(hyperedges: Iterable[Iterable[int]]) -> tuple:
    return tuple(frozenset(int(v) for v in h) for h in hyperedges)


def _check_members(vertices: tuple, clusters: tuple) -> None:
    if not clusters:
        raise StructureError("hyperedge list is empty")
    known = set(vertices)
    for i, c in enumerate(clusters):
        if not c:
            raise StructureError(f"hyperedge {i} is empty")
        unknown = c - known
        if unknown:
            raise StructureError(
                f"hyperedge {i} references unknown vertices {sorted(unknown)}")


def _rip_holds(clusters: Sequence[frozenset], order: Sequence[int]) -> bool:
    seen: set = set()
    for pos, j in enumerate(order):
        if pos:
            sep = clusters[j] & seen
            if not any(sep <= clusters[order[i]] for i in range(pos)):
                return False
        seen |= clusters[j]
    return True


def _greedy_rip_order(clusters: Sequence[frozenset], start: int) -> tuple | None:
    # Maximum cardinality search over hyperedges: always take the hyperedge
    # sharing the most vertices with those already placed.
    order = [start]
    seen = set(clusters[start])
    remaining = [i for i in range(len(clusters)) if i != start]
    while remaining:
        best = max(remaining, key=lambda i: (len(clusters[i] & seen), -i))
        sep = clusters[best] & seen
        if not any(sep <= clusters[i] for i in order):
            return None
        order.append(best)
        seen |= clusters[best]
        remaining.remove(best)
    return tuple(order)


def find_rip_ordering(clusters: Sequence[frozenset]) -> tuple | None:
    """Return an ordering of ``clusters`` with the running intersection
    property, or ``None`` when no such ordering exists."""
    clusters = list(clusters)
    for start in range(len(clusters)):
        order = _greedy_rip_order(clusters, start)
        if order is not None:
            return order
    if len(clusters) <= EXHAUSTIVE_LIMIT:
        for order in itertools.permutations(range(len(clusters))):
            if _rip_holds(clusters, order):
                return tuple(order)
    return None


def satisfies_pairwise_rip(clusters: Sequence[frozenset], order: Sequence[int]) -> bool:
    """Check the alternative, pairwise form of the running intersection
    property: ``K_i & K_j <= K_s`` for every ``i < s < j`` in ``order``.

    This form is strictly stronger than the predecessor form checked by
    :func:`find_rip_ordering`; it characterises orderings along a path.
    """
    seq = [clusters[i] for i in order]
    for i in range(len(seq)):
        for j in range(i + 2, len(seq)):
            common = seq[i] & seq[j]
            if any(not common <= seq[s] for s in range(i + 1, j)):
                return False
    return True


def validate_hypergraph(vertices: Iterable[int],
                        hyperedges: Iterable[Iterable[int]]) -> ValidationReport:
    """
    Decide whether a hypergraph is acyclic and covers its vertex set.

    Raises
    ------
    StructureError
        If the hyperedge list is empty or a hyperedge mentions an unknown
        vertex.
    """
    verts = _vertex_tuple(vertices)
    clusters = _as_clusters(hyperedges)
    _check_members(verts, clusters)

    violations = []
    for i, j in itertools.permutations(range(len(clusters)), 2):
        if clusters[i] <= clusters[j] and (clusters[i] != clusters[j] or i > j):
            violations.append(Violation(
                "no-subset",
                f"hyperedge {i} {sorted(clusters[i])} is contained in "
                f"hyperedge {j} {sorted(clusters[j])}",
                (i, j)))
    missing = set(verts) - set().union(*clusters)
    if missing:
        violations.append(Violation(
            "cover", f"vertices {sorted(missing)} lie in no hyperedge",
            tuple(sorted(missing))))
    order = find_rip_ordering(clusters)
    if order is None:
        violations.append(Violation(
            "rip", "no ordering of the hyperedges has the running "
                   "intersection property"))
    if violations:
        return ValidationReport(tuple(violations), None)
    return ValidationReport((), order)


def _kruskal(n_nodes: int, weighted_edges: Iterable[tuple]) -> list:
    """Maximum-weight spanning forest.  ``weighted_edges`` holds
    ``(weight, i, j)`` with ``i < j``; ties resolve lexicographically on
    ``(i, j)``."""
    parent = list(range(n_nodes))

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for w, i, j in sorted(weighted_edges, key=lambda e: (-e[0], e[1], e[2])):
        ri, rj = root(i), root(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append((i, j))
    return chosen


@dataclass(frozen=True, init=False)
class JunctionTree:
    """
    A tree over clusters whose separators are the intersections of linked
    clusters and in which the clusters holding any vertex form a subtree.

    Use :func:`build_junction_tree` to derive the tree edges from a cluster
    list, or construct directly with explicit ``tree_edges``; either way the
    structure is checked on construction.
    """
    vertices: tuple
    clusters: tuple
    tree_edges: tuple  # (i, j, separator)
    separator_multiplicities: dict = field(compare=False, repr=False, default=None)

    def __init__(self, vertices, clusters, edges):
        self._assign(vertices, clusters, edges)
        report = check_junction_tree(self)
        if not report.valid:
            msg = "; ".join(f"[{v.rule}] {v.description}" for v in report.violations)
            raise StructureError(f"invalid junction tree: {msg}")
        counts = Counter(sep for _, _, sep in self.tree_edges)
        object.__setattr__(self, "separator_multiplicities",
                           {sep: c + 1 for sep, c in counts.items()})

    def _assign(self, vertices, clusters, edges):
        verts = _vertex_tuple(vertices)
        cl = _as_clusters(clusters)
        tree_edges = []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            if not (0 <= i < len(cl) and 0 <= j < len(cl)):
                raise StructureError(f"tree edge {(i, j)} references an unknown cluster")
            tree_edges.append((min(i, j), max(i, j), cl[i] & cl[j]))
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "clusters", cl)
        object.__setattr__(self, "tree_edges", tuple(tree_edges))

    @property
    def d(self) -> int:
        return len(self.vertices)

    @property
    def separators(self) -> tuple:
        return tuple(sep for _, _, sep in self.tree_edges)

    def neighbours(self, i: int) -> list:
        out = []
        for a, b, _ in self.tree_edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def to_dict(self):
        return {
            "vertices": list(self.vertices),
            "clusters": [sorted(c) for c in self.clusters],
            "edges": [[i, j] for i, j, _ in self.tree_edges],
        }


def check_junction_tree(jt: JunctionTree) -> ValidationReport:
    """Check every structural rule of a junction tree with explicit edges."""
    violations = []
    cl = jt.clusters
    try:
        _check_members(jt.vertices, cl)
    except StructureError as exc:
        return ValidationReport((Violation("members", str(exc)),), None)
    for i, j in itertools.combinations(range(len(cl)), 2):
        if cl[i] <= cl[j] or cl[j] <= cl[i]:
            violations.append(Violation(
                "no-subset", f"clusters {i} and {j} are nested", (i, j)))
    missing = set(jt.vertices) - set().union(*cl)
    if missing:
        violations.append(Violation(
            "cover", f"vertices {sorted(missing)} lie in no cluster",
            tuple(sorted(missing))))

    edges = [(i, j) for i, j, _ in jt.tree_edges]
    tree_ok = len(edges) == len(cl) - 1 and len(set(edges)) == len(edges)
    if tree_ok:
        adj = {i: [] for i in range(len(cl))}
        for i, j in edges:
            if i == j:
                tree_ok = False
            adj[i].append(j)
            adj[j].append(i)
        reached = {0}
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in reached:
                    reached.add(y)
                    queue.append(y)
        tree_ok = tree_ok and len(reached) == len(cl)
    if not tree_ok:
        violations.append(Violation(
            "spanning-tree",
            f"{len(edges)} edges over {len(cl)} clusters do not form a spanning tree",
            tuple(edges)))
    for i, j, sep in jt.tree_edges:
        if sep != cl[i] & cl[j]:
            violations.append(Violation(
                "separator", f"separator of edge {(i, j)} is not the cluster intersection",
                (i, j)))

    if tree_ok:
        # Junction property: clusters holding v induce a connected subtree,
        # i.e. #clusters(v) = #edges(v) + 1.
        for v in jt.vertices:
            n_cl = sum(v in c for c in cl)
            n_sep = sum(v in (cl[i] & cl[j]) for i, j in edges)
            if n_cl != n_sep + 1:
                violations.append(Violation(
                    "running-intersection",
                    f"clusters containing vertex {v} are not connected in the tree",
                    (v,)))
    if violations:
        return ValidationReport(tuple(violations), None)
    order = _tree_order(len(cl), edges)
    return ValidationReport((), order)


def validate_junction_tree(vertices, clusters, edges) -> ValidationReport:
    """Report every rule a cluster list with explicit tree edges breaks."""
    jt = object.__new__(JunctionTree)
    jt._assign(vertices, clusters, edges)
    return check_junction_tree(jt)


def _tree_order(n: int, edges: Sequence[tuple]) -> tuple:
    adj = {i: [] for i in range(n)}
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    order, seen, queue = [], {0}, deque([0])
    while queue:
        x = queue.popleft()
        order.append(x)
        for y in sorted(adj[x]):
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return tuple(order)


def build_junction_tree(vertices: Iterable[int],
                        hyperedges: Iterable[Iterable[int]]) -> JunctionTree:
    """
    Link validated clusters by a maximum-weight spanning tree of the
    intersection-size graph.  Equal weights are resolved by lexicographic
    order of the cluster index pair.
    """
    verts = _vertex_tuple(vertices)
    clusters = _as_clusters(hyperedges)
    report = validate_hypergraph(verts, clusters)
    if not report.valid:
        msg = "; ".join(f"[{v.rule}] {v.description}" for v in report.violations)
        raise StructureError(f"hypergraph is not acyclic: {msg}")
    weighted = [(len(clusters[i] & clusters[j]), i, j)
                for i, j in itertools.combinations(range(len(clusters)), 2)]
    edges = _kruskal(len(clusters), weighted)
    try:
        return JunctionTree(verts, clusters, edges)
    except StructureError as exc:  # pragma: no cover - guaranteed for acyclic input
        raise InternalInvariantError(str(exc)) from exc


def containment_counts(jt: JunctionTree, v: int) -> tuple:
    """Return ``(clusters containing v, tree edges whose separator contains v)``."""
    if v not in jt.vertices:
        raise StructureError(f"unknown vertex {v}")
    n_cl = sum(v in c for c in jt.clusters)
    n_sep = sum(v in sep for sep in jt.separators)
    if n_cl != n_sep + 1:
        raise InternalInvariantError(
            f"vertex {v}: {n_cl} clusters but {n_sep} separators")
    return n_cl, n_sep


def is_cherry_tree(jt: JunctionTree, k: int) -> bool:
    if k < 1:
        raise StructureError("cherry tree order must be positive")
    return (all(len(c) == k for c in jt.clusters)
            and all(len(s) == k - 1 for s in jt.separators))


@dataclass(frozen=True)
class CherryTree:
    """A junction tree whose clusters all have ``order`` vertices and whose
    separators all have ``order - 1``.  Order 1 (singleton clusters linked by
    empty separators) represents an ordinary spanning tree on the vertices."""
    order: int
    base: JunctionTree

    def __post_init__(self):
        if not is_cherry_tree(self.base, self.order):
            raise StructureError(
                f"junction tree is not a cherry tree of order {self.order}")

    @property
    def clusters(self):
        return self.base.clusters

    @property
    def tree_edges(self):
        return self.base.tree_edges

    @property
    def vertices(self):
        return self.base.vertices

    @classmethod
    def from_clusters(cls, vertices, clusters, edges=None) -> "CherryTree":
        if edges is None:
            jt = build_junction_tree(vertices, clusters)
        else:
            jt = JunctionTree(vertices, clusters, edges)
        clusters = jt.clusters
        return cls(len(clusters[0]), jt)


def spanning_tree(vertices: Iterable[int], edges: Iterable[tuple]) -> CherryTree:
    """Wrap a spanning tree given by vertex pairs as an order-1 cherry tree."""
    verts = _vertex_tuple(vertices)
    pos = {v: i for i, v in enumerate(verts)}
    try:
        idx = [(pos[a], pos[b]) for a, b in edges]
    except KeyError as exc:
        raise StructureError(f"edge references unknown vertex {exc.args[0]}") from None
    return CherryTree(1, JunctionTree(verts, [[v] for v in verts], idx))


def expand_cherry_tree(ct: CherryTree) -> CherryTree:
    """
    Lift an order-k cherry tree to order k+1.

    Every new cluster is the union of two clusters linked in ``ct``.  Tree
    edges of ``ct`` are visited breadth-first from cluster 0; the cluster
    built from edge (parent P, child X) is linked to the cluster built from
    P's own parent edge, and those built from edges at the root are chained
    to the first of them.  All new separators are therefore old clusters.
    """
    n = len(ct.clusters)
    if n < 2:
        raise StructureError("a cherry tree with a single cluster cannot be expanded")
    adj = {i: ct.base.neighbours(i) for i in range(n)}
    parent = {0: None}
    queue = deque([0])
    new_of = {}  # child cluster index -> new cluster index
    new_clusters, new_edges = [], []
    first_root_child = None
    while queue:
        p = queue.popleft()
        for x in adj[p]:
            if x in parent:
                continue
            parent[x] = p
            queue.append(x)
            union = ct.clusters[p] | ct.clusters[x]
            idx = len(new_clusters)
            new_clusters.append(union)
            new_of[x] = idx
            if parent[p] is not None:
                link = new_of[p]
            elif first_root_child is None:
                first_root_child = idx
                link = None
            else:
                link = first_root_child
            if link is not None:
                if len(new_clusters[link] & union) != ct.order:
                    raise InternalInvariantError("merge would break the separator size")
                new_edges.append((link, idx))
    jt = JunctionTree(ct.vertices, new_clusters, new_edges)
    return CherryTree(ct.order + 1, jt)


def random_junction_tree(rng, d_max: int = 12) -> JunctionTree:
    """Draw a random junction tree on ``1..d`` with ``d <= d_max``.

    Each new cluster attaches to a random existing cluster through a random
    proper subset of it and adds at least one fresh vertex.
    """
    d = int(rng.integers(1, d_max + 1))
    first = int(rng.integers(1, min(d, 4) + 1))
    clusters = [frozenset(range(1, first + 1))]
    edges = []
    nxt = first + 1
    while nxt <= d:
        p = int(rng.integers(len(clusters)))
        parent_cl = sorted(clusters[p])
        size = int(rng.integers(0, len(parent_cl)))
        sep = frozenset(rng.choice(parent_cl, size=size, replace=False).tolist())
        n_new = int(rng.integers(1, min(d - nxt + 1, 3) + 1))
        fresh = frozenset(range(nxt, nxt + n_new))
        nxt += n_new
        clusters.append(sep | fresh)
        edges.append((p, len(clusters) - 1))
    return JunctionTree(range(1, d + 1), clusters, edges)
