"""
Cherry-vine structures and the densities built on them.

A structure is a stack of cherry trees ``T_1 .. T_{d-1}``.  ``T_1`` is kept
as an order-1 cherry tree (singleton clusters linked by empty separators),
so the links of every level are handled uniformly: the link between linked
clusters ``A`` and ``B`` of ``T_k`` carries the label ``(a, b | S)`` with
``S = A & B``, ``{a} = A - S`` and ``{b} = B - S``.

Densities are evaluated on the copula scale.  Points are arrays of shape
``(n, d)`` whose columns follow ``structure.vertices``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import special

from .bicop import BivariateCopula, clamp
from .errors import NumericalError, StructureError
from .graph_core import (CherryTree, JunctionTree, expand_cherry_tree,
                         is_cherry_tree, spanning_tree)

SAMPLE_CHUNK = 1024


@dataclass(frozen=True)
class Link:
    level: int
    a: int
    b: int
    given: frozenset

    @property
    def key(self) -> tuple:
        return (self.a, self.b, self.given)

    @property
    def constraint(self) -> frozenset:
        return self.given | {self.a, self.b}

    def label(self) -> str:
        if not self.given:
            return f"{self.a},{self.b}"
        return f"{self.a},{self.b}|{','.join(map(str, sorted(self.given)))}"


def link_key(a: int, b: int, given=()) -> tuple:
    a, b = int(a), int(b)
    return (min(a, b), max(a, b), frozenset(int(s) for s in given))


@dataclass(frozen=True)
class CherryVineStructure:
    vertices: tuple
    trees: tuple
    levels: tuple  # levels[k - 1] holds the links of T_k

    @property
    def d(self) -> int:
        return len(self.vertices)

    @property
    def links(self) -> tuple:
        return tuple(l for level in self.levels for l in level)

    def column(self, v: int) -> int:
        return self.vertices.index(v)

    def source(self, var: int, given: frozenset):
        """The link producing ``F(var | given)`` by its h-function, and the
        partner variable it conditions on."""
        return self._sources.get((var, given))

    def __post_init__(self):
        sources = {}
        for l in self.links:
            sources[(l.a, l.given | {l.b})] = (l, l.b)
            sources[(l.b, l.given | {l.a})] = (l, l.a)
        object.__setattr__(self, "_sources", sources)

    def to_dict(self):
        return {
            "vertices": list(self.vertices),
            "levels": [t.base.to_dict() for t in self.trees],
        }


def _links_of(tree: CherryTree, level: int) -> list:
    out = []
    for i, j, sep in tree.tree_edges:
        a_set = tree.clusters[i] - sep
        b_set = tree.clusters[j] - sep
        if len(a_set) != 1 or len(b_set) != 1:
            raise StructureError(
                f"link {(i, j)} of tree {level} does not leave single vertices "
                f"({sorted(a_set)}, {sorted(b_set)})")
        a, b = next(iter(a_set)), next(iter(b_set))
        out.append(Link(level, min(a, b), max(a, b), sep))
    return sorted(out, key=lambda l: (l.a, l.b, sorted(l.given)))


def build_cherry_vine(trees: Sequence) -> CherryVineStructure:
    """
    Validate a stack of cherry trees and label its links.

    ``trees[0]`` is the first tree as an order-1 :class:`CherryTree` (see
    :func:`graph_core.spanning_tree`); ``trees[k - 1]`` must be an order-k
    cherry tree whose clusters are the unions of clusters linked in
    ``trees[k - 2]``.  Plain :class:`JunctionTree` objects are accepted and
    wrapped.
    """
    trees = [t if isinstance(t, CherryTree) else CherryTree(len(t.clusters[0]), t)
             for t in trees]
    if not trees:
        raise StructureError("a vine needs at least one tree")
    verts = tuple(trees[0].vertices)
    d = len(verts)
    if d < 2:
        raise StructureError("a vine needs at least two vertices")
    if len(trees) != d - 1:
        raise StructureError(f"{d} vertices need {d - 1} trees, got {len(trees)}")
    if trees[0].order != 1 or set(trees[0].clusters) != {frozenset([v]) for v in verts}:
        raise StructureError("the first tree must be a spanning tree on the vertices")

    levels = []
    for k, tree in enumerate(trees, start=1):
        if set(tree.vertices) != set(verts):
            raise StructureError(f"tree {k} is over a different vertex set")
        if not is_cherry_tree(tree.base, k):
            raise StructureError(f"tree {k} is not a cherry tree of order {k}")
        if len(tree.clusters) != d - k + 1:
            raise StructureError(
                f"tree {k} has {len(tree.clusters)} clusters, expected {d - k + 1}")
        if k >= 2:
            prev = trees[k - 2]
            unions = {prev.clusters[i] | prev.clusters[j] for i, j, _ in prev.tree_edges}
            if set(tree.clusters) != unions:
                bad = [sorted(c) for c in tree.clusters if c not in unions]
                raise StructureError(
                    f"clusters of tree {k} must be unions of clusters linked in tree "
                    f"{k - 1}; offending: {bad or 'missing unions'}")
        levels.append(tuple(_links_of(tree, k)))

    structure = CherryVineStructure(verts, tuple(trees), tuple(levels))
    # Proximity: F(a | S) for every link must be produced one level below.
    for l in structure.links:
        if l.given:
            for var in (l.a, l.b):
                if structure.source(var, l.given) is None:
                    raise StructureError(
                        f"link ({l.label()}) needs F({var} | {sorted(l.given)}), "
                        "which no lower link produces")
    return structure


def complete_structure(trees: Sequence[CherryTree]) -> CherryVineStructure:
    """Extend a partial stack ``T_1 .. T_m`` to a full vine by repeatedly
    applying :func:`expand_cherry_tree`."""
    trees = list(trees)
    d = len(trees[0].vertices)
    while len(trees) < d - 1:
        trees.append(expand_cherry_tree(trees[-1]))
    return build_cherry_vine(trees)


def structure_from_first_tree(vertices, edges) -> CherryVineStructure:
    return complete_structure([spanning_tree(vertices, edges)])


def d_vine_structure(d: int) -> CherryVineStructure:
    return structure_from_first_tree(range(1, d + 1), [(i, i + 1) for i in range(1, d)])


def c_vine_structure(d: int) -> CherryVineStructure:
    return structure_from_first_tree(range(1, d + 1), [(1, j) for j in range(2, d + 1)])


@dataclass(frozen=True)
class VineModel:
    structure: CherryVineStructure
    pair_copulas: Mapping  # link key -> BivariateCopula

    def __post_init__(self):
        expected = {l.key for l in self.structure.links}
        given = {link_key(*k) for k in self.pair_copulas}
        if given != expected:
            missing = [k for k in expected if k not in given]
            extra = [k for k in given if k not in expected]
            raise StructureError(
                f"pair copulas do not match the links (missing {len(missing)}, "
                f"unexpected {len(extra)})")
        cop = {link_key(*k): c for k, c in self.pair_copulas.items()}
        object.__setattr__(self, "pair_copulas", cop)

    @property
    def d(self) -> int:
        return self.structure.d

    def copula(self, link: Link) -> BivariateCopula:
        return self.pair_copulas[link.key]

    @classmethod
    def independence(cls, structure: CherryVineStructure) -> "VineModel":
        return cls(structure, {l.key: BivariateCopula.independence() for l in structure.links})

    def with_copulas(self, updates: Mapping) -> "VineModel":
        cop = dict(self.pair_copulas)
        for k, c in updates.items():
            cop[link_key(*k)] = c
        return VineModel(self.structure, cop)


def _as_points(u, d: int) -> tuple:
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != d:
        raise StructureError(f"points have {arr.shape[1]} columns, model has {d} variables")
    return clamp(arr), single


def _forward(links: Sequence[Link], copulas: Mapping, cols: Mapping) -> tuple:
    """Run the h-function recursion over ``links`` (ordered by level).

    ``cols`` maps each vertex to its column of observations.  Returns the
    summed log pair-copula densities and the table of conditional
    distribution values keyed by ``(variable, conditioning set)``.
    """
    cond = {(v, frozenset()): x for v, x in cols.items()}
    n = len(next(iter(cols.values())))
    logd = np.zeros(n)
    for l in links:
        try:
            ua, ub = cond[(l.a, l.given)], cond[(l.b, l.given)]
        except KeyError:
            raise StructureError(f"link ({l.label()}) is not realisable") from None
        c = copulas[l.key]
        if c.is_independence:
            cond[(l.a, l.given | {l.b})] = ua
            cond[(l.b, l.given | {l.a})] = ub
            continue
        logd = logd + c.logpdf(ua, ub)
        cond[(l.a, l.given | {l.b})] = c.h(ua, ub)
        cond[(l.b, l.given | {l.a})] = c.h(ub, ua)
    return logd, cond


def _columns(structure: CherryVineStructure, pts: np.ndarray, subset=None) -> dict:
    verts = structure.vertices if subset is None else sorted(subset)
    return {v: pts[:, structure.column(v)] for v in verts}


def log_density(m: VineModel, u):
    """Log copula density of the vine at ``u`` (shape ``(d,)`` or ``(n, d)``)."""
    pts, single = _as_points(u, m.d)
    logd, _ = _forward(m.structure.links, m.pair_copulas, _columns(m.structure, pts))
    if not np.all(np.isfinite(logd)):
        bad = int(np.flatnonzero(~np.isfinite(logd))[0])
        raise NumericalError(f"non-finite log density at row {bad}")
    return float(logd[0]) if single else logd


def conditional_cdf(m: VineModel, j: int, given, u):
    """``F(u_j | u_given)`` as produced by the vine's h-function recursion."""
    pts, single = _as_points(u, m.d)
    given = frozenset(int(g) for g in given)
    if j not in m.structure.vertices or not given <= set(m.structure.vertices):
        raise StructureError("unknown vertex")
    if j in given:
        raise StructureError(f"variable {j} cannot condition on itself")
    if not given:
        out = pts[:, m.structure.column(j)]
    else:
        if m.structure.source(j, given) is None:
            raise StructureError(
                f"F({j} | {sorted(given)}) is not realisable in this structure")
        scope = given | {j}
        links = [l for l in m.structure.links if l.constraint <= scope]
        _, cond = _forward(links, m.pair_copulas, _columns(m.structure, pts, scope))
        out = cond[(j, given)]
    return float(out[0]) if single else out


def truncate(m: VineModel, k: int) -> VineModel:
    """Set every pair copula with at least ``k`` conditioning variables to
    independence."""
    d = m.d
    if not 1 <= k <= d - 1:
        raise StructureError(f"truncation level {k} outside 1..{d - 1}")
    cop = {key: (BivariateCopula.independence() if len(key[2]) >= k else c)
           for key, c in m.pair_copulas.items()}
    return VineModel(m.structure, cop)


def truncation_level(m: VineModel) -> int:
    """Smallest ``k`` such that the model is truncated at level ``k``."""
    top = 0
    for l in m.structure.links:
        if not m.copula(l).is_independence:
            top = max(top, len(l.given) + 1)
    return max(top, 1)


# --------------------------------------------------------------------------
# Junction-tree copulas

LogEvaluator = Callable[[np.ndarray], np.ndarray]


def _zero_evaluator(x):
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class JunctionTreeCopulaModel:
    """
    Copula density attached to a junction tree.

    ``log_evaluators`` maps clusters and separators (as frozensets) to
    functions taking an ``(n, |K|)`` array, columns in ascending vertex
    order, and returning log densities.  Singletons and the empty set
    default to the uniform density.
    """
    tree: JunctionTree
    log_evaluators: Mapping

    def __post_init__(self):
        ev = {frozenset(k): f for k, f in self.log_evaluators.items()}
        needed = set(self.tree.clusters) | set(self.tree.separators)
        for s in needed:
            if s not in ev:
                if len(s) <= 1:
                    ev[s] = _zero_evaluator
                else:
                    raise StructureError(f"no evaluator for {sorted(s)}")
        object.__setattr__(self, "log_evaluators", ev)


def _eval_on(jm: JunctionTreeCopulaModel, key: frozenset, pts: np.ndarray) -> np.ndarray:
    cols = [jm.tree.vertices.index(v) for v in sorted(key)]
    out = np.asarray(jm.log_evaluators[key](pts[:, cols]), dtype=float)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"evaluator for {sorted(key)} returned a non-positive density")
    return out


def junction_tree_log_density(jm: JunctionTreeCopulaModel, u):
    """Sum of cluster log densities minus ``(nu_S - 1)`` times each distinct
    separator's log density."""
    pts, single = _as_points(u, jm.tree.d)
    total = np.zeros(pts.shape[0])
    for K in jm.tree.clusters:
        total += _eval_on(jm, K, pts)
    for S, nu in jm.tree.separator_multiplicities.items():
        if S:
            total -= (nu - 1) * _eval_on(jm, S, pts)
    return float(total[0]) if single else total


def subvine_evaluator(m: VineModel, scope) -> LogEvaluator:
    """Log density of the vine's marginal on ``scope``, valid when ``scope`` is
    the constraint set of a link (or a single vertex)."""
    scope = frozenset(scope)
    links = [l for l in m.structure.links if l.constraint <= scope]
    order = sorted(scope)
    n_links = len(scope) * (len(scope) - 1) // 2
    if len(links) != n_links:
        raise StructureError(f"{sorted(scope)} does not carry a sub-vine")

    def evaluate(x):
        x = clamp(np.atleast_2d(x))
        cols = {v: x[:, i] for i, v in enumerate(order)}
        logd, _ = _forward(links, m.pair_copulas, cols)
        return logd

    return evaluate


def to_cherry_tree_copula(m: VineModel, k: int) -> JunctionTreeCopulaModel:
    """
    Express the vine truncated at level ``k`` as a cherry-tree copula of order
    ``k + 1`` over the clusters of ``T_{k+1}`` (a single cluster when
    ``k = d - 1``).  Truncation is applied first if needed.
    """
    d = m.d
    if not 1 <= k <= d - 1:
        raise StructureError(f"level {k} outside 1..{d - 1}")
    m = truncate(m, k)
    if k == d - 1:
        tree = JunctionTree(m.structure.vertices, [m.structure.vertices], [])
    else:
        tree = m.structure.trees[k].base
    evaluators = {}
    for key in set(tree.clusters) | set(tree.separators):
        if len(key) >= 2:
            evaluators[key] = subvine_evaluator(m, key)
    return JunctionTreeCopulaModel(tree, evaluators)


def lift_cherry_tree_copula(jm: JunctionTreeCopulaModel) -> JunctionTreeCopulaModel:
    """
    Re-express an order-k cherry-tree copula on the order-(k+1) cherry tree
    from :func:`expand_cherry_tree`.  Each new cluster ``A | B`` (``A``, ``B``
    linked through ``S``) gets the density ``c_A c_B / c_S``, i.e. the new
    conditional pair copula is independence.
    """
    sizes = {len(c) for c in jm.tree.clusters}
    if len(sizes) != 1:
        raise StructureError("only cherry-tree copulas can be lifted")
    order = sizes.pop()
    old = CherryTree(order, jm.tree)
    new = expand_cherry_tree(old)
    parts = {}
    for i, j, sep in old.tree_edges:
        parts[old.clusters[i] | old.clusters[j]] = (old.clusters[i], old.clusters[j], sep)
    ev = dict(jm.log_evaluators)

    def restrict(f, outer, inner):
        idx = [sorted(outer).index(v) for v in sorted(inner)]
        return lambda x: f(x[:, idx])

    new_ev = {}
    for K in new.clusters:
        A, B, S = parts[K]
        fa, fb = restrict(ev[A], K, A), restrict(ev[B], K, B)
        fs = restrict(ev[S], K, S) if len(S) > 1 else _zero_evaluator
        new_ev[K] = (lambda fa, fb, fs: lambda x: fa(x) + fb(x) - fs(x))(fa, fb, fs)
    for S in new.base.separators:
        new_ev[S] = ev[S]
    return JunctionTreeCopulaModel(new.base, new_ev)


def gaussian_copula_log_density(u, corr) -> np.ndarray:
    """Closed-form Gaussian copula log density with correlation matrix ``corr``."""
    corr = np.asarray(corr, float)
    z = special.ndtri(clamp(np.atleast_2d(u)))
    sign, logdet = np.linalg.slogdet(corr)
    if sign <= 0:
        raise StructureError("correlation matrix is not positive definite")
    prec = np.linalg.inv(corr) - np.eye(corr.shape[0])
    return -0.5 * logdet - 0.5 * np.einsum("ni,ij,nj->n", z, prec, z)


def gaussian_junction_model(tree: JunctionTree, corr) -> JunctionTreeCopulaModel:
    """Cluster and separator evaluators from sub-blocks of a full correlation
    matrix whose rows follow ``tree.vertices``."""
    corr = np.asarray(corr, float)
    ev = {}
    for key in set(tree.clusters) | set(tree.separators):
        if len(key) >= 2:
            idx = [tree.vertices.index(v) for v in sorted(key)]
            sub = corr[np.ix_(idx, idx)]
            ev[key] = (lambda s: lambda x: gaussian_copula_log_density(x, s))(sub)
    return JunctionTreeCopulaModel(tree, ev)


# --------------------------------------------------------------------------
# Sampling


def sampling_order(structure: CherryVineStructure) -> list:
    """Variables in an order for which each one's conditional distribution
    given its predecessors is reachable through h-inverses."""
    remaining = set(structure.vertices)
    by_constraint = {l.constraint: l for l in structure.links}
    tail = []
    while len(remaining) > 2:
        link = by_constraint[frozenset(remaining)]
        tail.append(link.b)
        remaining.discard(link.b)
    link = by_constraint[frozenset(remaining)]
    return [link.a, link.b] + tail[::-1]


def _sample_chunk(m: VineModel, order: list, w: np.ndarray) -> np.ndarray:
    st = m.structure
    n = w.shape[0]
    out = np.empty((n, m.d))
    placed: set = set()
    cols: dict = {}
    for t, var in enumerate(order):
        val = w[:, t]
        given = frozenset(placed)
        if given:
            links = [l for l in st.links if l.constraint <= given]
            _, cond = _forward(links, m.pair_copulas, cols)
            while given:
                link, other = st.source(var, given)
                rest = given - {other}
                val = m.copula(link).h_inverse(val, cond[(other, rest)])
                given = rest
        cols[var] = clamp(val)
        out[:, st.column(var)] = cols[var]
        placed.add(var)
    return out


def sample(m: VineModel, n: int, seed: int) -> np.ndarray:
    """
    Draw ``n`` points from the vine by inverse Rosenblatt transform.

    Rows are generated in chunks of ``SAMPLE_CHUNK``, each from its own
    stream spawned from ``seed``; output is identical whether chunks are
    produced serially or in parallel.
    """
    if n < 1:
        raise ValueError("n must be positive")
    order = sampling_order(m.structure)
    n_chunks = math.ceil(n / SAMPLE_CHUNK)
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    parts = []
    for c, ss in enumerate(streams):
        size = min(SAMPLE_CHUNK, n - c * SAMPLE_CHUNK)
        w = np.random.default_rng(ss).random((size, m.d))
        parts.append(_sample_chunk(m, order, w))
    return np.vstack(parts)


__all__ = [
    "Link", "link_key", "CherryVineStructure", "build_cherry_vine",
    "complete_structure", "structure_from_first_tree", "d_vine_structure",
    "c_vine_structure", "VineModel", "log_density", "conditional_cdf",
    "truncate", "truncation_level", "JunctionTreeCopulaModel",
    "junction_tree_log_density", "subvine_evaluator", "to_cherry_tree_copula",
    "lift_cherry_tree_copula", "gaussian_copula_log_density",
    "gaussian_junction_model", "sampling_order", "sample",
]
