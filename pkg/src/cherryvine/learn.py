"""
Learning cherry-vine models from data.

The first tree is the maximum spanning tree of absolute empirical Kendall
taus.  Each higher tree keeps the clusters forced by the tree below and
chooses its links greedily, scoring a candidate link ``(a, b | S)`` by the
absolute Kendall tau between the residuals ``F(a | S)`` and ``F(b | S)``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .bicop import (BivariateCopula, Family, empirical_tau, fit_bicop,
                    log_likelihood)
from .errors import DataError, ParameterError, StructureError
from .graph_core import (CherryTree, JunctionTree, _kruskal, expand_cherry_tree,
                         find_rip_ordering, is_cherry_tree, spanning_tree)
from .vine_model import VineModel, _links_of, build_cherry_vine

DEFAULT_SEED = 12345
DEFAULT_FAMILIES = ("gaussian", "clayton", "gumbel", "frank")


@dataclass(frozen=True)
class PseudoObservations:
    """Copula-scale data: an ``(n, d)`` array with entries in (0, 1)."""
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise DataError("pseudo-observations must be a two-dimensional array")
        if not np.all((vals > 0.0) & (vals < 1.0)):
            raise DataError("pseudo-observations must lie strictly inside (0, 1)")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]


def as_pseudo_observations(data) -> PseudoObservations:
    if isinstance(data, PseudoObservations):
        return data
    return PseudoObservations(np.asarray(data, dtype=float))


def pseudo_observations(raw, seed: int = DEFAULT_SEED) -> PseudoObservations:
    """
    Rank-transform each column to ``rank / (n + 1)``.

    Tied values share their average rank and are then spread over the
    distinct ranks of the tie group in a seeded random order, so every
    column is a permutation of ``1/(n+1), ..., n/(n+1)``.
    """
    x = np.asarray(raw, dtype=float)
    if x.ndim != 2:
        raise DataError("data must be a two-dimensional array")
    n, d = x.shape
    if n < 2:
        raise DataError(f"at least two observations are needed, got {n}")
    if not np.all(np.isfinite(x)):
        raise DataError("data contain non-finite values")
    rng = np.random.default_rng(seed)
    out = np.empty_like(x)
    for j in range(d):
        col = x[:, j]
        if np.ptp(col) == 0.0:
            raise DataError(f"column {j + 1} is constant")
        tiebreak = rng.random(n)
        order = np.lexsort((tiebreak, col))
        ranks = np.empty(n)
        ranks[order] = np.arange(1, n + 1)
        out[:, j] = ranks / (n + 1)
    return PseudoObservations(out)


kendall_tau = empirical_tau


@dataclass(frozen=True)
class DependenceMatrix:
    vertices: tuple
    tau: np.ndarray

    def __getitem__(self, pair):
        i, j = pair
        return self.tau[self.vertices.index(i), self.vertices.index(j)]


def empirical_tau_matrix(po, vertices: Sequence[int] | None = None) -> DependenceMatrix:
    po = as_pseudo_observations(po)
    if po.n < 10:
        raise DataError(f"at least 10 observations are needed, got {po.n}")
    verts = tuple(vertices) if vertices is not None else tuple(range(1, po.d + 1))
    tau = np.eye(po.d)
    for i, j in itertools.combinations(range(po.d), 2):
        tau[i, j] = tau[j, i] = empirical_tau(po.column(i), po.column(j))
    return DependenceMatrix(verts, tau)


def fit_first_tree(dm: DependenceMatrix) -> CherryTree:
    """Maximum spanning tree under ``|tau|``; ties go to the
    lexicographically smaller vertex pair."""
    verts = dm.vertices
    if len(verts) < 2:
        raise StructureError("a first tree needs at least two variables")
    weighted = [(abs(dm.tau[i, j]), i, j)
                for i, j in itertools.combinations(range(len(verts)), 2)]
    edges = _kruskal(len(verts), weighted)
    return spanning_tree(verts, [(verts[i], verts[j]) for i, j in edges])


def first_tree_edges(ct: CherryTree) -> list:
    """Vertex pairs of an order-1 cherry tree."""
    return sorted(tuple(sorted(next(iter(ct.clusters[i])) for i in (i, j)))
                  for i, j, _ in ct.tree_edges)


def independence_statistic(tau: float, n: int) -> float:
    """Asymptotic z statistic of Kendall's tau under independence."""
    return abs(tau) * math.sqrt(9.0 * n * (n - 1) / (2.0 * (2 * n + 5)))


def independence_filter(u, v, alpha: float = 0.05) -> bool:
    """True when the pair is compatible with independence at level ``alpha``."""
    u = np.asarray(u, float)
    if u.size < 10:
        raise DataError(f"at least 10 observations are needed, got {u.size}")
    stat = independence_statistic(empirical_tau(u, v), u.size)
    return stat < stats.norm.ppf(1.0 - alpha / 2.0)


def _candidate_links(prev: CherryTree):
    """Clusters of the next tree and the admissible links between them.

    A link joins two new clusters built from prev edges that share a prev
    cluster ``B``; its separator is ``B``.
    """
    unions = {}
    for i, j, _ in prev.tree_edges:
        unions[(i, j)] = prev.clusters[i] | prev.clusters[j]
    clusters = sorted(set(unions.values()), key=sorted)
    index = {c: n for n, c in enumerate(clusters)}
    incident = {i: [] for i in range(len(prev.clusters))}
    for (i, j), c in unions.items():
        incident[i].append(index[c])
        incident[j].append(index[c])
    candidates = {}
    for b, members in incident.items():
        for x, y in itertools.combinations(sorted(members), 2):
            candidates[(x, y)] = prev.clusters[b]
    return clusters, candidates


def greedy_cherry_tree(po, k: int, prev: CherryTree,
                       conditionals: Mapping | None = None) -> CherryTree:
    """
    Grow an order-k cherry tree on top of the order-(k-1) tree ``prev``.

    The clusters are the unions of clusters linked in ``prev``.  Among the
    links allowed between them, a maximum spanning tree under the score
    ``|tau(F(a | S), F(b | S))|`` is chosen (ties by cluster index).

    Parameters
    ----------
    po : PseudoObservations
    k : int
        Order of the tree to build, at least 2.
    prev : CherryTree
        Tree of order ``k - 1``; for ``k = 2`` the first tree.
    conditionals : mapping, optional
        ``(variable, frozenset(conditioning set)) -> residual array``; needs to
        cover ``F(a | S)`` for every candidate link when the tree is not
        forced.  Unconditional keys default to the data columns.
    """
    po = as_pseudo_observations(po)
    if k < 2:
        raise StructureError("greedy growth starts at order 2")
    if prev.order != k - 1 or not is_cherry_tree(prev.base, k - 1):
        raise StructureError(f"previous tree must be a cherry tree of order {k - 1}")
    if len(prev.clusters) < 2:
        raise StructureError("previous tree has no links to merge")
    verts = prev.vertices
    clusters, candidates = _candidate_links(prev)

    if len(candidates) == len(clusters) - 1:
        edges = sorted(candidates)
    else:
        cond = {(v, frozenset()): po.column(i) for i, v in enumerate(verts)}
        if conditionals:
            cond.update(conditionals)
        weighted = []
        for (x, y), sep in candidates.items():
            a = next(iter(clusters[x] - sep))
            b = next(iter(clusters[y] - sep))
            try:
                ra, rb = cond[(a, sep)], cond[(b, sep)]
            except KeyError:
                raise DataError(
                    f"residuals F({a}|{sorted(sep)}) / F({b}|{sorted(sep)}) are missing"
                ) from None
            weighted.append((abs(empirical_tau(ra, rb)), x, y))
        edges = _kruskal(len(clusters), weighted)
    return CherryTree(k, JunctionTree(verts, clusters, edges))


def select_pair_copula(u, v, family_pool: Iterable, method: str = "itau",
                       alpha: float | None = None) -> BivariateCopula:
    """
    Fit every family of the pool and keep the highest log-likelihood.

    Ties favour independence, then the earlier family in the pool.  With
    ``alpha`` set, pairs passing :func:`independence_filter` become
    independence.  Families whose attainable tau range excludes the data are
    skipped; if none remains, independence is returned with a warning.
    """
    pool = [Family.parse(f) for f in family_pool]
    if not pool:
        raise ParameterError("family pool is empty")
    u, v = np.asarray(u, float), np.asarray(v, float)
    if u.size < 10:
        raise DataError(f"at least 10 observations are needed, got {u.size}")
    if np.ptp(u) == 0.0 or np.ptp(v) == 0.0:
        raise DataError("degenerate residuals: a conditioned variable is constant")
    if alpha is not None and independence_filter(u, v, alpha):
        return BivariateCopula.independence()
    # independence first so it wins ties
    ordered = sorted(pool, key=lambda f: f is not Family.INDEPENDENCE)
    best, best_ll = None, -math.inf
    for fam in ordered:
        try:
            c = fit_bicop(u, v, fam, method=method)
        except ParameterError:
            continue
        ll = log_likelihood(c, u, v)
        if ll > best_ll:
            best, best_ll = c, ll
    if best is None:
        warnings.warn("no family in the pool attains the empirical tau; "
                      "using independence", RuntimeWarning, stacklevel=2)
        return BivariateCopula.independence()
    return best


def fit_truncated_vine(po, k: int, family_pool: Iterable = DEFAULT_FAMILIES,
                       method: str = "itau", alpha: float | None = None) -> VineModel:
    """
    Learn a vine truncated at level ``k``.

    ``T_1`` comes from :func:`fit_first_tree`, ``T_2 .. T_k`` from
    :func:`greedy_cherry_tree`, and links of those trees get the best pair
    copula from ``family_pool``, fitted to h-function residuals.  Trees above
    ``k`` are completed with :func:`expand_cherry_tree` and carry
    independence copulas.
    """
    po = as_pseudo_observations(po)
    d = po.d
    pool = list(family_pool)
    if not pool:
        raise ParameterError("family pool is empty")
    if d < 2:
        raise DataError("at least two variables are needed")
    if not 1 <= k <= d - 1:
        raise StructureError(f"truncation level {k} outside 1..{d - 1}")
    verts = tuple(range(1, d + 1))
    trees = [fit_first_tree(empirical_tau_matrix(po, verts))]
    cond = {(v, frozenset()): po.column(i) for i, v in enumerate(verts)}
    copulas = {}
    for level in range(1, d):
        if level > 1:
            if level <= k:
                trees.append(greedy_cherry_tree(po, level, trees[-1], cond))
            else:
                trees.append(expand_cherry_tree(trees[-1]))
        for link in _links_of(trees[-1], level):
            if level > k:
                copulas[link.key] = BivariateCopula.independence()
                continue
            ua, ub = cond[(link.a, link.given)], cond[(link.b, link.given)]
            c = select_pair_copula(ua, ub, pool, method=method, alpha=alpha)
            copulas[link.key] = c
            if level < k:
                cond[(link.a, link.given | {link.b})] = c.h(ua, ub)
                cond[(link.b, link.given | {link.a})] = c.h(ub, ua)
    return VineModel(build_cherry_vine(trees), copulas)


def junction_tree_to_cherry_tree(jt: JunctionTree, k: int) -> CherryTree:
    """
    Embed a junction tree of width at most ``k`` in an order-k cherry tree.

    Every cluster of ``jt`` is contained in some output cluster.  Vertices
    are placed in running-intersection order: the first output cluster is
    the first ``k`` vertices; each later vertex ``v`` joins a copy of the
    earliest output cluster holding its already-placed cluster neighbours,
    minus one vertex outside that neighbourhood.
    """
    if k < 1:
        raise StructureError("order must be positive")
    if max(len(c) for c in jt.clusters) > k:
        raise StructureError(f"a cluster of the junction tree exceeds size {k}")
    if jt.d < k:
        raise StructureError(f"{jt.d} vertices cannot carry an order-{k} cherry tree")
    if is_cherry_tree(jt, k):
        return CherryTree(k, jt)

    rip = find_rip_ordering(jt.clusters)
    ordered = [jt.clusters[i] for i in rip]
    vertex_order = []
    for c in ordered:
        vertex_order.extend(sorted(c - set(vertex_order)))
    vertex_order.extend(sorted(set(jt.vertices) - set(vertex_order)))

    out_clusters = [frozenset(vertex_order[:k])]
    out_edges = []
    placed = set(vertex_order[:k])
    for c in ordered:
        if c <= placed:
            continue
        for v in sorted(c - placed, key=vertex_order.index):
            need = c & placed
            host = next(i for i, oc in enumerate(out_clusters) if need <= oc)
            spare = sorted(out_clusters[host] - need, key=vertex_order.index)
            drop = len(out_clusters[host]) - (k - 1)
            keep = out_clusters[host] - frozenset(spare[:drop])
            out_clusters.append(keep | {v})
            out_edges.append((host, len(out_clusters) - 1))
            placed.add(v)
    result = CherryTree(k, JunctionTree(jt.vertices, out_clusters, out_edges))
    for c in jt.clusters:
        if not any(c <= oc for oc in result.clusters):  # pragma: no cover
            raise StructureError("cluster containment failed")
    return result


__all__ = [
    "DEFAULT_SEED", "DEFAULT_FAMILIES", "PseudoObservations",
    "as_pseudo_observations", "pseudo_observations", "kendall_tau",
    "DependenceMatrix", "empirical_tau_matrix", "fit_first_tree",
    "first_tree_edges", "independence_statistic", "independence_filter",
    "greedy_cherry_tree", "select_pair_copula", "fit_truncated_vine",
    "junction_tree_to_cherry_tree",
]
