"""Random metric decompositions.

* :class:`TreeMetric` -- well-separated trees under the heaviest-edge distance.
* :func:`frt_embed` -- probabilistic embedding of a finite metric into a
  2-hierarchically well-separated tree.
* :func:`r_simplify` -- replace letters by their highest ancestor reachable
  through light edges.
* :func:`sample_partition` / :func:`snap` -- bounded-diameter random
  partitions (shifted grids, CKR ball carving, tree level cuts) and the
  representative map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dtw import Correspondence, Sequence
from .metric import FiniteMatrix, GeneralizedHamming, IntegerLine, LpGrid, MetricError, MetricSpace

#: measured: expected per-pair FRT expansion stays below C_FRT * log2|points| (see tests)
C_FRT = 4.0


class TreeMetric(MetricSpace):
    """Rooted tree whose nodes are the points; ``d(a, b)`` is the heaviest edge on the a-b path.

    ``parent[root] == -1``; ``weight[v]`` is the weight of the edge from ``v``
    to its parent (ignored at the root).
    """

    kind = "tree"

    def __init__(self, parent, weight):
        parent = np.asarray(parent, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        super().__init__(parent.size)
        if weight.shape != parent.shape:
            raise MetricError("parent and weight arrays differ in length")
        roots = np.flatnonzero(parent < 0)
        if roots.size != 1:
            raise MetricError(f"tree needs exactly one root, found {roots.size}")
        self.root = int(roots[0])
        weight = weight.copy()
        weight[self.root] = 0.0
        if np.any(weight[parent >= 0] <= 0):
            raise MetricError("edge weights must be positive")
        self.parent = parent
        self.integral = bool(np.all(weight == np.round(weight)))
        self.weight = weight.astype(np.int64) if self.integral else weight
        self.order = self._topological_order()
        self.depth = np.zeros(self.size, dtype=np.int64)
        for v in self.order[1:]:
            self.depth[v] = self.depth[parent[v]] + 1
        D = int(self.depth.max()) + 1
        # anc[v, d]: ancestor of v at depth d (or -1); upmax[v, d]: heaviest edge from v up to it
        self.anc = np.full((self.size, D), -1, dtype=np.int64)
        self.upmax = np.zeros((self.size, D), dtype=self.weight.dtype)
        for v in self.order:
            p = parent[v]
            dv = self.depth[v]
            if p >= 0:
                self.anc[v, :dv] = self.anc[p, :dv]
                self.upmax[v, :dv] = np.maximum(self.upmax[p, :dv], self.weight[v])
            self.anc[v, dv] = v

    def _topological_order(self):
        children = [[] for _ in range(self.size)]
        for v, p in enumerate(self.parent.tolist()):
            if p >= 0:
                if not 0 <= p < self.size:
                    raise MetricError(f"parent {p} of node {v} is not a node")
                children[p].append(v)
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            stack.extend(children[v])
        if len(order) != self.size:
            raise MetricError("parent links do not form a tree")
        self.children = children
        return np.asarray(order, dtype=np.int64)

    def pairwise(self, a, b):
        a, b = self._check(a), self._check(b)
        same = self.anc[a][:, None, :] == self.anc[b][None, :, :]
        same &= self.anc[a][:, None, :] >= 0
        lca_depth = same.sum(axis=2) - 1
        ia = np.broadcast_to(a[:, None], lca_depth.shape)
        ib = np.broadcast_to(b[None, :], lca_depth.shape)
        return np.maximum(self.upmax[ia, lca_depth], self.upmax[ib, lca_depth])

    @property
    def min_dist(self):
        w = self.weight[self.parent >= 0]
        return w.min() if w.size else 0

    @property
    def diameter(self):
        w = self.weight[self.parent >= 0]
        return w.max() if w.size else 0

    def is_well_separated(self) -> bool:
        inner = (self.parent >= 0) & (self.parent != self.root)
        inner_idx = np.flatnonzero(inner)
        return bool(np.all(self.weight[inner_idx] <= self.weight[self.parent[inner_idx]]))

    def is_hst(self, ratio: float = 2.0) -> bool:
        """Every child edge is at most ``1/ratio`` of its parent edge."""
        inner_idx = np.flatnonzero((self.parent >= 0) & (self.parent != self.root))
        return bool(np.all(self.weight[inner_idx] * ratio <= self.weight[self.parent[inner_idx]]))

    def leaves(self) -> np.ndarray:
        return np.asarray([v for v in range(self.size) if not self.children[v]], dtype=np.int64)

    def _scaled(self, factor):
        return TreeMetric(self.parent, self.weight * factor)


def tree_distance(tree: TreeMetric, a: int, b: int):
    return tree.distance(a, b)


def simplify_map(tree: TreeMetric, r: float) -> np.ndarray:
    """For each node, its highest ancestor reachable through edges of weight <= r/4."""
    up = np.arange(tree.size, dtype=np.int64)
    for v in tree.order[1:]:
        if 4 * tree.weight[v] <= r:
            up[v] = up[tree.parent[v]]
    return up


def r_simplify(tree: TreeMetric, x: Sequence, r: float) -> Sequence:
    """The r-simplification of ``x``; letters must be nodes of ``tree``."""
    if r <= 0:
        raise ValueError("r must be positive")
    return Sequence(simplify_map(tree, r)[x.letters], tree, check=False)


def random_hst(n_nodes: int, rng: np.random.Generator, top_weight: float = 64.0,
               ratio: float = 2.0, integral: bool = True) -> TreeMetric:
    """A random tree whose edge weights shrink by at least ``ratio`` per level."""
    parent = np.full(n_nodes, -1, dtype=np.int64)
    weight = np.zeros(n_nodes)
    for v in range(1, n_nodes):
        p = int(rng.integers(0, v))
        parent[v] = p
        cap = top_weight if parent[p] < 0 else weight[p] / ratio
        w = cap * rng.uniform(0.5, 1.0)
        if integral:
            w = max(1.0, math.floor(w))
            if parent[p] >= 0 and w * ratio > weight[p]:
                # cannot shrink further: reattach to the root
                parent[v], w = 0, max(1.0, math.floor(top_weight * rng.uniform(0.5, 1.0)))
        weight[v] = w
    return TreeMetric(parent, weight)


# ---------------------------------------------------------------------------
# FRT


@dataclass(frozen=True)
class EmbeddingResult:
    tree: TreeMetric
    phi: np.ndarray
    seed: int
    beta: float

    def map(self, x: Sequence) -> Sequence:
        return Sequence(self.phi[x.letters], self.tree, check=False)


def frt_embed(space: MetricSpace, seed: int) -> EmbeddingResult:
    """Embed a normalized finite metric into a 2-HST (heaviest-edge convention).

    A random permutation and scale ``beta`` in [1, 2) drive hierarchical ball
    carving with radii ``beta * 2**(i-1)``.  The edge from a level ``i+1``
    cluster to a child carries weight ``beta * 2**(i+1)``, which bounds the
    parent cluster's diameter, so distances never shrink.  Point ``a`` maps
    to leaf ``a``; internal nodes are numbered from ``space.size`` upward.
    """
    if space.size == 1:
        return EmbeddingResult(TreeMetric([-1], [0.0]), np.zeros(1, dtype=np.int64), seed, 1.0)
    if not space.is_normalized:
        raise MetricError("frt_embed needs a normalized space (minimum distance 1)")
    rng = np.random.default_rng(seed)
    D = np.asarray(space.matrix(), dtype=np.float64)
    n = space.size
    perm = rng.permutation(n)
    beta = float(rng.uniform(1.0, 2.0))
    top = 0
    while beta * 2.0 ** (top - 1) < D.max():
        top += 1
    # center[i][v]: first point of perm within radius beta*2^(i-1) of v
    within = D[:, perm]
    parent = {}
    weight = {}
    next_id = [n]

    def new_node():
        next_id[0] += 1
        return next_id[0] - 1

    root = new_node()
    frontier = [(root, np.arange(n), top)]  # (node, members, level)
    while frontier:
        node, members, level = frontier.pop()
        lvl = level - 1
        # descend through levels that do not split the cluster
        while True:
            radius = beta * 2.0 ** (lvl - 1)
            centers = np.argmax(within[members] <= radius, axis=1)
            groups = np.unique(centers)
            if groups.size > 1 or members.size == 1:
                break
            lvl -= 1
        edge = beta * 2.0 ** (lvl + 1)
        for g in groups:
            sub = members[centers == g]
            if sub.size == 1:
                child = int(sub[0])
            else:
                child = new_node()
                frontier.append((child, sub, lvl))
            parent[child] = node
            weight[child] = edge
    total = next_id[0]
    par = np.full(total, -1, dtype=np.int64)
    w = np.zeros(total)
    for c, p in parent.items():
        par[c] = p
        w[c] = weight[c]
    return EmbeddingResult(TreeMetric(par, w), np.arange(n, dtype=np.int64), seed, beta)


# ---------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class Partition:
    delta: float
    part: np.ndarray
    rep: np.ndarray
    seed: int

    @classmethod
    def from_labels(cls, labels, delta, seed):
        labels = np.asarray(labels)
        _, part = np.unique(labels, return_inverse=True)
        rep = np.full(part.max() + 1, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(rep, part, np.arange(part.size))
        return cls(float(delta), part.astype(np.int64), rep[part], seed)

    def z(self, a):
        return self.rep[a]

    def separated(self, a, b) -> np.ndarray:
        return self.part[a] != self.part[b]


def declared_sigma(space: MetricSpace) -> float:
    """Separation parameter the sampler below achieves for ``space``."""
    if isinstance(space, IntegerLine):
        return 1.0
    if isinstance(space, LpGrid):
        d, p = space.dim, space.p
        if d == 1:
            return 1.0
        if p <= 2:
            return float(d)
        return d ** (1.5 - 1.0 / p) * math.sqrt(min(p, math.log2(d)))
    if isinstance(space, TreeMetric):
        return 2.0
    return 4.0 * sum(1.0 / k for k in range(1, space.size + 1))


def grid_cell_side(space: LpGrid, delta: float) -> float:
    d, p = space.dim, space.p
    if p <= 2:
        return delta / d ** (1.0 / p)
    return delta / (math.sqrt(d) * math.sqrt(min(p, math.log2(d)) if d > 1 else 1.0))


def sample_partition(space: MetricSpace, delta: float, seed: int) -> Partition:
    """A random partition whose parts have diameter at most ``delta``."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    ids = np.arange(space.size)
    if isinstance(space, IntegerLine):
        shift = rng.uniform(0.0, delta)
        return Partition.from_labels(np.floor((ids + shift) / delta), delta, seed)
    if isinstance(space, LpGrid):
        side = grid_cell_side(space, delta) if space.dim > 1 else delta
        shift = rng.uniform(0.0, side, size=space.dim)
        cells = np.floor((space.coords(ids) + shift) / side).astype(np.int64)
        _, labels = np.unique(cells, axis=0, return_inverse=True)
        return Partition.from_labels(labels.reshape(-1), delta, seed)
    if isinstance(space, TreeMetric):
        labels = np.arange(space.size)
        for v in space.order[1:]:
            if 2 * space.weight[v] <= delta:
                labels[v] = labels[space.parent[v]]
        return Partition.from_labels(labels, delta, seed)
    return _ckr(space, delta, rng, seed)


def _ckr(space, delta, rng, seed):
    D = np.asarray(space.matrix(), dtype=np.float64)
    radius = rng.uniform(delta / 4.0, delta / 2.0)
    perm = rng.permutation(space.size)
    # every point is within 0 of itself, so argmax always finds a center
    centers = perm[np.argmax(D[:, perm] <= radius, axis=1)]
    return Partition.from_labels(centers, delta, seed)


def snap(p: Partition, x: Sequence) -> Sequence:
    """Replace every letter by its part's representative."""
    return x.with_letters(p.rep[x.letters])


def cut_edges(p: Partition, corr: Correspondence) -> int:
    """Aligned pairs of a correspondence whose letters land in different parts."""
    return int(np.count_nonzero(p.part[corr.xbar] != p.part[corr.ybar]))


def partition_diameters(space: MetricSpace, p: Partition) -> np.ndarray:
    D = np.asarray(space.matrix())
    out = np.zeros(p.rep.max() + 1 if p.rep.size else 0)
    for r in np.unique(p.rep):
        members = np.flatnonzero(p.rep == r)
        out[r] = D[np.ix_(members, members)].max()
    return out[np.unique(p.rep)]


SEPARABLE_KINDS = (IntegerLine, LpGrid, TreeMetric, FiniteMatrix, GeneralizedHamming)
