"""Referral trees: construction, pairwise distances, and the distance PGF.

A referral tree indexes the sampling process: node 0 is the seed, and
``parent[tau]`` recruited ``tau``.  Nodes are numbered breadth-first, so
``parent[tau] < tau`` always holds.  Distances between tree nodes drive
every covariance matrix in the package, hence the emphasis here on exact
distance distributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InvalidParametersError, SamplingFailedError
from .seeding import STREAM_TREE, as_rng

MAX_DENSE_NODES = 10_000
"""Largest tree for which the dense O(n^2) distance matrix is built."""

MAX_DIAMETER = 65_535
"""Distances are stored as 16-bit integers."""


@dataclass(frozen=True, eq=False)
class ReferralTree:
    """Rooted tree with breadth-first node numbering.

    ``parent[0] == -1`` marks the root; every other entry points to a
    lower-numbered node.
    """

    parent: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        n = parent.shape[0]
        if n < 1 or parent[0] != -1:
            raise InvalidParametersError("node 0 must be the root (parent -1)")
        if n > 1:
            rest = parent[1:]
            if rest.min() < 0 or np.any(rest >= np.arange(1, n)):
                raise InvalidParametersError(
                    "parent[tau] must name an earlier node for every tau > 0"
                )

    @property
    def n(self) -> int:
        return int(self.parent.shape[0])

    @property
    def depths(self) -> np.ndarray:
        """Depth of each node (root = 0)."""
        if "depths" not in self._cache:
            d = np.zeros(self.n, dtype=np.int64)
            for tau in range(1, self.n):
                d[tau] = d[self.parent[tau]] + 1
            self._cache["depths"] = d
        return self._cache["depths"]

    @property
    def degrees(self) -> np.ndarray:
        """Undirected tree degree of each node."""
        if "degrees" not in self._cache:
            deg = np.zeros(self.n, dtype=np.int64)
            if self.n > 1:
                np.add.at(deg, self.parent[1:], 1)
                deg[1:] += 1
            self._cache["degrees"] = deg
        return self._cache["degrees"]

    @property
    def children(self) -> list:
        """Child lists in node order."""
        if "children" not in self._cache:
            kids = [[] for _ in range(self.n)]
            for tau in range(1, self.n):
                kids[self.parent[tau]].append(tau)
            self._cache["children"] = kids
        return self._cache["children"]

    @property
    def num_levels(self) -> int:
        return int(self.depths.max()) + 1

    def level_nodes(self) -> list:
        """Node ids grouped by depth, each group ascending."""
        if "levels" not in self._cache:
            depths = self.depths
            levels = [np.flatnonzero(depths == k) for k in range(self.num_levels)]
            self._cache["levels"] = levels
        return self._cache["levels"]

    def distance_matrix(self) -> np.ndarray:
        """Dense pairwise distance matrix (uint16).

        Built row-by-row from the parent's row: the lowest common ancestor
        of (tau, sigma) equals the one of (parent[tau], sigma) unless sigma
        lies inside tau's subtree.  O(n^2) time and one n x n buffer.
        """
        if "dist" in self._cache:
            return self._cache["dist"]
        n = self.n
        if n > MAX_DENSE_NODES:
            raise CapacityError(
                f"dense distance matrix requested for n={n} > {MAX_DENSE_NODES}"
            )
        depths = self.depths.astype(np.int32)
        if depths.max() * 2 > MAX_DIAMETER:
            raise CapacityError("tree diameter exceeds the 16-bit distance type")
        tin, tout = self._euler_intervals()
        lca_depth = np.empty((n, n), dtype=np.uint16)
        lca_depth[0, :] = 0
        for tau in range(1, n):
            row = lca_depth[self.parent[tau]].copy()
            inside = (tin >= tin[tau]) & (tin <= tout[tau])
            row[inside] = depths[tau]
            lca_depth[tau] = row
        # transform in place: d(tau, sigma) = dep[tau] + dep[sigma] - 2 lca
        for tau in range(n):
            lca_depth[tau] = (depths[tau] + depths - 2 * lca_depth[tau].astype(np.int32)).astype(
                np.uint16
            )
        self._cache["dist"] = lca_depth
        return lca_depth

    def _euler_intervals(self):
        """Preorder entry/exit counters; subtree(v) = [tin[v], tout[v]]."""
        n = self.n
        tin = np.zeros(n, dtype=np.int64)
        tout = np.zeros(n, dtype=np.int64)
        kids = self.children
        clock = 0
        stack = [(0, False)]
        while stack:
            node, done = stack.pop()
            if done:
                tout[node] = clock - 1
                continue
            tin[node] = clock
            clock += 1
            stack.append((node, True))
            for c in reversed(kids[node]):
                stack.append((c, False))
        return tin, tout

    def prefix(self, n: int) -> "ReferralTree":
        """First ``n`` nodes in breadth-first order (a valid subtree)."""
        if not 1 <= n <= self.n:
            raise InvalidParametersError(f"prefix size {n} outside [1, {self.n}]")
        return ReferralTree(self.parent[:n].copy())


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    """Exact pmf of d(I, J) for I, J independent uniform tree nodes."""

    pmf: np.ndarray
    n: int

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=np.float64)
        object.__setattr__(self, "pmf", pmf)
        if abs(pmf.sum() - 1.0) > 1e-9 or pmf.min() < 0:
            raise InvalidParametersError("distance pmf must be a probability vector")

    @property
    def diameter(self) -> int:
        return len(self.pmf) - 1

    def pgf(self, x: float) -> float:
        return distance_pgf(self, x)

    def pgf_grid(self, xs: np.ndarray) -> np.ndarray:
        """Vectorized PGF over a grid of arguments in [-1, 1]."""
        xs = np.asarray(xs, dtype=np.float64)
        if np.any(np.abs(xs) > 1.0):
            raise InvalidParametersError("PGF argument must satisfy |x| <= 1")
        d = np.arange(len(self.pmf))
        with np.errstate(invalid="ignore"):
            powers = np.power(xs[:, None], d[None, :])
        powers[:, 0] = 1.0  # 0^0 = 1
        return powers @ self.pmf


def complete_binary_tree(levels: int) -> ReferralTree:
    """Complete binary tree with 2^levels - 1 nodes."""
    if levels < 1:
        raise InvalidParametersError("levels must be >= 1")
    n = 2**levels - 1
    parent = np.empty(n, dtype=np.int64)
    parent[0] = -1
    if n > 1:
        parent[1:] = (np.arange(1, n) - 1) // 2
    return ReferralTree(parent)


def galton_watson_tree(
    offspring_pmf,
    target_n: int,
    rng_seed,
    max_restarts: int = 1000,
):
    """Breadth-first branching-process tree truncated at exactly ``target_n`` nodes.

    Offspring counts are i.i.d. from ``offspring_pmf`` (a probability vector
    over counts 0..R_max).  Children stop being created mid-level once the
    target is reached.  If the process dies out first, it restarts with
    fresh randomness, up to ``max_restarts`` times.

    Returns ``(tree, restarts)``.
    """
    pmf = np.asarray(offspring_pmf, dtype=np.float64)
    if pmf.ndim != 1 or pmf.min() < 0 or abs(pmf.sum() - 1.0) > 1e-9:
        raise InvalidParametersError("offspring pmf must be a probability vector")
    if target_n < 1:
        raise InvalidParametersError("target_n must be >= 1")
    rng = as_rng(rng_seed, STREAM_TREE)
    cdf = np.cumsum(pmf)
    restarts = 0
    best = 1
    while restarts <= max_restarts:
        parent = [-1]
        frontier = 0  # next node whose offspring are drawn
        while len(parent) < target_n and frontier < len(parent):
            count = int(np.searchsorted(cdf, rng.random(), side="right"))
            for _ in range(count):
                if len(parent) >= target_n:
                    break
                parent.append(frontier)
            frontier += 1
        if len(parent) >= target_n:
            return ReferralTree(np.asarray(parent, dtype=np.int64)), restarts
        best = max(best, len(parent))
        restarts += 1
    raise SamplingFailedError(
        f"branching process died before {target_n} nodes in all "
        f"{max_restarts + 1} attempts (best size {best})",
        restarts=max_restarts,
        reached=best,
    )


def tree_distance_distribution(tree: ReferralTree) -> DistanceDistribution:
    """Exact distance pmf by full pairwise computation (O(n^2), cached)."""
    if "distpmf" in tree._cache:
        return tree._cache["distpmf"]
    dist = tree.distance_matrix()
    n = tree.n
    counts = np.zeros(int(dist.max()) + 1, dtype=np.int64)
    step = max(1, 2**22 // max(n, 1))
    for start in range(0, n, step):
        block = dist[start : start + step].astype(np.int64, copy=False)
        counts += np.bincount(block.ravel(), minlength=len(counts))
    out = DistanceDistribution(pmf=counts / float(n) ** 2, n=n)
    tree._cache["distpmf"] = out
    return out


def complete_binary_distance_distribution(levels: int) -> DistanceDistribution:
    """Closed-form distance pmf for the complete binary tree.

    Counts ordered pairs by the depth of their lowest common ancestor;
    O(levels^3) arithmetic, usable far beyond the dense-matrix cap.
    """
    if levels < 1:
        raise InvalidParametersError("levels must be >= 1")
    L = levels
    n = 2**L - 1
    counts = np.zeros(2 * (L - 1) + 1 if L > 1 else 1, dtype=np.float64)
    for k in range(L):  # depth of the LCA; 2^k such nodes
        width = 2**k
        counts[0] += width  # (x, x)
        maxleg = L - 1 - k
        for j in range(1, maxleg + 1):  # (x, descendant) both directions
            counts[j] += width * 2.0 * 2**j
        for j1 in range(1, maxleg + 1):  # descendants in different child subtrees
            for j2 in range(1, maxleg + 1):
                counts[j1 + j2] += width * 2.0 * 2 ** (j1 - 1) * 2 ** (j2 - 1)
    return DistanceDistribution(pmf=counts / float(n) ** 2, n=n)


def distance_pgf(dist: DistanceDistribution, x: float) -> float:
    """Probability generating function E(x^D) with the 0^0 = 1 convention."""
    if abs(x) > 1.0:
        raise InvalidParametersError(f"PGF argument |x| <= 1 required, got {x}")
    return float(dist.pgf_grid(np.array([x]))[0])
