"""Drawing referral samples from a population network.

Two regimes: the stationary tree-indexed walk (with replacement, the
analytical model) and the wave-by-wave without-replacement protocol used
in the simulation studies, including preferential recruitment through
edge weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    InvalidParametersError,
    MissingLabelError,
    ReversibilityError,
    SamplingFailedError,
)
from .netmodel import TransitionModel, WeightedGraph
from .referral import ReferralTree
from .seeding import STREAM_WALK, as_rng

SEED_RULES = ("stationary_pi", "uniform", "degree_proportional")


@dataclass(frozen=True, eq=False)
class RdsSample:
    """Per-participant records indexed by referral-tree node.

    ``node[tau]`` is the population node sampled at tree node tau;
    ``degree`` carries the reported number of contacts (the unweighted
    neighbor count even when recruitment is weight-biased).  ``outcome``
    and ``block`` are optional until attached.
    """

    tree: ReferralTree
    node: np.ndarray
    degree: np.ndarray
    outcome: np.ndarray | None = None
    block: np.ndarray | None = None

    def __post_init__(self):
        node = np.asarray(self.node, dtype=np.int64)
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "degree", np.asarray(self.degree, dtype=np.float64))
        if self.outcome is not None:
            object.__setattr__(
                self, "outcome", np.asarray(self.outcome, dtype=np.float64)
            )
        if self.block is not None:
            object.__setattr__(self, "block", np.asarray(self.block, dtype=np.int64))
        n = self.tree.n
        for name in ("node", "degree", "outcome", "block"):
            arr = getattr(self, name)
            if arr is not None and arr.shape[0] != n:
                raise InvalidParametersError(f"{name} must have one entry per tree node")

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def y(self) -> np.ndarray:
        if self.outcome is None:
            raise InvalidParametersError("sample carries no outcome column")
        return self.outcome

    def with_outcome(self, y_population: np.ndarray) -> "RdsSample":
        """Attach outcomes by evaluating a population vector at the sampled nodes."""
        y = np.asarray(y_population, dtype=np.float64)
        return replace(self, outcome=y[self.node])

    def with_outcome_values(self, values: np.ndarray) -> "RdsSample":
        return replace(self, outcome=np.asarray(values, dtype=np.float64))

    def with_blocks(self, z_population: np.ndarray) -> "RdsSample":
        z = np.asarray(z_population, dtype=np.int64)
        return replace(self, block=z[self.node])

    def prefix(self, n: int) -> "RdsSample":
        """First n participants in recruitment order."""
        return RdsSample(
            tree=self.tree.prefix(n),
            node=self.node[:n],
            degree=self.degree[:n],
            outcome=None if self.outcome is None else self.outcome[:n],
            block=None if self.block is None else self.block[:n],
        )


@dataclass(frozen=True)
class WalkConfig:
    """Sampling protocol knobs.

    ``seed_rule`` picks the seed participant: 'stationary_pi' (weighted
    degree), 'degree_proportional' (contact count), 'uniform', or an
    explicit node id for deterministic replays.
    """

    mode: str = "without_replacement"
    offspring_pmf: tuple = ()
    target_n: int = 1
    seed_rule: object = "degree_proportional"
    max_restarts: int = 1000

    def __post_init__(self):
        if self.mode not in ("with_replacement", "without_replacement"):
            raise InvalidParametersError(f"unknown mode {self.mode!r}")
        if self.target_n < 1:
            raise InvalidParametersError("target_n must be >= 1")
        if self.mode == "without_replacement":
            pmf = np.asarray(self.offspring_pmf, dtype=np.float64)
            if pmf.ndim != 1 or pmf.size == 0 or pmf.min() < 0 or abs(pmf.sum() - 1) > 1e-9:
                raise InvalidParametersError("offspring_pmf must be a probability vector")
        if not isinstance(self.seed_rule, (int, np.integer)) and self.seed_rule not in SEED_RULES:
            raise InvalidParametersError(f"unknown seed rule {self.seed_rule!r}")


def _check_irreducible(model: TransitionModel):
    if not model.is_irreducible():
        raise ReversibilityError("transition support is disconnected; walk not irreducible")


def markov_walk(
    tree: ReferralTree,
    model: TransitionModel,
    rng_seed,
    y: np.ndarray | None = None,
    blocks: np.ndarray | None = None,
) -> RdsSample:
    """Stationary tree-indexed walk: root from pi, children from the parent's row.

    Sampling is with replacement.  Node draws are made level by level in
    node order, so a given seed reproduces the same sample exactly.
    """
    _check_irreducible(model)
    rng = as_rng(rng_seed, STREAM_WALK)
    states = _walk_states(tree, model, rng, 1)[0]
    return _package_sample(tree, states, model, y, blocks)


def markov_walk_batch(
    tree: ReferralTree,
    model: TransitionModel,
    replicates: int,
    rng_seed,
) -> np.ndarray:
    """States for many independent walks at once: (replicates, n) matrix.

    Vectorized across replicates for Monte Carlo work; one seed governs
    the whole batch.
    """
    _check_irreducible(model)
    rng = as_rng(rng_seed, STREAM_WALK)
    return _walk_states(tree, model, rng, replicates)


def _walk_states(tree, model, rng, replicates):
    n = tree.n
    N = model.num_states
    cdf = model.transition_cdf()
    pi_cdf = np.cumsum(model.pi)
    states = np.empty((replicates, n), dtype=np.int64)
    # replicate chunking keeps the per-level scratch below ~8M floats
    rows_per = max(1, 8_000_000 // max(N * max(len(lv) for lv in tree.level_nodes()), 1))
    for lo in range(0, replicates, rows_per):
        hi = min(replicates, lo + rows_per)
        block = states[lo:hi]
        m = hi - lo
        block[:, 0] = np.searchsorted(pi_cdf, rng.random(m), side="right")
        for level in tree.level_nodes()[1:]:
            parents = tree.parent[level]
            rows = cdf[block[:, parents]]  # (m, width, N)
            u = rng.random((m, len(level)))
            block[:, level] = (rows < u[..., None]).sum(axis=2)
    return states


def _package_sample(tree, states, model, y, blocks):
    if model.graph is not None:
        degree = model.graph.degrees[states]
    else:
        degree = np.full(tree.n, np.nan)
    sample = RdsSample(tree=tree, node=states, degree=degree)
    if y is not None:
        sample = sample.with_outcome(np.asarray(y, dtype=np.float64))
    if blocks is not None:
        sample = sample.with_blocks(np.asarray(blocks, dtype=np.int64))
    return sample


def _draw_seed(graph: WeightedGraph, rule, rng) -> int:
    if isinstance(rule, (int, np.integer)):
        return int(rule)
    n = graph.num_nodes
    if rule == "uniform":
        return int(rng.integers(n))
    if rule == "stationary_pi":
        w = graph.degrees
    else:  # degree_proportional: reported contact counts
        w = np.diff(graph.weights.indptr).astype(np.float64)
    total = w.sum()
    if total <= 0:
        raise SamplingFailedError("graph has no edges to seed from", 0, 0)
    return int(np.searchsorted(np.cumsum(w / total), rng.random(), side="right"))


def rds_without_replacement(
    graph: WeightedGraph,
    cfg: WalkConfig,
    rng_seed,
    y: np.ndarray | None = None,
    blocks: np.ndarray | None = None,
):
    """Wave-by-wave referral sampling without replacement.

    Each participant draws an offspring count from the configured pmf and
    refers that many not-yet-sampled contacts (all of them if fewer are
    eligible), chosen with probability proportional to edge weight.  On
    extinction before ``target_n`` the whole process restarts with a fresh
    seed, up to ``max_restarts`` times.

    Returns ``(sample, restarts)``; the realized referral tree rides along
    as ``sample.tree``.
    """
    if cfg.mode != "without_replacement":
        raise InvalidParametersError("config mode must be without_replacement")
    target = cfg.target_n
    if target > graph.num_nodes:
        raise InvalidParametersError(
            f"target_n={target} exceeds the {graph.num_nodes}-node graph"
        )
    rng = as_rng(rng_seed, STREAM_WALK)
    pmf = np.asarray(cfg.offspring_pmf, dtype=np.float64)
    offspring_cdf = np.cumsum(pmf)
    indptr = graph.weights.indptr
    indices = graph.weights.indices
    weights = graph.weights.data
    contact_counts = np.diff(indptr)

    restarts = 0
    best = 0
    while restarts <= cfg.max_restarts:
        seed_node = _draw_seed(graph, cfg.seed_rule, rng)
        in_sample = np.zeros(graph.num_nodes, dtype=bool)
        in_sample[seed_node] = True
        nodes = [seed_node]
        parent = [-1]
        frontier = 0
        while len(nodes) < target and frontier < len(nodes):
            who = nodes[frontier]
            want = int(np.searchsorted(offspring_cdf, rng.random(), side="right"))
            if want > 0:
                lo, hi = indptr[who], indptr[who + 1]
                nbrs = indices[lo:hi]
                eligible = nbrs[~in_sample[nbrs]]
                if eligible.size:
                    if want >= eligible.size:
                        chosen = eligible
                    else:
                        w = weights[lo:hi][~in_sample[nbrs]]
                        chosen = rng.choice(
                            eligible, size=want, replace=False, p=w / w.sum()
                        )
                    for c in chosen:
                        if len(nodes) >= target:
                            break
                        in_sample[c] = True
                        nodes.append(int(c))
                        parent.append(frontier)
            frontier += 1
        if len(nodes) >= target:
            tree = ReferralTree(np.asarray(parent, dtype=np.int64))
            states = np.asarray(nodes, dtype=np.int64)
            sample = RdsSample(
                tree=tree, node=states, degree=contact_counts[states].astype(np.float64)
            )
            if y is not None:
                sample = sample.with_outcome(np.asarray(y, dtype=np.float64))
            if blocks is not None:
                sample = sample.with_blocks(np.asarray(blocks, dtype=np.int64))
            return sample, restarts
        best = max(best, len(nodes))
        restarts += 1
    raise SamplingFailedError(
        f"referral process died before {target} participants in all "
        f"{cfg.max_restarts + 1} attempts (best {best})",
        restarts=cfg.max_restarts,
        reached=best,
    )


def referral_counts(sample: RdsSample, K: int) -> np.ndarray:
    """Block-to-block referral frequencies over the tree edges, divided by n.

    Entry (u, v) counts tree edges whose parent is labeled u and child
    labeled v; the divisor is the number of participants n, not the edge
    count n - 1.
    """
    if sample.block is None:
        raise MissingLabelError("sample has no block labels")
    z = sample.block
    if z.min() < 0 or z.max() >= K:
        raise MissingLabelError(f"block labels must lie in 0..{K - 1}")
    n = sample.n
    Q = np.zeros((K, K), dtype=np.float64)
    if n > 1:
        parents = sample.tree.parent[1:]
        np.add.at(Q, (z[parents], z[1:]), 1.0)
    return Q / n
