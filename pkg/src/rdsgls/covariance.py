"""Covariance algebra for tree-indexed samples.

The autocovariance of a stationary tree walk depends only on tree distance
and decomposes over the walk spectrum.  This module builds the dense
covariance, exploits the sparse closed-form inverse available in the
single-geometric-term case, solves the generalized least squares system,
and carries the chain estimator whose variance certifies the 1/n rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    InvalidParametersError,
    ReducedSystemError,
    SingularCovarianceError,
)
from .referral import ReferralTree
from .sampler import RdsSample

LEADING_EIGENVALUE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AutoCovariance:
    """Distance autocovariance: sum of squared-loading geometric terms.

    ``gamma(d) = sum_l beta2_l * lam_l**d`` for d >= 1, with the nugget
    added at lag zero only.
    """

    terms: tuple
    nugget: float = 0.0

    def __post_init__(self):
        terms = tuple((float(b2), float(lam)) for b2, lam in self.terms)
        object.__setattr__(self, "terms", terms)
        for b2, lam in terms:
            if b2 < 0:
                raise InvalidParametersError("squared loadings must be >= 0")
            if abs(lam) >= 1:
                raise SingularCovarianceError(f"|lambda| = {abs(lam)} >= 1")
        if self.nugget < 0:
            raise InvalidParametersError("nugget must be >= 0")

    @classmethod
    def from_spectrum(cls, beta: np.ndarray, eigenvalues: np.ndarray, nugget=0.0):
        """Drop the leading (constant-function) term; keep the rest.

        Requires every retained eigenvalue to satisfy |lambda| < 1 unless
        its loading vanishes.
        """
        beta = np.asarray(beta, dtype=np.float64)
        eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
        terms = []
        for l in range(1, len(eigenvalues)):
            b2 = beta[l] ** 2
            lam = eigenvalues[l]
            if abs(lam) >= 1.0 - LEADING_EIGENVALUE_TOL:
                if b2 > 1e-20:
                    raise SingularCovarianceError(
                        f"non-leading eigenvalue {lam} has unit modulus"
                    )
                continue
            terms.append((b2, lam))
        return cls(terms=tuple(terms), nugget=nugget)

    def gamma(self, d: int) -> float:
        return gamma_eval(self, d)

    def gamma_table(self, max_d: int) -> np.ndarray:
        """gamma evaluated on 0..max_d at once."""
        d = np.arange(max_d + 1)
        out = np.zeros(max_d + 1)
        for b2, lam in self.terms:
            if lam == 0.0:
                out[0] += b2
            else:
                out += b2 * np.power(lam, d)
        out[0] += self.nugget
        return out

    def max_abs_eigenvalue(self) -> float:
        return max((abs(lam) for _, lam in self.terms), default=0.0)


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    """Dense covariance over tree nodes, tied to the tree it came from."""

    matrix: np.ndarray
    tree: ReferralTree

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        if m.shape != (self.tree.n, self.tree.n):
            raise InvalidParametersError("covariance shape must match the tree")
        if np.max(np.abs(m - m.T)) > 0:
            raise InvalidParametersError("covariance must be exactly symmetric")

    @property
    def n(self) -> int:
        return self.tree.n


@dataclass(frozen=True, eq=False)
class GlsResult:
    """Minimum-variance unbiased weighting of correlated observations."""

    estimate: float
    weights: np.ndarray
    variance: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if abs(w.sum() - 1.0) > 1e-10:
            raise InvalidParametersError("GLS weights must sum to one")
        if not self.variance > 0:
            raise SingularCovarianceError("GLS variance must be positive")


def gamma_eval(ac: AutoCovariance, d: int) -> float:
    """Autocovariance at integer lag d (0^0 = 1)."""
    if d < 0:
        raise InvalidParametersError("lag must be nonnegative")
    total = 0.0
    for b2, lam in ac.terms:
        total += b2 * (1.0 if d == 0 else lam**d)
    if d == 0:
        total += ac.nugget
    return total


def build_sigma(tree: ReferralTree, ac: AutoCovariance) -> CovarianceMatrix:
    """Dense covariance: entry (s, t) is gamma evaluated at their tree distance."""
    dist = tree.distance_matrix()
    table = ac.gamma_table(int(dist.max()))
    return CovarianceMatrix(matrix=table[dist], tree=tree)


def _check_ranktwo_args(beta2: float, lam: float):
    if beta2 <= 0:
        raise InvalidParametersError("beta2 must be positive")
    if abs(lam) >= 1:
        raise SingularCovarianceError(f"|lambda| = {abs(lam)} >= 1: covariance singular")


def ranktwo_inverse_apply(
    tree: ReferralTree, beta2: float, lam: float, v: np.ndarray
) -> np.ndarray:
    """Apply the closed-form sparse inverse of a single-term covariance.

    The inverse has diagonal 1 + lam^2 (deg - 1), off-diagonal -lam on tree
    edges, zero elsewhere, all over beta2 (1 - lam^2); O(n) per apply.
    """
    _check_ranktwo_args(beta2, lam)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != tree.n:
        raise InvalidParametersError("vector length must match the tree")
    deg = tree.degrees
    out = (1.0 + lam * lam * (deg - 1.0)) * v
    if tree.n > 1:
        parents = tree.parent[1:]
        kids = np.arange(1, tree.n)
        np.add.at(out, parents, -lam * v[kids])
        out[kids] -= lam * v[parents]
    return out / (beta2 * (1.0 - lam * lam))


def ranktwo_solve_ones(tree: ReferralTree, beta2: float, lam: float) -> np.ndarray:
    """Closed-form solution x of Sigma x = 1 for a single-term covariance."""
    _check_ranktwo_args(beta2, lam)
    return (1.0 - lam * (tree.degrees - 1.0)) / (beta2 * (1.0 + lam))


def one_sigma_inv_one_ranktwo(n: int, beta2: float, lam: float) -> float:
    """1' Sigma^{-1} 1 for a single-term covariance on any n-node tree.

    Topology drops out because tree degrees always sum to 2(n - 1).
    """
    if n < 1:
        raise InvalidParametersError("n must be >= 1")
    if beta2 <= 0:
        raise InvalidParametersError("beta2 must be positive")
    if lam == -1.0 or abs(lam) > 1:
        raise SingularCovarianceError(f"lambda = {lam} outside (-1, 1)")
    return n * (1.0 - lam * (1.0 - 2.0 / n)) / (beta2 * (1.0 + lam))


def gls_solve(sigma: CovarianceMatrix, Y: np.ndarray) -> GlsResult:
    """Solve the unit-sum minimum-variance weighting via Cholesky.

    Scale-invariant in Sigma up to the variance field: c Sigma yields the
    same weights and estimate with variance scaled by c.
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape[0] != sigma.n:
        raise InvalidParametersError("outcome length must match covariance size")
    try:
        chol = scipy.linalg.cho_factor(sigma.matrix, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "covariance is not positive definite; add a diagonal nugget"
        ) from exc
    x = scipy.linalg.cho_solve(chol, np.ones(sigma.n), check_finite=False)
    total = x.sum()
    if not total > 0:
        raise SingularCovarianceError("1' Sigma^{-1} 1 must be positive")
    weights = x / total
    return GlsResult(estimate=float(weights @ Y), weights=weights, variance=1.0 / total)


def theorem2_limit(lam: float, beta2: float) -> float:
    """Large-n limit of n times the GLS variance under one geometric term."""
    if abs(lam) >= 1:
        raise SingularCovarianceError(f"|lambda| = {abs(lam)} >= 1")
    return beta2 * (1.0 + lam) / (1.0 - lam)


def critical_threshold(lam2: float) -> float:
    """Referral growth rate above which the sample mean loses the 1/n rate."""
    if lam2 == 0:
        return float("inf")
    return 1.0 / (lam2 * lam2)


def vandermonde_weights(eigenvalues: np.ndarray) -> np.ndarray:
    """Coefficients killing all non-leading spectral terms along a chain.

    Solves sum_a g_a lam_l^{a-1} = [l == 1] over the given eigenvalues,
    which must start with 1 and be pairwise distinct.
    """
    lams = np.asarray(eigenvalues, dtype=np.float64)
    K = lams.shape[0]
    if K < 1 or abs(lams[0] - 1.0) > 1e-12:
        raise InvalidParametersError("eigenvalues must start with the leading value 1")
    diffs = np.abs(lams[:, None] - lams[None, :]) + np.eye(K)
    if diffs.min() < 1e-12:
        raise ReducedSystemError(
            "repeated eigenvalues: reduced Vandermonde systems are unsupported"
        )
    V = np.power(lams[:, None], np.arange(K)[None, :])
    rhs = np.zeros(K)
    rhs[0] = 1.0
    return np.linalg.solve(V, rhs)


def vandermonde_estimator(sample: RdsSample, eigenvalues: np.ndarray) -> float:
    """Chain average over disjoint root-to-leaf runs on a complete binary tree.

    Takes one length-K run downward from every node K - 1 levels above the
    leaves (always descending to the first child), weights the K outcomes
    by the Vandermonde coefficients, and averages across runs.
    """
    lams = np.asarray(eigenvalues, dtype=np.float64)
    K = lams.shape[0]
    gamma = vandermonde_weights(lams)
    tree = sample.tree
    n = tree.n
    H = tree.num_levels
    heap_parents = (np.arange(1, n) - 1) // 2
    if n != 2**H - 1 or not np.array_equal(tree.parent[1:], heap_parents):
        raise InvalidParametersError("chain estimator requires a complete binary tree")
    if H < K:
        raise InvalidParametersError(f"tree has {H} levels, need at least {K}")
    Y = sample.y
    starts = np.arange(2 ** (H - K) - 1, 2 ** (H - K + 1) - 1, dtype=np.int64)
    # descending always to the first child: v -> 2v + 1 under heap numbering
    runs = np.zeros(len(starts))
    node = starts
    for a in range(K):
        runs += gamma[a] * Y[node]
        node = 2 * node + 1
    return float(runs.mean())
