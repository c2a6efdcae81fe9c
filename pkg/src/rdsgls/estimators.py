"""Point estimators for the stationary mean of a referral sample.

Ranges from the plain sample mean through degree-weighted estimators to
feasible GLS: covariances estimated from the sample itself, either via a
blockmodel plug-in over observed labels or via single-geometric-term fits
to lag statistics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covariance import (
    AutoCovariance,
    CovarianceMatrix,
    build_sigma,
    gls_solve,
)
from .diagnostics import ranktwo_rse_value
from .errors import (
    InsufficientDepthError,
    InvalidParametersError,
    InvalidSampleError,
    MissingLabelError,
    SingularCovarianceError,
)
from .netmodel import SpectralDecomp, _fix_signs, _spectral_order, beta_coefficients
from .sampler import RdsSample, referral_counts

EIGENVALUE_CLAMP = 0.999
AUTO_GRID_POINTS = 401


@dataclass(frozen=True, eq=False)
class EstimateReport:
    """One estimator's output plus the covariance ingredients it used."""

    estimator: str
    mu_hat: float
    eigenvalues: tuple = ()
    beta2: tuple = ()
    nugget: float = 0.0
    rse: float | None = None
    weights: np.ndarray | None = None
    n: int = 0
    K: int | None = None
    warnings: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            object.__setattr__(self, "weights", w)
            if abs(w.sum() - 1.0) > 1e-10:
                raise InvalidParametersError("report weights must sum to one")

    def to_dict(self) -> dict:
        """JSON-facing view (weights omitted)."""
        return {
            "estimator": self.estimator,
            "mu_hat": self.mu_hat,
            "eigenvalues": list(self.eigenvalues),
            "beta2": list(self.beta2),
            "nugget": self.nugget,
            "rse": self.rse,
            "n": self.n,
            "K": self.K,
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True)
class LagStatistics:
    """Sample moments over node pairs at tree distances 0, 1, 2.

    ``gamma0``/``gamma1`` are centered cross-products around the supplied
    center; ``delta1``/``delta2`` are mean squared differences, which need
    no center.  Pair sets are ordered, so ``counts[1] == 2 (n - 1)``.
    """

    gamma0: float
    gamma1: float
    delta1: float
    delta2: float
    counts: dict


def _single_node_report(name: str, sample: RdsSample) -> EstimateReport:
    return EstimateReport(
        estimator=name,
        mu_hat=float(sample.y[0]),
        weights=np.ones(1),
        n=1,
        warnings=("single-node sample",),
    )


def mean_estimator(sample: RdsSample) -> EstimateReport:
    """Unweighted sample average."""
    Y = sample.y
    n = sample.n
    return EstimateReport(
        estimator="mean",
        mu_hat=float(Y.mean()),
        weights=np.full(n, 1.0 / n),
        n=n,
    )


def vh_estimator(sample: RdsSample) -> EstimateReport:
    """Degree-weighted mean normalized by the harmonic mean of reported degrees."""
    Y = sample.y
    deg = sample.degree
    if np.any(~np.isfinite(deg)) or np.any(deg <= 0):
        raise InvalidSampleError("reported degrees must be positive")
    inv = 1.0 / deg
    weights = inv / inv.sum()
    return EstimateReport(
        estimator="vh",
        mu_hat=float(weights @ Y),
        weights=weights,
        n=sample.n,
    )


def lag_statistics(sample: RdsSample, m: float) -> LagStatistics:
    """Centered products at lags 0-1 and squared differences at lags 1-2."""
    Y = sample.y
    n = sample.n
    if n < 3:
        raise InsufficientDepthError("lag-2 statistics need at least 3 nodes")
    tree = sample.tree
    parents = tree.parent[1:]
    kids = np.arange(1, n)
    resid = Y - m

    gamma0 = float(np.mean(resid**2))
    prod1 = resid[parents] * resid[kids]
    gamma1 = float(prod1.mean())
    delta1 = float(np.mean((Y[parents] - Y[kids]) ** 2))

    # distance-2 pairs: grandparent-grandchild plus siblings
    deep = kids[parents > 0]
    gp = tree.parent[parents[parents > 0]]
    gp_sq = np.sum((Y[deep] - Y[gp]) ** 2)
    gp_count = deep.size

    sib_sq = 0.0
    sib_count = 0
    for kid_list in tree.children:
        c = len(kid_list)
        if c >= 2:
            yk = Y[kid_list]
            sib_sq += 2.0 * (c * np.sum(yk**2) - np.sum(yk) ** 2)
            sib_count += c * (c - 1)
    d2_count = 2 * gp_count + sib_count
    if d2_count == 0:
        raise InsufficientDepthError("tree has no node pairs at distance 2")
    delta2 = float((2.0 * gp_sq + sib_sq) / d2_count)
    return LagStatistics(
        gamma0=gamma0,
        gamma1=gamma1,
        delta1=delta1,
        delta2=delta2,
        counts={0: n, 1: 2 * (n - 1), 2: d2_count},
    )


def _clamp(lam: float) -> float:
    return float(np.clip(lam, -EIGENVALUE_CLAMP, EIGENVALUE_CLAMP))


def _ranktwo_gls(tree, lam: float, Y: np.ndarray):
    """Estimate and weights for a single-term covariance via the sparse inverse.

    The solve of Sigma x = 1 has the O(n) closed form proportional to
    1 - lam (deg - 1); the scale drops out of the normalized weights.
    """
    x = 1.0 - lam * (tree.degrees - 1.0)
    total = x.sum()
    weights = x / total
    return float(weights @ Y), weights


def auto_fgls(sample: RdsSample) -> EstimateReport:
    """Single-term feasible GLS from the lag-1 autocorrelation.

    Scans a grid of centering values m, fits (beta2, lambda) from the
    centered lag statistics, runs GLS under that covariance, and keeps the
    m whose estimate is closest to itself (a relaxed fixed point).
    """
    Y = sample.y
    n = sample.n
    if n == 1:
        return _single_node_report("auto", sample)
    if np.all(Y == Y[0]):
        return EstimateReport(
            estimator="auto",
            mu_hat=float(Y[0]),
            weights=np.full(n, 1.0 / n),
            n=n,
            warnings=("constant outcome; returned the constant",),
        )
    tree = sample.tree
    parents = tree.parent[1:]
    kids = np.arange(1, n)
    grid = np.linspace(Y.min(), Y.max(), AUTO_GRID_POINTS)

    # gamma0(m) and gamma1(m) are quadratics in m
    sy2 = np.mean(Y**2)
    sy = np.mean(Y)
    g0 = sy2 - 2.0 * grid * sy + grid**2
    e_prod = np.mean(Y[parents] * Y[kids])
    e_sum = np.mean(Y[parents] + Y[kids])
    g1 = e_prod - grid * e_sum + grid**2

    lam = np.clip(g1 / g0, -EIGENVALUE_CLAMP, EIGENVALUE_CLAMP)
    X = 1.0 - lam[:, None] * (tree.degrees - 1.0)[None, :]
    mu = (X @ Y) / X.sum(axis=1)
    gap = np.abs(mu - grid)
    ok = np.isfinite(gap)
    if not ok.any():
        rep = mean_estimator(sample)
        return EstimateReport(
            estimator="auto",
            mu_hat=rep.mu_hat,
            weights=rep.weights,
            n=n,
            warnings=("grid search failed; fell back to the sample mean",),
        )
    gap[~ok] = np.inf
    best = int(np.argmin(gap))
    lam_best = float(lam[best])
    beta2_best = float(g0[best])
    mu_best, weights = _ranktwo_gls(tree, lam_best, Y)
    return EstimateReport(
        estimator="auto",
        mu_hat=mu_best,
        eigenvalues=(lam_best,),
        beta2=(beta2_best,),
        rse=ranktwo_rse_value(tree, lam_best),
        weights=weights,
        n=n,
    )


def delta_fgls(sample: RdsSample) -> EstimateReport:
    """Single-term feasible GLS from squared differences at lags 1 and 2.

    Needs no centering: the lag ratio of mean squared differences
    identifies lambda, and the overall scale cancels in the GLS weights.
    The denominator carries a 1/sqrt(n) smoothing term.
    """
    Y = sample.y
    n = sample.n
    if n == 1:
        return _single_node_report("delta", sample)
    stats = lag_statistics(sample, 0.0)
    lam = _clamp((stats.delta2 - stats.delta1) / (stats.delta1 + n**-0.5))
    mu, weights = _ranktwo_gls(sample.tree, lam, Y)
    return EstimateReport(
        estimator="delta",
        mu_hat=mu,
        eigenvalues=(lam,),
        rse=ranktwo_rse_value(sample.tree, lam),
        weights=weights,
        n=n,
    )


def qhat_spectrum(qhat: np.ndarray):
    """Steps shared by every blockmodel plug-in: symmetrize, normalize, decompose.

    Returns ``(eigenvalues, U, D)`` with the leading eigenvalue first and
    D the row sums of the symmetrized matrix.  The input scale is
    irrelevant: only relative referral frequencies matter.
    """
    qhat = np.asarray(qhat, dtype=np.float64)
    if qhat.ndim != 2 or qhat.shape[0] != qhat.shape[1]:
        raise InvalidParametersError("referral matrix must be square")
    if qhat.sum() <= 0:
        raise InvalidParametersError("referral matrix has no mass")
    sym = 0.5 * (qhat + qhat.T)
    D = sym.sum(axis=1)
    if D.min() <= 0:
        raise MissingLabelError("a block has no referrals in or out")
    inv_sqrt = 1.0 / np.sqrt(D)
    QL = inv_sqrt[:, None] * sym * inv_sqrt[None, :]
    vals, U = np.linalg.eigh(0.5 * (QL + QL.T))
    order = _spectral_order(vals)
    return vals[order], _fix_signs(U[:, order]), D


def sbm_fgls(
    sample: RdsSample,
    labels: np.ndarray | None = None,
    K: int | None = None,
    *,
    qhat: np.ndarray | None = None,
) -> EstimateReport:
    """Blockmodel feasible GLS over an observed partition.

    Pipeline: referral frequencies between blocks -> symmetrized,
    degree-normalized spectrum -> per-node eigenfunctions -> spectral
    loadings of the outcome -> plug-in autocovariance -> covariance with
    the outcome's sample variance as a diagonal regularizer -> GLS.

    Blocks never visited by the sample are dropped (with a warning);
    eigenvalues are clamped to +/-0.999 before the covariance build so the
    solve stays definite.  ``qhat`` overrides the counting step for
    verification work.
    """
    Y = sample.y
    n = sample.n
    if labels is None:
        if sample.block is None:
            raise MissingLabelError("sample has no block labels")
        labels = sample.block
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != n:
        raise InvalidParametersError("labels must cover every sampled node")
    if n == 1:
        return _single_node_report("sbm", sample)

    notes = []
    if K is None:
        K = int(labels.max()) + 1
    present = np.unique(labels)
    if present.min() < 0 or present.max() >= K:
        raise MissingLabelError(f"labels must lie in 0..{K - 1}")
    if present.size < K:
        dropped = sorted(set(range(K)) - set(present.tolist()))
        notes.append(f"dropped blocks with no visits: {dropped}")
    z = np.searchsorted(present, labels)
    k_eff = present.size

    if qhat is None:
        relabeled = RdsSample(
            tree=sample.tree, node=sample.node, degree=sample.degree,
            outcome=sample.outcome, block=z,
        )
        qhat = referral_counts(relabeled, k_eff)
    qhat = np.asarray(qhat, dtype=np.float64)
    # pin the count scale so injected matrices behave like real frequencies
    qhat = qhat * ((n - 1) / n / qhat.sum())

    vals, U, D = qhat_spectrum(qhat)
    f_hat = U[z] / np.sqrt(D)[z][:, None]
    beta_hat = f_hat.T @ Y / n
    # the leading eigenvalue is 1 by construction and stays: its constant
    # spectral term shifts the covariance by a multiple of the all-ones
    # matrix, which leaves the GLS weights untouched; clamping the rest
    # keeps the solve definite
    lam_clamped = np.clip(vals, -EIGENVALUE_CLAMP, EIGENVALUE_CLAMP)
    lam_clamped[0] = min(vals[0], 1.0)

    s2 = float(Y.var(ddof=1))
    dist = sample.tree.distance_matrix()
    d = np.arange(int(dist.max()) + 1)
    table = (beta_hat**2)[:, None] * np.power(lam_clamped[:, None], d[None, :])
    gamma_table = table.sum(axis=0)
    matrix = gamma_table[dist].copy()
    matrix[np.diag_indices(n)] += s2
    sigma = CovarianceMatrix(matrix=matrix, tree=sample.tree)
    try:
        result = gls_solve(sigma, Y)
        mu = result.estimate
        weights = result.weights
        rse = float(np.sqrt(result.variance / (matrix.sum() / n)))
    except SingularCovarianceError:
        notes.append("estimated covariance was singular; fell back to the sample mean")
        mu = float(Y.mean())
        weights = np.full(n, 1.0 / n)
        rse = None
    return EstimateReport(
        estimator="sbm",
        mu_hat=mu,
        eigenvalues=tuple(lam_clamped[1:]),
        beta2=tuple(beta_hat[1:] ** 2),
        nugget=s2,
        rse=rse,
        weights=weights,
        n=n,
        K=k_eff,
        warnings=tuple(notes),
    )


def fgls_reweight(
    sample: RdsSample,
    labels: np.ndarray | None = None,
    K: int | None = None,
) -> RdsSample:
    """Replace outcomes with sampling-weight-adjusted ones.

    The normalizing constant (the stationary mean of 1/degree) is itself
    estimated by the blockmodel GLS on the inverse degrees; if that
    estimate is not positive the plain harmonic mean takes over.
    """
    deg = sample.degree
    if np.any(~np.isfinite(deg)) or np.any(deg <= 0):
        raise InvalidSampleError("reported degrees must be positive")
    inv = 1.0 / deg
    h_inv = sbm_fgls(sample.with_outcome_values(inv), labels, K).mu_hat
    if not np.isfinite(h_inv) or h_inv <= 0:
        warnings.warn(
            "GLS estimate of the inverse-degree mean was not positive; "
            "using the harmonic mean instead",
            RuntimeWarning,
            stacklevel=2,
        )
        h_inv = float(inv.mean())
    return sample.with_outcome_values(sample.y / (h_inv * deg))


def oracle_gls(sample: RdsSample, spec: SpectralDecomp, y: np.ndarray) -> EstimateReport:
    """GLS under the exact walk covariance (simulation-only reference).

    Builds the true autocovariance from the population spectrum and the
    outcome's spectral loadings, then solves the same system the feasible
    estimators approximate.
    """
    n = sample.n
    Y = np.asarray(y, dtype=np.float64)[sample.node]
    beta = beta_coefficients(y, spec)
    ac = AutoCovariance.from_spectrum(beta, spec.eigenvalues)
    if n == 1:
        return _single_node_report("oracle_gls", sample.with_outcome_values(Y))
    sigma = build_sigma(sample.tree, ac)
    try:
        result = gls_solve(sigma, Y)
        mu = result.estimate
        weights = result.weights
        rse = float(np.sqrt(result.variance / (sigma.matrix.sum() / n)))
        notes = ()
    except SingularCovarianceError:
        mu = float(Y.mean())
        weights = np.full(n, 1.0 / n)
        rse = None
        notes = ("exact covariance singular (outcome spectrally flat); used the mean",)
    return EstimateReport(
        estimator="oracle_gls",
        mu_hat=mu,
        eigenvalues=tuple(lam for _, lam in ac.terms),
        beta2=tuple(b2 for b2, _ in ac.terms),
        rse=rse,
        weights=weights,
        n=n,
        warnings=notes,
    )
