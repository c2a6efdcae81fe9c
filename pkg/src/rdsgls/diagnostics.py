"""Variance-reduction diagnostics computable from a single sample.

The headline quantity is the ratio of plug-in standard errors between the
GLS estimator and the plain mean, both under the same estimated
covariance.  Under a single geometric term the ratio collapses to a
function of the estimated eigenvalue alone, giving a reference curve
every estimator's point can be compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .covariance import AutoCovariance, CovarianceMatrix, one_sigma_inv_one_ranktwo
from .errors import InvalidParametersError, SingularCovarianceError
from .referral import ReferralTree, tree_distance_distribution

RSE_VARIANTS = ("as_printed", "mean_variance")
GREY_LINE_GRID = np.linspace(-0.9, 0.9, 181)


@dataclass(frozen=True)
class DiagnosticPoint:
    """One estimator's (estimated eigenvalue, RSE) pair."""

    estimator: str
    lambda_hat: float
    rse: float
    n: int

    def __post_init__(self):
        if not self.rse > 0:
            raise InvalidParametersError("RSE must be positive")


@dataclass(frozen=True)
class JensenResult:
    """Outcome of the one-term-lower-bound check on a quadratic form.

    ``lambda_auto`` is the lag-1 autocorrelation of the input covariance;
    the inequality branch compares the total covariance mass against the
    single-term surrogate built from that autocorrelation.
    """

    lambda_auto: float
    lambda_max_abs: float
    magnitude_ok: bool
    inequality_checked: bool
    inequality_holds: bool | None
    lhs: float
    rhs: float


def rse(sigma_hat: CovarianceMatrix, variant: str = "as_printed") -> float:
    """Ratio of plug-in standard errors: GLS over sample mean.

    ``as_printed`` divides the GLS variance by the total covariance mass
    over n; ``mean_variance`` divides by mass over n^2 (the actual
    variance of the sample mean), which restores RSE = 1 on the identity.
    """
    if variant not in RSE_VARIANTS:
        raise InvalidParametersError(f"unknown RSE variant {variant!r}")
    m = sigma_hat.matrix
    n = sigma_hat.n
    try:
        chol = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise SingularCovarianceError(
            "covariance is not positive definite; add a diagonal nugget"
        ) from exc
    x = scipy.linalg.cho_solve(chol, np.ones(n), check_finite=False)
    gls_var = 1.0 / x.sum()
    mass = m.sum()
    denom = mass / n if variant == "as_printed" else mass / n**2
    return float(np.sqrt(gls_var / denom))


def ranktwo_rse_curve(
    tree: ReferralTree,
    lambda_grid: np.ndarray,
    variant: str = "as_printed",
) -> np.ndarray:
    """RSE as a function of the eigenvalue under a single geometric term.

    The loading scale cancels between numerator and denominator, so the
    curve depends only on the eigenvalue and the tree's exact distance
    distribution.
    """
    if variant not in RSE_VARIANTS:
        raise InvalidParametersError(f"unknown RSE variant {variant!r}")
    grid = np.asarray(lambda_grid, dtype=np.float64)
    if np.any(np.abs(grid) >= 1):
        raise SingularCovarianceError("grey-line eigenvalues must satisfy |lambda| < 1")
    n = tree.n
    dist = tree_distance_distribution(tree)
    pgf = dist.pgf_grid(grid)
    gls_var = np.array(
        [1.0 / one_sigma_inv_one_ranktwo(n, 1.0, lam) for lam in grid]
    )
    # total mass of the unit-loading covariance is n^2 G(lambda)
    denom = n * pgf if variant == "as_printed" else pgf
    return np.sqrt(gls_var / denom)


def ranktwo_rse_value(tree: ReferralTree, lam: float, variant: str = "as_printed") -> float:
    """Single point of the single-term RSE curve."""
    return float(ranktwo_rse_curve(tree, np.array([lam]), variant)[0])


def jensen_check(gamma: AutoCovariance, tree: ReferralTree) -> JensenResult:
    """Compare covariance mass against its single-term surrogate.

    The surrogate replaces the full spectrum by one geometric term at the
    lag-1 autocorrelation.  With a nonnegative spectrum the surrogate
    never exceeds the true mass (convexity of the distance PGF), with
    equality exactly in the single-term case.  The magnitude bound
    |lambda_auto| <= max |lambda_l| is checked regardless of sign.
    """
    g0 = gamma.gamma(0)
    g1 = gamma.gamma(1)
    if g0 <= 0:
        raise InvalidParametersError("gamma(0) must be positive")
    lambda_auto = g1 / g0
    lam_max = gamma.max_abs_eigenvalue()
    magnitude_ok = abs(lambda_auto) <= lam_max + 1e-12

    dist = tree_distance_distribution(tree)
    n = tree.n
    spectral_ok = all(lam >= 0 for _, lam in gamma.terms)
    lhs = n * float(gamma.nugget)
    for b2, lam in gamma.terms:
        lhs += n * n * b2 * dist.pgf(lam)
    rhs = n * n * g0 * dist.pgf(lambda_auto)
    if spectral_ok:
        holds = bool(lhs >= rhs - 1e-9 * max(1.0, abs(lhs)))
    else:
        holds = None
    return JensenResult(
        lambda_auto=float(lambda_auto),
        lambda_max_abs=float(lam_max),
        magnitude_ok=bool(magnitude_ok),
        inequality_checked=spectral_ok,
        inequality_holds=holds,
        lhs=float(lhs),
        rhs=float(rhs),
    )
