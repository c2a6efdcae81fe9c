"""Monte Carlo experiment harness.

Reproduces the study designs at desk scale: exact variance-ratio tables
for the two-group chain on complete binary trees, replicated RMSE
comparisons across estimators on blockmodel or file-loaded networks, and
single-sample diagnostic datasets.
"""

from __future__ import annotations

import multiprocessing
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .covariance import one_sigma_inv_one_ranktwo
from .diagnostics import GREY_LINE_GRID, DiagnosticPoint, ranktwo_rse_curve
from .errors import InvalidParametersError, SamplingFailedError
from .estimators import (
    EstimateReport,
    auto_fgls,
    delta_fgls,
    fgls_reweight,
    mean_estimator,
    sbm_fgls,
    vh_estimator,
)
from .netmodel import DcSbmParams, WeightedGraph, dcsbm_sample
from .presets import (
    outcome_bernoulli,
    outcome_block_bernoulli,
    outcome_block_values,
)
from .referral import complete_binary_distance_distribution
from .sampler import RdsSample, WalkConfig, rds_without_replacement
from .seeding import STREAM_OUTCOME, as_rng

ESTIMATOR_NAMES = ("mean", "vh", "auto", "delta", "sbm_y", "sbm_z")

# two-group chain facts: staying probability p gives eigenvalue 2p - 1,
# and a balanced 0/1 outcome has squared loading 1/4
TWO_GROUP_BETA2 = 0.25


@dataclass(frozen=True)
class OutcomeSpec:
    """How to synthesize one outcome column on the population.

    kinds: ``block_values`` (deterministic per block), ``block_bernoulli``
    (per-block rates), ``bernoulli`` (one global rate), ``column`` (taken
    from a loaded attribute column).
    """

    kind: str
    values: tuple = ()

    def realize(self, z: np.ndarray, rng) -> np.ndarray:
        if self.kind == "block_values":
            return outcome_block_values(z, self.values)
        if self.kind == "block_bernoulli":
            return outcome_block_bernoulli(z, self.values, rng)
        if self.kind == "bernoulli":
            return outcome_bernoulli(len(z), self.values[0], rng)
        raise InvalidParametersError(f"cannot realize outcome kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a replicated RMSE run needs; exactly one network source."""

    outcomes: dict
    walk: WalkConfig
    estimators: tuple
    sizes: tuple
    replicates: int
    base_seed: int
    dcsbm: DcSbmParams | None = None
    graph: WeightedGraph | None = None
    graph_blocks: np.ndarray | None = None
    graph_outcomes: dict = field(default_factory=dict)
    preferential_weight: float = 1.0
    jobs: int = 1

    def __post_init__(self):
        if (self.dcsbm is None) == (self.graph is None):
            raise InvalidParametersError("provide exactly one of dcsbm or graph")
        if self.replicates < 1:
            raise InvalidParametersError("replicates must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise InvalidParametersError(f"unknown estimators: {sorted(unknown)}")
        if self.walk.target_n < max(self.sizes):
            raise InvalidParametersError("walk target_n must cover the largest size")


@dataclass(frozen=True)
class RmseRow:
    estimator: str
    n: int
    outcome: str
    rmse: float
    bias: float
    sd: float
    replicates: int
    failures: int


@dataclass(frozen=True)
class RmseTable:
    rows: tuple
    mu_true: dict

    def to_csv_rows(self):
        for r in self.rows:
            yield (r.estimator, r.n, r.outcome, r.rmse, r.bias, r.sd, r.replicates, r.failures)


def figure1_ratio(p_values, levels) -> list:
    """Exact GLS-to-mean variance ratios for the two-group chain.

    One row per (staying probability, tree size): the GLS variance comes
    from the closed-form quadratic form, the mean's variance from the
    distance PGF of the complete binary tree.  Ratios below one mean GLS
    wins; past the growth threshold the mean's variance stops decaying
    and the ratio falls toward zero.
    """
    rows = []
    for L in levels:
        dist = complete_binary_distance_distribution(L)
        n = dist.n
        for p in p_values:
            if not 0.5 < p < 1:
                raise InvalidParametersError("p must lie in (1/2, 1)")
            lam = 2.0 * p - 1.0
            var_gls = 1.0 / one_sigma_inv_one_ranktwo(n, TWO_GROUP_BETA2, lam)
            var_mean = TWO_GROUP_BETA2 * dist.pgf(lam)
            rows.append(
                {
                    "p": p,
                    "levels": L,
                    "n": n,
                    "var_gls": var_gls,
                    "var_mean": var_mean,
                    "ratio": var_gls / var_mean,
                }
            )
    return rows


def _encode_outcome_blocks(values: np.ndarray) -> np.ndarray:
    uniq = np.unique(values)
    if uniq.size > 32:
        raise InvalidParametersError(
            "outcome takes too many distinct values to define blocks"
        )
    return np.searchsorted(uniq, values)


def apply_estimator(name: str, sample: RdsSample) -> EstimateReport:
    """Run one named estimator with its reweighting policy.

    The single-term estimators work on degree-weighted outcomes with the
    plain harmonic-mean normalizer; the blockmodel estimators estimate
    the normalizer itself by GLS before reweighting.  ``sbm_y`` builds
    blocks from the observed outcome values, ``sbm_z`` uses the sample's
    block labels.
    """
    if name == "mean":
        return mean_estimator(sample)
    if name == "vh":
        return vh_estimator(sample)
    if name in ("auto", "delta"):
        inv = 1.0 / sample.degree
        reweighted = sample.with_outcome_values(sample.y / (inv.mean() * sample.degree))
        return auto_fgls(reweighted) if name == "auto" else delta_fgls(reweighted)
    if name == "sbm_y":
        labels = _encode_outcome_blocks(sample.y)
        return sbm_fgls(fgls_reweight(sample, labels), labels)
    if name == "sbm_z":
        labels = sample.block
        return sbm_fgls(fgls_reweight(sample, labels), labels)
    raise InvalidParametersError(f"unknown estimator {name!r}")


# replicate context shared with forked workers
_CTX: dict = {}


def _run_replicate(r: int):
    cfg = _CTX["cfg"]
    graph = _CTX["graph"]
    z = _CTX["z"]
    outcomes = _CTX["outcomes"]
    seed = cfg.base_seed + r
    try:
        sample, restarts = rds_without_replacement(graph, cfg.walk, seed)
    except SamplingFailedError:
        return r, None, None
    sample = sample.with_blocks(z)
    if _CTX["contact_degrees"] is not None:
        # preferential runs: estimators see unweighted contact counts
        sample = RdsSample(
            tree=sample.tree,
            node=sample.node,
            degree=_CTX["contact_degrees"][sample.node],
            block=sample.block,
        )
    results = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for n in cfg.sizes:
            sub = sample.prefix(n)
            for out_name, yvec in outcomes.items():
                labeled = sub.with_outcome(yvec)
                for est in cfg.estimators:
                    results[(est, n, out_name)] = apply_estimator(est, labeled).mu_hat
    return r, results, restarts


def _prepare_population(cfg: ExperimentConfig):
    """Network, labels, and realized outcome columns on the sampled frame."""
    if cfg.dcsbm is not None:
        raw = dcsbm_sample(cfg.dcsbm, cfg.base_seed)
        graph, kept = raw.largest_component()
        z = cfg.dcsbm.z[kept]
    else:
        graph, kept = cfg.graph.largest_component()
        z = (
            cfg.graph_blocks[kept]
            if cfg.graph_blocks is not None
            else np.zeros(graph.num_nodes, dtype=np.int64)
        )
    rng = as_rng(cfg.base_seed, STREAM_OUTCOME)
    outcomes = {}
    for name, spec in cfg.outcomes.items():
        if spec.kind == "column":
            outcomes[name] = np.asarray(cfg.graph_outcomes[name], dtype=np.float64)[kept]
        else:
            outcomes[name] = spec.realize(z, rng)
    return graph, z, outcomes


def run_rmse_experiment(cfg: ExperimentConfig) -> RmseTable:
    """Replicated estimator comparison against the frame truth.

    One population per config; per replicate one full-size referral sample,
    reused for every smaller size by prefix truncation.  Replicates that
    exhaust the restart budget are dropped and counted as failures.
    """
    graph, z, outcomes = _prepare_population(cfg)
    mu_true = {name: float(y.mean()) for name, y in outcomes.items()}

    sampling_graph = graph
    contact_degrees = None
    if cfg.preferential_weight != 1.0:
        sampling_graph = graph.reweighted_within_blocks(z, cfg.preferential_weight)
        contact_degrees = np.diff(graph.weights.indptr).astype(np.float64)

    _CTX.clear()
    _CTX.update(
        cfg=cfg,
        graph=sampling_graph,
        z=z,
        outcomes=outcomes,
        contact_degrees=contact_degrees,
    )
    try:
        if cfg.jobs > 1:
            mp = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=cfg.jobs, mp_context=mp) as pool:
                outcomes_by_rep = list(pool.map(_run_replicate, range(cfg.replicates)))
        else:
            outcomes_by_rep = [_run_replicate(r) for r in range(cfg.replicates)]
    finally:
        _CTX.clear()

    estimates: dict = {}
    failures = 0
    for _, results, _restarts in sorted(outcomes_by_rep, key=lambda t: t[0]):
        if results is None:
            failures += 1
            continue
        for key, mu in results.items():
            estimates.setdefault(key, []).append(mu)

    rows = []
    for est in cfg.estimators:
        for n in cfg.sizes:
            for out_name in cfg.outcomes:
                vals = np.asarray(estimates.get((est, n, out_name), []))
                if vals.size == 0:
                    raise SamplingFailedError(
                        "every replicate failed to sample", failures, 0
                    )
                err = vals - mu_true[out_name]
                bias = float(err.mean())
                sd = float(err.std(ddof=1)) if vals.size > 1 else 0.0
                rmse = float(np.sqrt(np.mean(err**2)))
                rows.append(
                    RmseRow(
                        estimator=est,
                        n=n,
                        outcome=out_name,
                        rmse=rmse,
                        bias=bias,
                        sd=sd,
                        replicates=int(vals.size),
                        failures=failures,
                    )
                )
    return RmseTable(rows=tuple(rows), mu_true=mu_true)


@dataclass(frozen=True)
class DiagnosticDataset:
    """Point cloud plus reference curve for one sample's diagnostic plot."""

    points: tuple
    grey_grid: np.ndarray
    grey_rse: np.ndarray
    warnings: tuple


def emit_diagnostics(sample: RdsSample) -> DiagnosticDataset:
    """Diagnostic dataset from a single labeled sample.

    One point per estimated eigenvalue: one each for the two single-term
    estimators, one per non-leading eigenvalue for each blockmodel
    estimator (outcome blocks and demographic blocks).  Estimator failures
    downgrade to warnings.  The grey reference curve spans the default
    eigenvalue grid.
    """
    notes = []
    points = []
    n = sample.n
    for name in ("auto", "delta", "sbm_y", "sbm_z"):
        try:
            report = apply_estimator(name, sample)
        except Exception as exc:  # per-point downgrade by design
            notes.append(f"{name}: {exc}")
            continue
        if report.rse is None or not report.eigenvalues:
            notes.append(f"{name}: no spectral point available")
            continue
        for lam in report.eigenvalues:
            points.append(
                DiagnosticPoint(estimator=name, lambda_hat=float(lam), rse=report.rse, n=n)
            )
    grey = ranktwo_rse_curve(sample.tree, GREY_LINE_GRID)
    return DiagnosticDataset(
        points=tuple(points),
        grey_grid=GREY_LINE_GRID.copy(),
        grey_rse=grey,
        warnings=tuple(notes),
    )
