"""File formats: edge lists, attribute/sample/tree CSVs, reports, configs.

Numeric formatting is pinned for reproducible artifacts: CSV floats carry
10 significant digits, JSON floats 17.
"""

from __future__ import annotations

import configparser
import csv
from pathlib import Path

import numpy as np

from . import presets
from .errors import InvalidParametersError, ParseError
from .estimators import EstimateReport
from .experiment import DiagnosticDataset, ExperimentConfig, OutcomeSpec, RmseTable
from .netmodel import DcSbmParams, WeightedGraph
from .presets import (
    OFFSPRING_PRESETS,
    table1_block_matrix,
    table1_block_proportions,
    table1_dcsbm,
)
from .referral import ReferralTree
from .sampler import RdsSample, WalkConfig
from .seeding import STREAM_NETWORK, as_rng

CSV_FLOAT = "%.10g"
JSON_FLOAT = "%.17g"


def fmt_csv(x) -> str:
    if isinstance(x, (float, np.floating)):
        return CSV_FLOAT % float(x)
    return str(x)


# ---------------------------------------------------------------- edge lists


def write_edge_list(graph: WeightedGraph, path):
    with open(path, "w") as fh:
        fh.write("# edge list: u v [weight]\n")
        for i, j, w in graph.edge_list():
            if w == 1.0:
                fh.write(f"{i} {j}\n")
            else:
                fh.write(f"{i} {j} {CSV_FLOAT % w}\n")


def read_edge_list(path, num_nodes: int | None = None, allow_isolated: bool = False):
    """Parse whitespace-separated 'u v [w]' lines into a graph."""
    edges = []
    max_id = -1
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(path, lineno, f"expected 'u v [w]', got {line!r}")
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if i < 0 or j < 0:
                raise ParseError(path, lineno, "node ids must be nonnegative")
            if w <= 0:
                raise ParseError(path, lineno, "edge weight must be positive")
            edges.append((i, j, w))
            max_id = max(max_id, i, j)
    n = num_nodes if num_nodes is not None else max_id + 1
    try:
        return WeightedGraph.from_edges(n, edges, allow_isolated=allow_isolated)
    except InvalidParametersError as exc:
        raise ParseError(path, 0, str(exc)) from None


# ------------------------------------------------------------ attribute CSV


def write_attributes(path, blocks=None, block_names=None, outcomes=None):
    """Node attribute table: node, optional block, numeric outcome columns."""
    outcomes = outcomes or {}
    n = None
    for col in outcomes.values():
        n = len(col)
    if blocks is not None:
        n = len(blocks)
    if n is None:
        raise InvalidParametersError("nothing to write")
    header = ["node"]
    if blocks is not None:
        header.append("block")
    header.extend(outcomes.keys())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [i]
            if blocks is not None:
                b = blocks[i]
                row.append(block_names[b] if block_names is not None else b)
            row.extend(fmt_csv(col[i]) for col in outcomes.values())
            writer.writerow(row)


def read_attributes(path):
    """Returns (blocks or None, block_names or None, {column: float array})."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(path, 1, "empty attribute file") from None
        if "node" not in header:
            raise ParseError(path, 1, "attribute file needs a 'node' column")
        rows = list(reader)
    idx = {name: k for k, name in enumerate(header)}
    n = len(rows)
    order = np.empty(n, dtype=np.int64)
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(path, lineno, "row width disagrees with header")
        try:
            order[lineno - 2] = int(row[idx["node"]])
        except ValueError:
            raise ParseError(path, lineno, "node id must be an integer") from None
    if sorted(order.tolist()) != list(range(n)):
        raise ParseError(path, 0, "node column must enumerate 0..n-1")
    pos = np.argsort(order)

    blocks = None
    block_names = None
    if "block" in idx:
        raw = [rows[int(p)][idx["block"]] for p in pos]
        block_names = sorted(set(raw))
        lookup = {name: k for k, name in enumerate(block_names)}
        blocks = np.array([lookup[v] for v in raw], dtype=np.int64)
    outcomes = {}
    for name, k in idx.items():
        if name in ("node", "block"):
            continue
        col = np.empty(n)
        for lineno, p in enumerate(pos):
            try:
                col[lineno] = float(rows[int(p)][k])
            except ValueError:
                raise ParseError(
                    path, int(p) + 2, f"column {name!r} must be numeric"
                ) from None
        outcomes[name] = col
    return blocks, block_names, outcomes


# ------------------------------------------------------------------ tree CSV


def write_tree(tree: ReferralTree, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node", "parent"])
        for tau in range(tree.n):
            writer.writerow([tau, int(tree.parent[tau])])


def read_tree(path) -> ReferralTree:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node", "parent"]:
            raise ParseError(path, 1, "tree file must start with 'node,parent'")
        parents = []
        for lineno, row in enumerate(reader, start=2):
            try:
                node, parent = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise ParseError(path, lineno, "expected integer node,parent") from None
            if node != len(parents):
                raise ParseError(path, lineno, "nodes must appear in order 0..n-1")
            parents.append(parent)
    try:
        return ReferralTree(np.asarray(parents, dtype=np.int64))
    except InvalidParametersError as exc:
        raise ParseError(path, 0, str(exc)) from None


# ---------------------------------------------------------------- sample CSV

SAMPLE_HEADER = ["node", "parent", "pop_node", "y", "degree", "block"]


def write_sample(sample: RdsSample, path, block_names=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SAMPLE_HEADER)
        for tau in range(sample.n):
            if sample.block is None:
                block = ""
            elif block_names is not None:
                block = block_names[sample.block[tau]]
            else:
                block = int(sample.block[tau])
            writer.writerow(
                [
                    tau,
                    int(sample.tree.parent[tau]),
                    int(sample.node[tau]),
                    "" if sample.outcome is None else fmt_csv(sample.outcome[tau]),
                    fmt_csv(sample.degree[tau]),
                    block,
                ]
            )


def read_sample(path) -> RdsSample:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != SAMPLE_HEADER:
            raise ParseError(path, 1, f"sample file must start with {','.join(SAMPLE_HEADER)}")
        parents, pops, ys, degs, blocks = [], [], [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 6:
                raise ParseError(path, lineno, "expected 6 columns")
            try:
                node = int(row[0])
                if node != len(parents):
                    raise ParseError(path, lineno, "nodes must appear in order")
                parents.append(int(row[1]))
                pops.append(int(row[2]))
                ys.append(float(row[3]) if row[3] != "" else np.nan)
                degs.append(float(row[4]))
                blocks.append(row[5])
            except ValueError:
                raise ParseError(path, lineno, "malformed numeric field") from None
    tree = ReferralTree(np.asarray(parents, dtype=np.int64))
    y = np.asarray(ys)
    outcome = None if np.all(np.isnan(y)) else y
    block_arr = None
    if any(b != "" for b in blocks):
        names = sorted(set(blocks))
        lookup = {name: k for k, name in enumerate(names)}
        block_arr = np.array([lookup[b] for b in blocks], dtype=np.int64)
    return RdsSample(
        tree=tree,
        node=np.asarray(pops, dtype=np.int64),
        degree=np.asarray(degs),
        outcome=outcome,
        block=block_arr,
    )


# -------------------------------------------------------------------- JSON


def _json_value(x) -> str:
    if x is None:
        return "null"
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return JSON_FLOAT % float(x)
    if isinstance(x, str):
        return '"' + x.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_json_value(v) for v in x) + "]"
    raise InvalidParametersError(f"cannot serialize {type(x)!r}")


def report_to_json(report: EstimateReport) -> str:
    lines = ["{"]
    items = list(report.to_dict().items())
    for k, (key, value) in enumerate(items):
        comma = "," if k < len(items) - 1 else ""
        lines.append(f'  "{key}": {_json_value(value)}{comma}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_report(report: EstimateReport, path):
    with open(path, "w") as fh:
        fh.write(report_to_json(report))


# ------------------------------------------------------------- result CSVs


def write_rmse_table(table: RmseTable, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["estimator", "n", "outcome", "rmse", "bias", "sd", "replicates", "failures"]
        )
        for row in table.to_csv_rows():
            writer.writerow([fmt_csv(v) for v in row])


def write_diagnostics(dataset: DiagnosticDataset, path, variant="as_printed"):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "lambda_hat", "rse", "variant"])
        for pt in dataset.points:
            writer.writerow([pt.estimator, fmt_csv(pt.lambda_hat), fmt_csv(pt.rse), variant])
        for lam, val in zip(dataset.grey_grid, dataset.grey_rse):
            writer.writerow(["ranktwo_curve", fmt_csv(lam), fmt_csv(val), variant])


def write_figure1(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["p", "levels", "n", "var_gls", "var_mean", "ratio"])
        for r in rows:
            writer.writerow(
                [fmt_csv(r["p"]), r["levels"], r["n"], fmt_csv(r["var_gls"]),
                 fmt_csv(r["var_mean"]), fmt_csv(r["ratio"])]
            )


# ------------------------------------------------------------------ configs


def _parse_pmf(text: str) -> tuple:
    if text in OFFSPRING_PRESETS:
        return tuple(OFFSPRING_PRESETS[text])
    try:
        values = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise InvalidParametersError(f"bad offspring pmf {text!r}") from None
    return values


def _parse_outcome(text: str) -> OutcomeSpec:
    kind, _, args = text.partition(":")
    kind = kind.strip()
    if kind == "column":
        return OutcomeSpec(kind="column", values=(args.strip(),))
    try:
        values = tuple(float(v) for v in args.replace(",", " ").split())
    except ValueError:
        raise InvalidParametersError(f"bad outcome spec {text!r}") from None
    if kind not in ("block_values", "block_bernoulli", "bernoulli"):
        raise InvalidParametersError(f"unknown outcome kind {kind!r}")
    return OutcomeSpec(kind=kind, values=values)


def _parse_matrix(text: str) -> np.ndarray:
    rows = [r for r in text.split(";") if r.strip()]
    return np.array([[float(v) for v in r.split()] for r in rows])


def load_experiment_config(path, seed_override=None, jobs_override=None) -> ExperimentConfig:
    """Assemble an ExperimentConfig from the sectioned text format.

    Sections: [network] (dcsbm parameters or edge-list paths), [outcomes]
    (name = kind:args), [walk], [estimators], [run].  Paths are resolved
    relative to the config file.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ParseError(path, 0, "config file not found or unreadable")
    base = Path(path).parent

    run = parser["run"] if parser.has_section("run") else {}
    seed = int(seed_override if seed_override is not None else run.get("seed", 20170))
    sizes = tuple(int(v) for v in str(run.get("sizes", "100")).split())
    replicates = int(run.get("replicates", 100))
    jobs = int(jobs_override if jobs_override is not None else run.get("jobs", 1))

    walk_sec = parser["walk"] if parser.has_section("walk") else {}
    preferential = float(walk_sec.get("preferential_weight", 1.0))
    walk = WalkConfig(
        mode="without_replacement",
        offspring_pmf=_parse_pmf(str(walk_sec.get("offspring", "survey"))),
        target_n=max(sizes),
        seed_rule=str(walk_sec.get("seed_rule", "degree_proportional")),
        max_restarts=int(walk_sec.get("max_restarts", 1000)),
    )

    net = parser["network"] if parser.has_section("network") else {}
    source = str(net.get("source", "dcsbm"))
    dcsbm = None
    graph = None
    graph_blocks = None
    graph_outcomes = {}
    if source == "dcsbm":
        nodes = int(net.get("nodes", 5000))
        degree = float(net.get("expected_degree", 30.0))
        bm = str(net.get("block_matrix", "table1"))
        props = str(net.get("proportions", "table1"))
        theta_kind = str(net.get("theta", "gamma"))
        if bm == "table1" and props == "table1":
            dcsbm = table1_dcsbm(
                nodes, degree, rng_seed=seed, heterogeneous=(theta_kind == "gamma")
            )
        else:
            S = (
                table1_block_matrix(nodes, degree)
                if bm == "table1"
                else _parse_matrix(bm)
            )
            if bm != "table1":
                S = degree * nodes * S / S.sum()
            p = (
                table1_block_proportions()
                if props == "table1"
                else np.array([float(v) for v in props.split()])
            )
            sizes_z = presets.block_sizes(p, nodes)
            z = np.repeat(np.arange(len(sizes_z)), sizes_z)
            theta = (
                presets.gamma_theta(z, as_rng(seed, STREAM_NETWORK))
                if theta_kind == "gamma"
                else presets.uniform_theta(z)
            )
            dcsbm = DcSbmParams(z=z, theta=theta, B=S)
    elif source == "edgelist":
        graph = read_edge_list(base / net.get("edges"), allow_isolated=True)
        attrs = net.get("attributes")
        if attrs:
            graph_blocks, _, graph_outcomes = read_attributes(base / attrs)
    else:
        raise InvalidParametersError(f"unknown network source {source!r}")

    outcomes = {}
    if parser.has_section("outcomes"):
        for name, text in parser["outcomes"].items():
            outcomes[name] = _parse_outcome(text)
    if not outcomes:
        raise InvalidParametersError("config defines no outcomes")

    est_sec = parser["estimators"] if parser.has_section("estimators") else {}
    estimators = tuple(str(est_sec.get("names", "mean vh")).split())

    return ExperimentConfig(
        outcomes=outcomes,
        walk=walk,
        estimators=estimators,
        sizes=sizes,
        replicates=replicates,
        base_seed=seed,
        dcsbm=dcsbm,
        graph=graph,
        graph_blocks=graph_blocks,
        graph_outcomes=graph_outcomes,
        preferential_weight=preferential,
        jobs=jobs,
    )
