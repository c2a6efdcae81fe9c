import numpy as np
import pytest

import rdsgls as r
from rdsgls.presets import two_state_chain


@pytest.fixture(scope="session")
def triangle_model():
    graph = r.WeightedGraph.from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)])
    return r.build_transition(graph)


@pytest.fixture(scope="session")
def chain09():
    """Two-state chain with staying probability 0.9 (second eigenvalue 0.8)."""
    return r.build_transition(two_state_chain(0.9))


def random_tree(rng, n):
    """Uniform-ish random recruitment tree with n nodes."""
    parent = np.full(n, -1, dtype=np.int64)
    for tau in range(1, n):
        parent[tau] = rng.integers(tau)
    return r.ReferralTree(parent)


def random_dcsbm(rng, max_k=4, max_n=80):
    """Valid blockmodel parameters with random labels, propensities, affinities."""
    K = int(rng.integers(2, max_k + 1))
    n = int(rng.integers(8 * K, max_n + 1))
    z = rng.integers(0, K, size=n)
    for u in range(K):  # guarantee two nodes per block
        z[2 * u] = u
        z[2 * u + 1] = u
    theta = rng.random(n) + 0.2
    sums = np.bincount(z, weights=theta, minlength=K)
    theta = theta / sums[z]
    B = rng.random((K, K)) + 0.1
    B = 0.5 * (B + B.T) + np.eye(K)
    # rescale so every pairwise edge probability is valid
    worst = 0.0
    for u in range(K):
        tu = np.sort(theta[z == u])[::-1]
        for v in range(K):
            tv = np.sort(theta[z == v])[::-1]
            pair = tu[0] * (tu[1] if u == v else tv[0])
            worst = max(worst, pair * B[u, v])
    B = B * (0.9 / worst)
    return r.DcSbmParams(z=z, theta=theta, B=B)
