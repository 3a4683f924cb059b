import numpy as np
import pytest

from gnnbulk.sparse import Graph, SparseMatrix


@pytest.fixture
def figure_graph():
    """Six-vertex undirected demo graph.

    Edges: 0-1, 1-4, 2-5, 3-5, 4-5. For the batch {1, 5} the per-vertex
    neighbour counts are [1, 0, 1, 1, 2, 0], so the layer-wise sampling
    distribution is [1/7, 0, 1/7, 1/7, 4/7, 0].
    """
    return make_figure_graph()


def make_figure_graph():
    edges = [(0, 1), (1, 4), (2, 5), (3, 5), (4, 5)]
    src = [u for u, v in edges] + [v for u, v in edges]
    dst = [v for u, v in edges] + [u for u, v in edges]
    return Graph.from_edges(6, src, dst)


def random_sparse(rng, n_rows, n_cols, density, dyadic=True):
    """Random CSR test matrix.

    Values are positive dyadic rationals (multiples of 1/64) by default, so
    every sum of products encountered in the tests is exact in doubles and
    "equal" can mean bit-for-bit equal.
    """
    mask = rng.random((n_rows, n_cols)) < density
    dense = np.zeros((n_rows, n_cols))
    k = int(mask.sum())
    if dyadic:
        dense[mask] = rng.integers(1, 65, size=k) / 64.0
    else:
        dense[mask] = rng.random(k) + 0.5
    return SparseMatrix.from_dense(dense)


def dense_oracle(left: SparseMatrix, right: SparseMatrix) -> np.ndarray:
    """Dense product of the operands, computed independently of the sparse
    kernel (einsum over the dense arrays)."""
    return np.einsum("ik,kj->ij", left.to_dense(), right.to_dense())


def triple_loop_oracle(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Literal three-loop matrix product; the ground truth for small cases."""
    m, k = A.shape
    k2, n = B.shape
    assert k == k2
    C = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for t in range(k):
                acc += A[i, t] * B[t, j]
            C[i, j] = acc
    return C


def d_regular_graph(n, d, seed=0):
    """d-regular graph: a relabelled circulant where vertex v points at the
    d vertices after it. Every out-degree is exactly d."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    rows = np.repeat(np.arange(n), d)
    cols = (rows + np.tile(np.arange(1, d + 1), n)) % n
    return Graph.from_edges(n, perm[rows], perm[cols])


def random_graph_min_degree(rng, n, min_degree, extra_density=0.0):
    """Random graph whose every out-degree is at least min_degree."""
    base = d_regular_graph(n, min_degree, seed=int(rng.integers(0, 2**31)))
    if extra_density <= 0:
        return base
    m = int(extra_density * n * n)
    src = rng.integers(0, n, size=m)
    dst = rng.integers(0, n, size=m)
    adj = base.adjacency
    all_src = np.concatenate([np.repeat(np.arange(n), adj.row_nnz()), src])
    all_dst = np.concatenate([adj.col_indices, dst])
    return Graph.from_edges(n, all_src, all_dst)


def assert_valid(M: SparseMatrix):
    """Re-run the construction invariants on an existing matrix."""
    SparseMatrix(M.n_rows, M.n_cols, M.row_offsets, M.col_indices, M.values)


def edge_set(G: Graph):
    rows = np.repeat(np.arange(G.n), G.adjacency.row_nnz())
    return set(zip(rows.tolist(), G.adjacency.col_indices.tolist()))
