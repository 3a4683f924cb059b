"""Walk through both samplers as plain matrix operations on a tiny graph.

The graph has six vertices and undirected edges 0-1, 1-4, 2-5, 3-5, 4-5.
We sample the minibatch {1, 5} with a sample count of 2 and print every
matrix the per-layer recipe touches: seed, probabilities, the sampled
frontier, and the extracted adjacency block.
"""

import pathlib

import numpy as np

from gnnbulk import (
    build_column_extraction,
    compact_columns,
    expand_row_extraction,
    ladies_seed_matrix,
    load_graph,
    norm_rows_ladies,
    norm_rows_sage,
    sage_seed_matrix,
    sample_frontier,
    spgemm,
)

HERE = pathlib.Path(__file__).parent
np.set_printoptions(precision=3, suppress=True)

G = load_graph(HERE / "data" / "example6.txt")
print("adjacency A:")
print(G.adjacency.to_dense())
print("degrees:", G.degrees())

batch = [1, 5]
s = 2

# --- node-wise sampling ------------------------------------------------------
print("\n=== node-wise (one row per batch vertex) ===")
Q = sage_seed_matrix([batch], G.n)
print("seed Q (one-hot rows for 1 and 5):")
print(Q.to_dense())

P = spgemm(Q, G.adjacency)
print("P = Q @ A (each row is its vertex's neighbourhood):")
print(P.to_dense())

P = norm_rows_sage(P)
print("row-normalized P (uniform over neighbours):")
print(P.to_dense())

frontier = sample_frontier(P, s, epoch=0, layer=1, seed=42)
print(f"sampled frontier ({s} picks per row, clamped to the degree):")
print(frontier.to_dense())

A0, col_map = compact_columns(frontier)
print("extracted block (empty columns dropped); columns are vertices", col_map)
print(A0.to_dense())

# --- layer-wise sampling -----------------------------------------------------
print("\n=== layer-wise (one row per batch) ===")
Q = ladies_seed_matrix([batch], G.n)
print("seed Q (both batch vertices in one row):")
print(Q.to_dense())

P = spgemm(Q, G.adjacency)
print("P = Q @ A (neighbour counts e_v of every vertex):")
print(P.to_dense())

P = norm_rows_ladies(P)
print("squared-count normalization e_v^2 / sum e_u^2 (= [1/7 0 1/7 1/7 4/7 0]):")
print(P.to_dense())

frontier = sample_frontier(P, s, epoch=0, layer=1, seed=42)
sampled = frontier.row_cols(0)
print("sampled layer vertices:", sampled)

QR = expand_row_extraction(Q)
print("row extraction (one one-hot row per batch vertex):")
print(QR.to_dense())

QC = build_column_extraction(sampled, G.n)
AS = spgemm(spgemm(QR, G.adjacency), QC)
print("A_S = QR @ A @ QC: every edge between the batch and the sample:")
print(AS.to_dense())
