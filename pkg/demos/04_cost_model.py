"""Compare measured traffic with the closed-form latency/bandwidth model.

On a d-regular graph with uniformly spread batch vertices the model says a
grid column moves about kbd/c words of row data over its stages, and each
process all-reduces about ckbd/p words of partial products. We sweep the
replication factor at fixed p and print measured against predicted.
"""

import numpy as np

from gnnbulk import (
    CommLedger,
    CostModelParams,
    Graph,
    ProcessGrid,
    partition_block_rows,
    predict_costs,
    sage_seed_matrix,
    spgemm_15d_sparsity_aware,
)

n, d = 2**13, 8
rows = np.repeat(np.arange(n), d)
cols = (rows + np.tile(np.arange(1, d + 1), n)) % n
G = Graph.from_edges(n, rows, cols)

k, b = 4, 64
rng = np.random.default_rng(0)
batches = rng.permutation(n)[: k * b].reshape(k, b)
Q = sage_seed_matrix(list(batches), n)
kbd = k * b * d
p = 8

print(f"n={n}, d={d}, k={k}, b={b}  ->  kbd = {kbd}")
print(f"{'c':>3} {'rowdata/col (meas)':>20} {'kbd/c (model)':>15} "
      f"{'allreduce/proc':>15} {'ckbd/p (model)':>15}")
for c in (1, 2):
    grid = ProcessGrid(p, c)
    ledger = CommLedger(p)
    spgemm_15d_sparsity_aware(
        partition_block_rows(Q, grid), partition_block_rows(G.adjacency, grid),
        grid, ledger,
    )
    col_words = [
        sum(ledger.words(phase="row-data", process=r) for r in grid.col_group(j))
        for j in range(c)
    ]
    ar_words = [ledger.words(phase="all-reduce", process=r) for r in range(p)]
    print(f"{c:>3} {np.mean(col_words):>20.0f} {kbd / c:>15.0f} "
          f"{np.mean(ar_words):>15.0f} {c * kbd / p:>15.0f}")

print("\nclosed-form prediction for p=8, c=2, alpha=beta=1:")
pred = predict_costs(CostModelParams(p=8, c=2, k=k, b=b, s=1, d=d))
print(f"  t_rowdata   = {pred.t_rowdata:.1f}")
print(f"  t_allreduce = {pred.t_allreduce:.1f}")
print(f"  t_prob      = {pred.t_prob:.1f}")
