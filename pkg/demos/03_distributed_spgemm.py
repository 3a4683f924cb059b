"""Run the two distributed multiplies and inspect what moved where.

The replicated algorithm keeps the right operand everywhere and splits the
left one, so nothing is communicated. The partitioned algorithm splits
both into p/c replicated block rows and runs p/c² stages per grid column;
each stage ships only the rows the consumer's nonzero columns actually
reference, and a per-grid-row all-reduce combines the partial products.
"""

import numpy as np

from gnnbulk import (
    CommLedger,
    PHASES,
    ProcessGrid,
    partition_block_rows,
    replicated_spgemm,
    spgemm,
    spgemm_15d_sparsity_aware,
)
from gnnbulk.sparse import SparseMatrix

rng = np.random.default_rng(3)
n = 64
dense_q = (rng.random((24, n)) < 0.08) * 1.0
dense_a = (rng.random((n, n)) < 0.10) * 1.0
Q = SparseMatrix.from_dense(dense_q)
A = SparseMatrix.from_dense(dense_a)
serial = spgemm(Q, A)
print(f"Q {Q.shape} nnz={Q.nnz}, A {A.shape} nnz={A.nnz}, "
      f"serial product nnz={serial.nnz}")

print("\n--- replicated: p=4, A everywhere ---")
grid = ProcessGrid(4, 1)
ledger = CommLedger(4)
out = replicated_spgemm(partition_block_rows(Q, grid), A, grid, ledger)
print("equals serial product:", out.to_matrix().equals(serial))
print("words communicated:", ledger.words())

for p, c in ((4, 1), (4, 2), (8, 2)):
    print(f"\n--- partitioned: p={p}, c={c}, stages={p // (c * c)} ---")
    grid = ProcessGrid(p, c)
    ledger = CommLedger(p)
    trace = []
    out = spgemm_15d_sparsity_aware(
        partition_block_rows(Q, grid), partition_block_rows(A, grid),
        grid, ledger, trace,
    )
    print("equals serial product:", out.to_matrix().equals(serial))
    for phase in PHASES:
        if ledger.words(phase=phase) or ledger.messages(phase=phase):
            print(f"  {phase:12s} messages={ledger.messages(phase=phase):3d} "
                  f"words={ledger.words(phase=phase)}")
    sample = trace[0]
    print(f"  stage 0 example: process {sample.consumer} asked process "
          f"{sample.owner} for rows {sample.requested_cols.tolist()} "
          f"({sample.words} words)")
