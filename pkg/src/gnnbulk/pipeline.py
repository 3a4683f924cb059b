"""End-to-end epoch driver: bulk sampling, feature fetching, aggregation.

An epoch walks the training batches in chunks of the bulk count k. Each
chunk is sampled in one stacked pass; afterwards every minibatch fetches
the feature rows of its deepest frontier with an all-to-allv across its
grid column and runs the per-layer aggregation products. There is no
learning here: propagation is the sparse-times-dense aggregation only,
which is what moves the data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dist import (
    MODE_REPLICATED,
    CommLedger,
    CostModelParams,
    CostPrediction,
    ProcessGrid,
    alltoallv,
    predict_costs,
    sample_epoch_distributed,
)
from .errors import ContractViolation
from .sampler import SampledEpoch, SamplerConfig, sample_epoch_bulk
from .sparse import SparseMatrix, column_window


@dataclass(frozen=True)
class FeaturePartition:
    """Dense n×f feature matrix split into grid.rows contiguous blocks.

    Block i is replicated on the processes of grid row i, so each grid
    column holds the whole matrix.
    """

    grid: ProcessGrid
    blocks: tuple[np.ndarray, ...]
    row_starts: np.ndarray

    def __post_init__(self):
        if len(self.blocks) != self.grid.rows:
            raise ContractViolation("need one feature block per grid row")
        widths = {b.shape[1] for b in self.blocks}
        if len(widths) != 1 or widths.pop() < 1:
            raise ContractViolation("feature blocks must share a positive width")

    @classmethod
    def partition(cls, H: np.ndarray, grid: ProcessGrid) -> "FeaturePartition":
        H = np.asarray(H, dtype=np.float64)
        if H.ndim != 2 or H.shape[1] < 1:
            raise ContractViolation("feature matrix must be n×f with f > 0")
        if H.shape[0] < grid.rows:
            raise ContractViolation("fewer feature rows than grid rows")
        bounds = np.linspace(0, H.shape[0], grid.rows + 1).astype(np.int64)
        blocks = tuple(H[bounds[i] : bounds[i + 1]].copy() for i in range(grid.rows))
        return cls(grid, blocks, bounds)

    @property
    def n(self) -> int:
        return int(self.row_starts[-1])

    @property
    def f(self) -> int:
        return self.blocks[0].shape[1]

    def owner_row(self, vertex: int) -> int:
        return int(np.searchsorted(self.row_starts, vertex, side="right") - 1)

    def full(self) -> np.ndarray:
        return np.concatenate(self.blocks, axis=0)


def fetch_features(
    frontier_vertices,
    Hpart: FeaturePartition,
    grid: ProcessGrid,
    ledger: CommLedger | None = None,
    requester: int = 0,
) -> np.ndarray:
    """Gather the feature rows of the given vertices onto one process.

    Every vertex row lives on exactly one process in the requester's grid
    column (the replica of its block row there); rows owned by the
    requester itself are free, the rest arrive through an all-to-allv over
    the column whose word cost is the number of fetched values. Duplicates
    in frontier_vertices are fetched once per occurrence. Returns the rows
    in the requested order.
    """
    vertices = np.asarray(frontier_vertices, dtype=np.int64)
    if vertices.size and (vertices.min() < 0 or vertices.max() >= Hpart.n):
        raise ContractViolation("frontier vertex id out of range")
    i_req, j_req = grid.coords(requester)
    column = grid.col_group(j_req)
    owner_rows = (
        np.searchsorted(Hpart.row_starts, vertices, side="right") - 1
        if vertices.size
        else np.zeros(0, dtype=np.int64)
    )
    out = np.empty((len(vertices), Hpart.f), dtype=np.float64)
    send_buffers = {rank: {} for rank in column}
    remote_slots = {}
    for block_row in np.unique(owner_rows):
        sel = owner_rows == block_row
        local_ids = vertices[sel] - Hpart.row_starts[block_row]
        rows = Hpart.blocks[block_row][local_ids]
        owner = grid.rank(int(block_row), j_req)
        if owner == requester:
            out[sel] = rows
        else:
            send_buffers[owner][requester] = rows
            remote_slots[owner] = sel
    received = alltoallv(send_buffers, column, ledger)
    for sender, payload in received.get(requester, []):
        out[remote_slots[sender]] = payload
    return out


def forward_aggregate(A_l: SparseMatrix, H_in: np.ndarray) -> np.ndarray:
    """Aggregation product A_l @ H_in (sparse times dense)."""
    H_in = np.asarray(H_in, dtype=np.float64)
    if H_in.ndim != 2 or A_l.n_cols != H_in.shape[0]:
        raise ContractViolation(
            f"aggregation mismatch: {A_l.shape} @ {H_in.shape}"
        )
    return np.asarray(A_l.to_scipy() @ H_in)


@dataclass(frozen=True)
class EpochPlan:
    """Chunk schedule covering every training batch exactly once."""

    total_batches: int
    bulk_count: int
    chunks: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, total_batches: int, bulk_count: int) -> "EpochPlan":
        if total_batches < 0 or bulk_count < 1:
            raise ContractViolation("invalid epoch plan sizes")
        chunks = tuple(
            (start, min(start + bulk_count, total_batches))
            for start in range(0, total_batches, bulk_count)
        )
        return cls(total_batches, bulk_count, chunks)

    @property
    def rounds(self) -> int:
        return len(self.chunks)


@dataclass
class EpochReport:
    """Outcome of one trained epoch: counts, timings and traffic."""

    epoch: int
    mode: str
    n_batches: int
    chunks: int
    spgemm_calls: int
    batches_per_process: list[int]
    durations: dict = field(default_factory=dict)
    ledger: CommLedger | None = None
    prediction: CostPrediction | None = None


def make_batches(train_vertices, batch_size: int, seed: int, epoch: int):
    """Deterministically shuffle the training set into batches of b (the
    last batch may be short)."""
    train = np.asarray(train_vertices, dtype=np.int64)
    order = np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([seed, 0x6261746368, epoch]))
    ).permutation(len(train))
    shuffled = train[order]
    return [
        shuffled[i : i + batch_size] for i in range(0, len(shuffled), batch_size)
    ]


def _trainer_of_batch(index_in_chunk, chunk_size, grid, mode):
    """Deal a chunk's batches contiguously over trainers (processes for the
    replicated scheme; grid rows, then replicas within the row, for the
    partitioned one)."""
    if mode == MODE_REPLICATED:
        bounds = np.linspace(0, chunk_size, grid.p + 1).astype(np.int64)
        return int(np.searchsorted(bounds, index_in_chunk, side="right") - 1)
    row_bounds = np.linspace(0, chunk_size, grid.rows + 1).astype(np.int64)
    row = int(np.searchsorted(row_bounds, index_in_chunk, side="right") - 1)
    within = index_in_chunk - int(row_bounds[row])
    row_count = int(row_bounds[row + 1] - row_bounds[row])
    rep_bounds = np.linspace(0, max(row_count, 1), grid.c + 1).astype(np.int64)
    rep = int(np.searchsorted(rep_bounds, within, side="right") - 1)
    return grid.rank(row, rep)


def run_epoch(
    G,
    Hpart: FeaturePartition,
    cfg: SamplerConfig,
    grid: ProcessGrid,
    mode: str = MODE_REPLICATED,
    epoch: int = 0,
    ledger: CommLedger | None = None,
    train_vertices=None,
    cost_params: CostModelParams | None = None,
) -> EpochReport:
    """Train one epoch: chunked bulk sampling, then per-minibatch feature
    fetching and aggregation through every layer.

    The training set defaults to all vertices; it is shuffled by the run
    seed and the epoch number. Every batch is trained exactly once by the
    process that owns it.
    """
    if train_vertices is None:
        train_vertices = np.arange(G.n)
    if ledger is None:
        ledger = CommLedger(grid.p)
    batches = make_batches(train_vertices, cfg.batch_size, cfg.seed, epoch)
    plan = EpochPlan.build(len(batches), cfg.bulk_count)
    durations = {"sample": 0.0, "fetch": 0.0, "propagate": 0.0}
    spgemm_calls = 0
    per_process = [0] * grid.p

    for start, stop in plan.chunks:
        chunk = batches[start:stop]
        t0 = time.perf_counter()
        if grid.p == 1:
            sampled = sample_epoch_bulk(G, cfg, chunk, epoch=epoch, batch_offset=start)
        else:
            sampled = sample_epoch_distributed(
                G, cfg, chunk, grid, mode=mode, epoch=epoch,
                batch_offset=start, ledger=ledger,
            )
        durations["sample"] += time.perf_counter() - t0
        spgemm_calls += sampled.spgemm_calls

        for local in range(len(chunk)):
            trainer = _trainer_of_batch(local, len(chunk), grid, mode)
            per_process[trainer] += 1
            t0 = time.perf_counter()
            X = fetch_features(
                sampled.layers[-1].col_vertices[local], Hpart, grid, ledger, trainer
            )
            durations["fetch"] += time.perf_counter() - t0
            t0 = time.perf_counter()
            _propagate_batch(sampled, local, X)
            durations["propagate"] += time.perf_counter() - t0

    prediction = predict_costs(cost_params) if cost_params is not None else None
    return EpochReport(
        epoch=epoch,
        mode=mode,
        n_batches=len(batches),
        chunks=plan.rounds,
        spgemm_calls=spgemm_calls,
        batches_per_process=per_process,
        durations=durations,
        ledger=ledger,
        prediction=prediction,
    )


def _batch_block(layer, batch_index):
    """The adjacency rows/columns of one batch inside a stacked layer."""
    row_counts = [len(v) for v in layer.row_vertices]
    r0 = int(sum(row_counts[:batch_index]))
    r1 = r0 + row_counts[batch_index]
    col_counts = [len(v) for v in layer.col_vertices]
    if layer.adjacency.n_cols == sum(col_counts):
        # diagonal layout: every batch owns a distinct column range
        c0 = int(sum(col_counts[:batch_index]))
        c1 = c0 + col_counts[batch_index]
    else:
        # shared layout (uniform stacked extraction): columns are per-batch
        c0, c1 = 0, col_counts[batch_index]
    block = layer.adjacency.row_slice(r0, r1)
    return column_window(block, c0, c1)


def _propagate_batch(sampled: SampledEpoch, batch_index: int, X: np.ndarray):
    """Run the aggregation chain for one minibatch, deepest layer first.

    Between layers, the distinct column vertices of the shallower layer
    pick up the aggregated rows of their first occurrence in the deeper
    frontier (aggregation weights are untrained; the product exercises the
    data movement).
    """
    for li in range(len(sampled.layers) - 1, -1, -1):
        layer = sampled.layers[li]
        block = _batch_block(layer, batch_index)
        Y = forward_aggregate(block, X)
        if li == 0:
            return Y
        deeper = sampled.layers[li]
        shallower = sampled.layers[li - 1]
        rows_of = deeper.row_vertices[batch_index]
        need = shallower.col_vertices[batch_index]
        uniq, first = np.unique(rows_of, return_index=True)
        pos = np.searchsorted(uniq, need)
        X = Y[first[pos]]
    return Y
