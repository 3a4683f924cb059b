"""Drive a full epoch: chunked bulk sampling, feature fetching, aggregation.

Every chunk of k minibatches is sampled in one stacked pass on the grid;
each minibatch then pulls the feature rows of its deepest frontier from
its grid column with an all-to-allv and runs the aggregation products
through the layers. The stats file this writes is the same one the CLI
produces.
"""

import pathlib
import tempfile

import numpy as np

from gnnbulk import (
    CommLedger,
    CostModelParams,
    FeaturePartition,
    Graph,
    ProcessGrid,
    SamplerConfig,
    emit_stats,
    read_stats,
    run_epoch,
    synthesize_features,
)

n, d = 1000, 6
rows = np.repeat(np.arange(n), d)
cols = (rows + np.tile(np.arange(1, d + 1), n)) % n
G = Graph.from_edges(n, rows, cols)

p, c = 8, 2
grid = ProcessGrid(p, c)
H = synthesize_features(n, f=16, seed=4)
Hpart = FeaturePartition.partition(H, grid)
cfg = SamplerConfig.sage(layers=2, batch_size=16, fanouts=(5, 3),
                         bulk_count=16, seed=4)

params = CostModelParams(p=p, c=c, k=cfg.bulk_count, b=cfg.batch_size,
                         s=cfg.s, d=float(d))
stats_path = pathlib.Path(tempfile.mkdtemp()) / "epoch_stats.jsonl"

for epoch in range(2):
    ledger = CommLedger(p)
    report = run_epoch(G, Hpart, cfg, grid, mode="partitioned", epoch=epoch,
                       ledger=ledger, cost_params=params)
    emit_stats(report, stats_path)
    print(f"epoch {epoch}: {report.n_batches} batches in {report.chunks} chunks, "
          f"{report.spgemm_calls} probability multiplies")
    print(f"  sample {report.durations['sample']:.3f}s, "
          f"fetch {report.durations['fetch']:.3f}s, "
          f"propagate {report.durations['propagate']:.3f}s")
    print(f"  row-data {ledger.words(phase='row-data')} words, "
          f"all-reduce {ledger.words(phase='all-reduce')} words, "
          f"feature all-to-allv {ledger.words(phase='all-to-allv')} words")

records = read_stats(stats_path)
epochs = [r for r in records if r["record"] == "epoch"]
print(f"\nstats file {stats_path}: {len(records)} records, "
      f"{len(epochs)} epoch summaries")
print("predicted costs in the file:", epochs[0]["predicted"])
