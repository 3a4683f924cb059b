"""Command-line entry point.

Loads a graph, synthesizes features, runs the requested number of epochs
through the simulated grid and optionally appends machine-readable stats.
Exit status: 0 on success, 1 on contract violations or unreadable inputs,
2 on bad command lines (argparse).
"""

from __future__ import annotations

import argparse
import sys

from .dist import CommLedger, CostModelParams, ProcessGrid
from .errors import ContractViolation, GraphFormatError
from .graph_io import (
    DIRECTION_AS_IS,
    DIRECTION_SYMMETRIZE,
    EDGE_LIST,
    MATRIX_MARKET,
    RunConfig,
    emit_stats,
    load_graph,
    load_vertex_subset,
    synthesize_features,
)
from .pipeline import FeaturePartition, run_epoch
from .sampler import SamplerConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnnbulk",
        description="Bulk minibatch sampling on a simulated process grid",
    )
    parser.add_argument("--graph", required=True, help="graph file to load")
    parser.add_argument(
        "--format", choices=[EDGE_LIST, MATRIX_MARKET], default=EDGE_LIST
    )
    parser.add_argument("--sampler", choices=["sage", "ladies"], default="sage")
    parser.add_argument("--layers", type=int, default=1)
    parser.add_argument("--batch-size", type=int, default=2)
    parser.add_argument(
        "--fanouts",
        default=None,
        help="comma-separated per-layer sample counts (node-wise sampler)",
    )
    parser.add_argument("--sample-num", type=int, default=2,
                        help="per-layer sample count when --fanouts is not given")
    parser.add_argument("--bulk-count", type=int, default=1,
                        help="minibatches sampled per stacked pass")
    parser.add_argument("--procs", type=int, default=1)
    parser.add_argument("--replication", type=int, default=1)
    parser.add_argument("--mode", choices=["replicated", "partitioned"],
                        default="replicated")
    parser.add_argument("--feature-dim", type=int, default=8)
    parser.add_argument("--epochs", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--stats", default=None, help="append stats records here")
    parser.add_argument(
        "--direction", choices=[DIRECTION_AS_IS, DIRECTION_SYMMETRIZE],
        default=DIRECTION_AS_IS,
    )
    parser.add_argument("--train-vertices", default=None,
                        help="file restricting the training set, one id per line")
    parser.add_argument("--alpha", type=float, default=1.0,
                        help="latency units per message for the cost model")
    parser.add_argument("--beta", type=float, default=1.0,
                        help="cost units per word for the cost model")
    return parser


def config_from_args(args) -> RunConfig:
    fanouts = None
    if args.fanouts is not None:
        try:
            fanouts = tuple(int(x) for x in args.fanouts.split(","))
        except ValueError:
            raise ContractViolation(f"bad --fanouts value {args.fanouts!r}") from None
    return RunConfig(
        graph=args.graph,
        format=args.format,
        sampler=args.sampler,
        layers=args.layers,
        batch_size=args.batch_size,
        fanouts=fanouts,
        sample_num=args.sample_num,
        bulk_count=args.bulk_count,
        procs=args.procs,
        replication=args.replication,
        mode=args.mode,
        feature_dim=args.feature_dim,
        epochs=args.epochs,
        seed=args.seed,
        stats=args.stats,
        direction=args.direction,
        train_vertices=args.train_vertices,
        alpha=args.alpha,
        beta=args.beta,
    )


def run(config: RunConfig, out=sys.stdout) -> int:
    G = load_graph(config.graph, config.format, config.direction)
    grid = ProcessGrid(config.procs, config.replication)
    H = synthesize_features(G.n, config.feature_dim, config.seed)
    Hpart = FeaturePartition.partition(H, grid)
    if config.sampler == "sage":
        cfg = SamplerConfig.sage(
            config.layers, config.batch_size, config.fanouts,
            config.bulk_count, config.seed,
        )
    else:
        cfg = SamplerConfig.ladies(
            config.layers, config.batch_size, config.sample_num,
            config.bulk_count, config.seed,
        )
    train = None
    if config.train_vertices is not None:
        train = load_vertex_subset(config.train_vertices, G.n)
    avg_degree = G.adjacency.nnz / max(G.n, 1)
    cost_params = None
    if config.mode == "partitioned" and avg_degree > 0:
        cost_params = CostModelParams(
            p=config.procs, c=config.replication, k=config.bulk_count,
            b=config.batch_size, s=cfg.s, d=avg_degree,
            alpha=config.alpha, beta=config.beta,
        )
    print(
        f"graph {config.graph}: n={G.n} edges={G.adjacency.nnz} "
        f"avg_degree={avg_degree:.2f}",
        file=out,
    )
    for epoch in range(config.epochs):
        ledger = CommLedger(grid.p, alpha=config.alpha, beta=config.beta)
        report = run_epoch(
            G, Hpart, cfg, grid,
            mode=config.mode, epoch=epoch, ledger=ledger,
            train_vertices=train, cost_params=cost_params,
        )
        print(
            f"epoch {epoch}: batches={report.n_batches} chunks={report.chunks} "
            f"spgemm_calls={report.spgemm_calls} "
            f"sample={report.durations['sample']:.3f}s "
            f"fetch={report.durations['fetch']:.3f}s "
            f"propagate={report.durations['propagate']:.3f}s "
            f"words={ledger.words()}",
            file=out,
        )
        if config.stats is not None:
            emit_stats(report, config.stats, config=config)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(config_from_args(args))
    except (ContractViolation, GraphFormatError, OSError) as exc:
        print(f"gnnbulk: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
