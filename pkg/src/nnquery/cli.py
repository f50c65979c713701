"""Command-line interface.

Subcommands: simulate-mds, simulate-classify, bench-timing, ingest-check,
serve. Experiment commands require --seed, --trials, and --out; they write
a JSONL record stream to --out, wall-clock timings to a ``.timing`` sidecar,
and a plot-ready median/quartile table to a ``.summary.tsv`` next to it.
A JSON config file (--config) supplies defaults that explicit flags
override. Exit status is 0 on success, nonzero with a diagnostic otherwise.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .acquisition import MIConfig
from .choice import PLParams
from .classify import ClassificationLoopConfig, ModelConfig
from .datasets import IngestError, ingest_comparisons, ingest_features
from .embedding import MDSConfig
from .experiments import (
    Arm,
    ClassificationExperimentConfig,
    MdsExperimentConfig,
    PoolExperimentConfig,
    TimingBenchConfig,
    run_classification_experiment,
    run_mds_synthetic,
    run_pool_experiment,
    run_timing_bench,
    summary_table,
    timing_table,
)


def _parse_arm(text: str) -> Arm:
    parts = text.split("-")
    if len(parts) != 3 or parts[0] not in ("mi", "random") or parts[1] not in ("nn", "ranking"):
        raise argparse.ArgumentTypeError(
            f"arm {text!r} must look like mi-nn-3 or random-ranking-3"
        )
    return Arm(parts[0], parts[1], int(parts[2]))


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _add_experiment_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, required=True, help="base seed; trial t runs with seed+t")
    parser.add_argument("--trials", type=int, required=True)
    parser.add_argument("--out", type=Path, required=True, help="result stream path (.jsonl)")
    parser.add_argument("--config", type=Path, help="JSON file of flag defaults")


def _write_outputs(args, output) -> None:
    output.write(args.out)
    table = summary_table(output)
    args.out.with_suffix(".summary.tsv").write_text(table)
    sys.stdout.write(table)


def _cmd_simulate_mds(args) -> int:
    schedule = PLParams(mu=args.mu, schedule=args.mu_schedule, rate=args.mu_rate)
    if args.kind == "pool":
        mi = MIConfig(
            variant=args.mi_variant or "embedding",
            sigma2=args.sigma2,
            sigma_mode=args.sigma_mode or "fixed",
            n_samples=args.n_samples or 100,
        )
        cfg = PoolExperimentConfig(
            n_items=args.n_items,
            feature_dim=args.feature_dim,
            embed_dim=args.embed_dim,
            query_length=args.query_length,
            pool_size=args.pool_size,
            test_triplets=args.test_triplets,
            corruption=args.corruption,
            batch_size=args.batch_size,
            top_informative=args.top_informative
            if args.top_informative is not None
            else args.batch_size,
            batches=args.cycles,
            init_queries=args.burn_in,
            mi=mi,
            mds=MDSConfig(step_size=args.step_size, iters=args.mds_iters, mu_schedule=schedule),
            trials=args.trials,
            base_seed=args.seed,
        )
        output = run_pool_experiment(cfg)
    else:
        if args.arms:
            arms = tuple(args.arms)
        elif args.kind == "ranking":
            arms = (Arm("mi", "nn", 4), Arm("random", "ranking", 3))
        else:
            arms = (Arm("mi", "nn", 3), Arm("random", "nn", 3))
        mi = MIConfig(
            variant=args.mi_variant or "distances",
            sigma2=args.sigma2,
            sigma_mode=args.sigma_mode or "margin",
            n_samples=args.n_samples or 200,
        )
        cfg = MdsExperimentConfig(
            n_items=args.n_items,
            dim=args.dim,
            cycles=args.cycles,
            burn_in=args.burn_in,
            candidate_cap=args.candidate_cap,
            arms=arms,
            mi=mi,
            mds=MDSConfig(step_size=args.step_size, iters=args.mds_iters, mu_schedule=schedule),
            trials=args.trials,
            base_seed=args.seed,
        )
        output = run_mds_synthetic(cfg)
    _write_outputs(args, output)
    return 0


def _cmd_simulate_classify(args) -> int:
    cfg = ClassificationExperimentConfig(
        n_train=args.n_train,
        n_test=args.n_test,
        n_classes=args.classes,
        blob_std=args.blob_std,
        blob_spread=args.blob_spread,
        initial_per_class=args.initial_per_class,
        loop=ClassificationLoopConfig(
            batch_size=args.batch_size,
            cycles=args.cycles,
            query_length=args.query_length,
            model=ModelConfig(kind=args.model),
            mi_samples=args.n_samples,
        ),
        arms=tuple(args.arms.split(",")),
        trials=args.trials,
        base_seed=args.seed,
    )
    output = run_classification_experiment(cfg)
    _write_outputs(args, output)
    return 0


def _cmd_bench_timing(args) -> int:
    cfg = TimingBenchConfig(
        n_items=args.n_items,
        dim=args.dim,
        lengths=args.lengths,
        queries_per_reference=args.queries_per_reference,
        mi=MIConfig(variant="distances", sigma2=args.sigma2, n_samples=args.n_samples),
        repetitions=args.repetitions,
        base_seed=args.seed,
    )
    rows = run_timing_bench(cfg)
    table = timing_table(rows)
    args.out.write_text(table)
    sys.stdout.write(table)
    return 0


def _cmd_ingest_check(args) -> int:
    table = ingest_features(args.features)
    print(
        f"{args.features}: {table.n_items} items, {table.features.shape[1]} features"
        + (", labeled" if table.labels is not None else "")
        + (", named" if table.names is not None else "")
    )
    if args.comparisons:
        comparisons, responses = ingest_comparisons(
            args.comparisons, known_ids=set(table.ids)
        )
        print(
            f"{args.comparisons}: {len(comparisons)} paired comparisons, "
            f"{len(responses)} answered queries"
        )
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(session_dir=args.session_dir, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnquery")
    sub = parser.add_subparsers(dest="command", required=True)

    mds = sub.add_parser("simulate-mds", help="active embedding experiments")
    _add_experiment_args(mds)
    mds.add_argument("--kind", choices=("synthetic", "ranking", "pool"), default="synthetic")
    mds.add_argument("--n-items", type=int, default=20)
    mds.add_argument("--dim", type=int, default=2)
    mds.add_argument("--cycles", type=int, default=100)
    mds.add_argument("--burn-in", type=int, default=20)
    mds.add_argument("--candidate-cap", type=int, default=500)
    mds.add_argument(
        "--arms",
        type=lambda s: [_parse_arm(a) for a in s.split(",")],
        default=None,
        help="comma-separated, e.g. mi-nn-3,random-nn-5",
    )
    mds.add_argument("--mi-variant", choices=("embedding", "distances"), default=None)
    mds.add_argument("--sigma2", type=float, default=1.0)
    mds.add_argument(
        "--sigma-mode", choices=("fixed", "pairwise_variance", "margin"), default=None
    )
    mds.add_argument("--n-samples", type=int, default=None)
    mds.add_argument("--step-size", type=float, default=0.5)
    mds.add_argument("--mds-iters", type=int, default=500)
    mds.add_argument(
        "--mu-schedule", choices=("constant", "diminishing", "max_distance"), default="diminishing"
    )
    mds.add_argument("--mu", type=float, default=0.0)
    mds.add_argument("--mu-rate", type=float, default=0.95)
    mds.add_argument("--feature-dim", type=int, default=10, help="pool kind only")
    mds.add_argument("--embed-dim", type=int, default=10, help="pool kind only")
    mds.add_argument("--query-length", type=int, default=3, help="pool kind only")
    mds.add_argument("--pool-size", type=int, default=2000, help="pool kind only")
    mds.add_argument("--test-triplets", type=int, default=2000, help="pool kind only")
    mds.add_argument("--corruption", type=float, default=0.25, help="pool kind only")
    mds.add_argument("--batch-size", type=int, default=10, help="pool kind only")
    mds.add_argument("--top-informative", type=int, default=None, help="pool kind only")
    mds.set_defaults(func=_cmd_simulate_mds)

    cls = sub.add_parser("simulate-classify", help="active label acquisition experiments")
    _add_experiment_args(cls)
    cls.add_argument("--n-train", type=int, default=400)
    cls.add_argument("--n-test", type=int, default=400)
    cls.add_argument("--classes", type=int, default=4)
    cls.add_argument("--blob-std", type=float, default=1.0)
    cls.add_argument("--blob-spread", type=float, default=3.0)
    cls.add_argument("--initial-per-class", type=int, default=5)
    cls.add_argument("--batch-size", type=int, default=10)
    cls.add_argument("--cycles", type=int, default=5)
    cls.add_argument("--query-length", type=int, default=3)
    cls.add_argument(
        "--model",
        choices=("nearest_centroid", "knn", "multinomial_logit"),
        default="multinomial_logit",
    )
    cls.add_argument("--n-samples", type=int, default=1000)
    cls.add_argument("--arms", default="mi_clustered,max_entropy,random,k_center")
    cls.set_defaults(func=_cmd_simulate_classify)

    bench = sub.add_parser("bench-timing", help="winner-only vs full-ranking scoring time")
    bench.add_argument("--seed", type=int, required=True)
    bench.add_argument("--out", type=Path, required=True)
    bench.add_argument("--config", type=Path)
    bench.add_argument("--n-items", type=int, default=20)
    bench.add_argument("--dim", type=int, default=2)
    bench.add_argument("--lengths", type=_int_list, default=(2, 3, 4))
    bench.add_argument("--queries-per-reference", type=int, default=50)
    bench.add_argument("--sigma2", type=float, default=1.0)
    bench.add_argument("--n-samples", type=int, default=1000)
    bench.add_argument("--repetitions", type=int, default=10)
    bench.set_defaults(func=_cmd_bench_timing)

    ingest = sub.add_parser("ingest-check", help="validate dataset files")
    ingest.add_argument("--features", type=Path, required=True)
    ingest.add_argument("--comparisons", type=Path, default=None)
    ingest.set_defaults(func=_cmd_ingest_check)

    serve = sub.add_parser("serve", help="run the live labeling session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--session-dir", type=Path, default=None)
    serve.add_argument("--ui-dir", type=Path, default=None)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = build_parser()
    # a config file supplies defaults; explicit flags still win because
    # argparse applies them after set_defaults
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            overrides = json.loads(Path(known.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            print(f"error: cannot read config {known.config}: {e}", file=sys.stderr)
            return 2
        for sub_action in parser._subparsers._group_actions:
            for sub_parser in sub_action.choices.values():
                sub_parser.set_defaults(
                    **{k: v for k, v in overrides.items() if k != "command"}
                )
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
