"""Seeded multi-trial experiment runner and the scoring-time benchmark.

Every experiment is fully determined by its config and base seed: trial t
runs with seed base_seed + t, and each trial draws a fresh ground truth and
initialization. Arms within a trial share the trial's ground truth so
methods are compared on paired instances.

Result streams are line-delimited JSON records with deterministic fields
only (arm, trial, cycle, metric, value); wall-clock timings go to a
separate sidecar stream so re-running a config reproduces the result file
byte for byte.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .acquisition import (
    BatchConfig,
    MIConfig,
    score_mi_distances,
    score_mi_ranking,
    score_pool,
    select_batch_top_random,
)
from .choice import PLParams, mu_value
from .classify import ClassificationLoopConfig, al_classification_loop
from .datasets import gaussian_blobs, random_psd_metric, random_triples, standard_normal_items
from .embedding import (
    ActiveLoopConfig,
    MDSConfig,
    active_embed_loop,
    mds_fit,
    normalize_embedding_scale,
)
from .metrics import TrialStats, aggregate_kendall, triplet_generalization_accuracy
from .oracles import CorruptedOracle, DeterministicOracle, GroundTruth, noiseless_comparisons
from .types import (
    ComparisonStore,
    Embedding,
    NNQuery,
    QueryPool,
    RankingQuery,
    decompose_nn,
    enumerate_candidate_queries,
    max_pairwise_distance,
)


@dataclass(frozen=True)
class ResultRecord:
    arm: str
    trial: int
    cycle: int
    metric: str
    value: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "arm": self.arm,
                "trial": self.trial,
                "cycle": self.cycle,
                "metric": self.metric,
                "value": self.value,
            }
        )


@dataclass
class RunOutput:
    records: list[ResultRecord]
    timings: list[dict]

    def write(self, out: str | Path) -> None:
        out = Path(out)
        out.write_text("".join(r.to_json() + "\n" for r in self.records))
        sidecar = out.with_name(out.stem + ".timing" + out.suffix)
        sidecar.write_text("".join(json.dumps(t) + "\n" for t in self.timings))

    def summary(self) -> dict[tuple[str, str], TrialStats]:
        """TrialStats per (arm, metric), cycles in ascending order."""
        grouped: dict[tuple[str, str], dict[int, dict[int, float]]] = {}
        for r in self.records:
            grouped.setdefault((r.arm, r.metric), {}).setdefault(r.trial, {})[r.cycle] = r.value
        out = {}
        for key, trials in grouped.items():
            cycles = sorted(next(iter(trials.values())).keys())
            values = np.array([[trials[t][c] for c in cycles] for t in sorted(trials)])
            out[key] = TrialStats.from_trials(values)
        return out

    def final_median(self, arm: str, metric: str) -> float:
        stats = self.summary()[(arm, metric)]
        return float(stats.median[-1])


def summary_table(output: RunOutput) -> str:
    """Plot-ready plain-text table: one row per (arm, metric, cycle)."""
    lines = ["arm\tmetric\tcycle\tmedian\tq25\tq75"]
    for (arm, metric), stats in sorted(output.summary().items()):
        for c in range(len(stats.median)):
            lines.append(
                f"{arm}\t{metric}\t{c}\t{stats.median[c]:.6f}"
                f"\t{stats.q25[c]:.6f}\t{stats.q75[c]:.6f}"
            )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Arm:
    selection: str  # mi | random
    query_kind: str  # nn | ranking
    query_length: int

    @property
    def name(self) -> str:
        return f"{self.selection}-{self.query_kind}-{self.query_length}"


@dataclass(frozen=True)
class MdsExperimentConfig:
    """Active embedding on a synthetic ground truth with a noiseless oracle.

    Defaults are the tuned desk-scale recipe: distance-noise scoring with
    sigma^2 tied to the diminishing margin, per-reference candidate pools
    capped at 500 and resampled each cycle, and a margin decaying at 0.95 per
    cycle on a scale-normalized embedding.
    """

    n_items: int = 20
    dim: int = 2
    cycles: int = 100
    burn_in: int = 20
    candidate_cap: int | None = 500
    arms: tuple[Arm, ...] = (
        Arm("mi", "nn", 3),
        Arm("random", "nn", 3),
    )
    mi: MIConfig = MIConfig(
        variant="distances", sigma2=1.0, sigma_mode="margin", n_samples=200
    )
    mds: MDSConfig = MDSConfig(
        step_size=0.5, iters=500, mu_schedule=PLParams(schedule="diminishing", rate=0.95)
    )
    trials: int = 20
    base_seed: int = 0


def run_mds_synthetic(cfg: MdsExperimentConfig) -> RunOutput:
    records: list[ResultRecord] = []
    timings: list[dict] = []
    for arm in cfg.arms:
        comparisons_per_query = (
            arm.query_length - 1
            if arm.query_kind == "nn"
            else arm.query_length * (arm.query_length - 1) // 2
        )
        for t in range(cfg.trials):
            trial_seed = cfg.base_seed + t
            start = time.perf_counter()
            truth_rng = np.random.default_rng([trial_seed, 9])
            truth = Embedding(standard_normal_items(cfg.n_items, cfg.dim, truth_rng))
            oracle = DeterministicOracle(GroundTruth(embedding=truth.values))
            loop_cfg = ActiveLoopConfig(
                n_items=cfg.n_items,
                dim=cfg.dim,
                query_length=arm.query_length,
                cycles=cfg.cycles,
                burn_in=cfg.burn_in,
                candidate_cap=cfg.candidate_cap,
                selection=arm.selection,
                query_kind=arm.query_kind,
                mi=replace(
                    cfg.mi,
                    seed=int(np.random.SeedSequence([cfg.mi.seed, trial_seed]).generate_state(1)[0]),
                ),
                mds=cfg.mds,
            )
            rng = np.random.default_rng([trial_seed])
            trajectory = active_embed_loop(
                loop_cfg,
                oracle,
                rng,
                metrics_fn=lambda z: {"aggregate_tau": aggregate_kendall(z, truth)},
            )
            for rec in trajectory:
                records.append(
                    ResultRecord(arm.name, t, rec.cycle, "aggregate_tau", rec.metrics["aggregate_tau"])
                )
                records.append(
                    ResultRecord(
                        arm.name, t, rec.cycle, "queries_asked", cfg.burn_in + rec.cycle
                    )
                )
                records.append(
                    ResultRecord(
                        arm.name,
                        t,
                        rec.cycle,
                        "comparisons_gathered",
                        (cfg.burn_in + rec.cycle) * comparisons_per_query,
                    )
                )
            timings.append(
                {"arm": arm.name, "trial": t, "seconds": time.perf_counter() - start}
            )
    return RunOutput(records, timings)


@dataclass(frozen=True)
class PoolExperimentConfig:
    """Batched selection from a fixed query pool under a corrupted
    Mahalanobis oracle, with an embedding learner standing in for network
    training at desk scale."""

    n_items: int = 100
    feature_dim: int = 10
    embed_dim: int = 5
    query_length: int = 3
    pool_size: int = 2000
    test_triplets: int = 2000
    corruption: float = 0.25
    batch_size: int = 10
    top_informative: int = 10
    batches: int = 30
    init_queries: int = 10
    mi: MIConfig = MIConfig(variant="embedding", sigma2=1.0, n_samples=200)
    mds: MDSConfig = MDSConfig(
        step_size=0.5, iters=500, mu_schedule=PLParams(schedule="diminishing", rate=0.95)
    )
    arms: tuple[str, ...] = ("mi", "random")
    trials: int = 20
    base_seed: int = 0


def run_pool_experiment(cfg: PoolExperimentConfig) -> RunOutput:
    records: list[ResultRecord] = []
    timings: list[dict] = []
    for arm in cfg.arms:
        batch_cfg = BatchConfig(
            cfg.batch_size, cfg.top_informative if arm == "mi" else 0
        )
        for t in range(cfg.trials):
            trial_seed = cfg.base_seed + t
            start = time.perf_counter()
            truth_rng = np.random.default_rng([trial_seed, 9])
            features = standard_normal_items(cfg.n_items, cfg.feature_dim, truth_rng)
            metric = random_psd_metric(cfg.feature_dim, truth_rng)
            truth = GroundTruth(features=features, metric=metric)
            test_set = noiseless_comparisons(
                truth, random_triples(cfg.n_items, cfg.test_triplets, truth_rng)
            )
            oracle = CorruptedOracle(DeterministicOracle(truth), cfg.corruption)
            rng = np.random.default_rng([trial_seed])
            pool = _sample_query_pool(cfg.n_items, cfg.query_length, cfg.pool_size, rng)
            mi_cfg = replace(
                cfg.mi,
                seed=int(np.random.SeedSequence([cfg.mi.seed, trial_seed]).generate_state(1)[0]),
            )
            z = Embedding(rng.uniform(0.0, 1.0, size=(cfg.n_items, cfg.embed_dim)))
            store = ComparisonStore()
            for _ in range(cfg.init_queries):
                q = pool.queries[int(rng.integers(len(pool)))]
                store.extend(decompose_nn(oracle.answer_nn(q, rng)))
            z = _fit_normalized(z, store, cfg.mds, 0, cfg.embed_dim)
            records.append(
                ResultRecord(
                    arm, t, 0, "tga", triplet_generalization_accuracy(z, test_set)
                )
            )
            for k in range(1, cfg.batches + 1):
                if arm == "mi":
                    cycle_cfg = replace(
                        mi_cfg,
                        seed=int(np.random.SeedSequence([mi_cfg.seed, k]).generate_state(1)[0]),
                    )
                    mu_k = mu_value(
                        cfg.mds.mu_schedule, k, d_max=max_pairwise_distance(z.values)
                    )
                    if cycle_cfg.sigma_mode == "margin":
                        cycle_cfg = replace(cycle_cfg, sigma2=mu_k, sigma_mode="fixed")
                    scores = score_pool(z, pool, cycle_cfg, mu_k)
                    batch = select_batch_top_random(scores, batch_cfg, rng)
                else:
                    idx = rng.choice(len(pool), size=cfg.batch_size, replace=False)
                    batch = [pool.queries[int(i)] for i in idx]
                for q in batch:
                    store.extend(decompose_nn(oracle.answer_nn(q, rng)))
                z = _fit_normalized(z, store, cfg.mds, k, cfg.embed_dim)
                records.append(
                    ResultRecord(
                        arm, t, k, "tga", triplet_generalization_accuracy(z, test_set)
                    )
                )
            timings.append({"arm": arm, "trial": t, "seconds": time.perf_counter() - start})
    return RunOutput(records, timings)


def _fit_normalized(
    z: Embedding, store: ComparisonStore, cfg: MDSConfig, cycle: int, dim: int
) -> Embedding:
    fitted = mds_fit(z, store, cfg, cycle=cycle)
    return Embedding(normalize_embedding_scale(fitted.values, dim))


def _sample_query_pool(
    n_items: int, length: int, size: int, rng: np.random.Generator
) -> QueryPool:
    seen: set[tuple[int, tuple[int, ...]]] = set()
    queries: list[NNQuery] = []
    while len(queries) < size:
        ref = int(rng.integers(n_items))
        others = np.array([i for i in range(n_items) if i != ref])
        cands = tuple(sorted(rng.choice(others, size=length, replace=False).tolist()))
        key = (ref, cands)
        if key in seen:
            continue
        seen.add(key)
        queries.append(NNQuery(ref, cands))
    return QueryPool(tuple(queries), origin="subsampled")


@dataclass(frozen=True)
class ClassificationExperimentConfig:
    """Active label acquisition on synthetic blob data."""

    n_train: int = 400
    n_test: int = 400
    n_classes: int = 4
    blob_std: float = 1.8
    blob_spread: float = 3.0
    initial_per_class: int = 5
    loop: ClassificationLoopConfig = ClassificationLoopConfig()
    arms: tuple[str, ...] = ("mi_clustered", "max_entropy", "random", "k_center")
    trials: int = 3
    base_seed: int = 0


def _blob_centers(n_classes: int, spread: float) -> np.ndarray:
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    return spread * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def run_classification_experiment(cfg: ClassificationExperimentConfig) -> RunOutput:
    records: list[ResultRecord] = []
    timings: list[dict] = []
    centers = _blob_centers(cfg.n_classes, cfg.blob_spread)
    for arm in cfg.arms:
        for t in range(cfg.trials):
            trial_seed = cfg.base_seed + t
            start = time.perf_counter()
            data_rng = np.random.default_rng([trial_seed, 9])
            x, y = gaussian_blobs(cfg.n_train, centers, cfg.blob_std, data_rng)
            x_test, y_test = gaussian_blobs(cfg.n_test, centers, cfg.blob_std, data_rng)
            initial = []
            for c in range(cfg.n_classes):
                members = np.flatnonzero(y == c)
                initial.extend(
                    int(i)
                    for i in data_rng.choice(members, cfg.initial_per_class, replace=False)
                )
            loop_cfg = replace(cfg.loop, acquisition=arm)
            result = al_classification_loop(
                x, y, x_test, y_test, initial, loop_cfg, seed=trial_seed
            )
            for k, acc in enumerate(result.accuracies):
                records.append(ResultRecord(arm, t, k, "accuracy", acc))
                records.append(
                    ResultRecord(
                        arm,
                        t,
                        k,
                        "labels_acquired",
                        len(initial) + k * cfg.loop.batch_size,
                    )
                )
            timings.append({"arm": arm, "trial": t, "seconds": time.perf_counter() - start})
    return RunOutput(records, timings)


@dataclass(frozen=True)
class TimingBenchConfig:
    n_items: int = 20
    dim: int = 2
    lengths: tuple[int, ...] = (2, 3, 4)
    queries_per_reference: int = 50
    mi: MIConfig = MIConfig(variant="distances", sigma2=1.0, n_samples=1000)
    repetitions: int = 10
    base_seed: int = 0

    def __post_init__(self) -> None:
        if max(self.lengths) > 5:
            raise ValueError("ranking outcome spaces beyond length 5 are impractical")


@dataclass(frozen=True)
class TimingRow:
    family: str  # nn | ranking
    length: int
    mean_seconds: float
    std_seconds: float


def run_timing_bench(cfg: TimingBenchConfig) -> list[TimingRow]:
    """Per-reference scoring time for winner-only versus full-ranking queries.

    Both families score the same candidate sets with the same sample count;
    per repetition the mean per-reference time is recorded, and rows report
    mean and standard deviation over repetitions.
    """
    rng = np.random.default_rng(cfg.base_seed)
    z = Embedding(standard_normal_items(cfg.n_items, cfg.dim, rng))
    rows: list[TimingRow] = []
    for length in cfg.lengths:
        nn_pools = []
        ranking_pools = []
        for ref in range(cfg.n_items):
            pool = enumerate_candidate_queries(
                cfg.n_items, length, ref, cap=cfg.queries_per_reference, rng=rng
            )
            nn_pools.append(pool)
            ranking_pools.append(
                [RankingQuery(q.reference, q.candidates) for q in pool]
            )
        for family, pools, scorer in (
            ("nn", nn_pools, score_mi_distances),
            ("ranking", ranking_pools, score_mi_ranking),
        ):
            per_rep = []
            for _ in range(cfg.repetitions):
                per_ref = []
                for pool in pools:
                    t0 = time.perf_counter()
                    scorer(z, pool, cfg.mi, mu=1.0)
                    per_ref.append(time.perf_counter() - t0)
                per_rep.append(float(np.mean(per_ref)))
            rows.append(
                TimingRow(family, length, float(np.mean(per_rep)), float(np.std(per_rep)))
            )
    return rows


EXPERIMENT_KINDS = ("mds_synthetic", "mds_vs_ranking", "dml_pool", "classification", "timing_bench")


def run_experiment(kind: str, cfg):
    """Dispatch an experiment by kind.

    mds_synthetic and mds_vs_ranking share a runner (they differ only in the
    configured arms); timing_bench returns timing rows instead of a record
    stream because wall-clock measurements are inherently non-reproducible.
    """
    if kind in ("mds_synthetic", "mds_vs_ranking"):
        return run_mds_synthetic(cfg)
    if kind == "dml_pool":
        return run_pool_experiment(cfg)
    if kind == "classification":
        return run_classification_experiment(cfg)
    if kind == "timing_bench":
        return run_timing_bench(cfg)
    raise ValueError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}")


def timing_table(rows: list[TimingRow]) -> str:
    lines = ["family\tlength\tmean_seconds\tstd_seconds"]
    for r in rows:
        lines.append(f"{r.family}\t{r.length}\t{r.mean_seconds:.6f}\t{r.std_seconds:.6f}")
    by_length: dict[int, dict[str, float]] = {}
    for r in rows:
        by_length.setdefault(r.length, {})[r.family] = r.mean_seconds
    for length, families in sorted(by_length.items()):
        if "nn" in families and "ranking" in families and families["nn"] > 0:
            lines.append(
                f"# ratio length={length}: {families['ranking'] / families['nn']:.2f}"
            )
    return "\n".join(lines) + "\n"
