"""Embedding learning from paired comparisons, and the active query loop.

The embedding is fit by gradient descent on the mean log-loss of the stored
comparisons under the pairwise choice model: for a comparison where the
reference is nearer the winner than the loser,

    loss = ln((a + b) / b),  a = |z_r - z_w|^2 + mu,  b = |z_r - z_l|^2 + mu.

Descent runs a fixed number of iterations at a fixed step size, not to
convergence. A safeguard rejects any step that increases the loss and halves
the step size for the remaining iterations, so a fit never ends worse than
it started; activations are logged for audit.

The active loop alternates between asking the single query with the highest
mutual-information score (every item takes a turn as reference) and
refitting the embedding warm-started from the previous estimate. It is
implemented as a stepping engine so the same state machine can be driven by
a simulated oracle in-process or by a human through the HTTP session API.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .acquisition import MIConfig, score_pool
from .choice import PLParams, mu_value
from .oracles import Oracle
from .types import (
    ComparisonStore,
    Embedding,
    NNQuery,
    PairedComparison,
    QueryPool,
    QueryResponse,
    RankingQuery,
    RankingResponse,
    decompose_nn,
    decompose_ranking,
    enumerate_candidate_queries,
    max_pairwise_distance,
    pairwise_distances,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MDSConfig:
    step_size: float = 0.5
    iters: int = 500
    mu_schedule: PLParams = PLParams(schedule="diminishing")

    def __post_init__(self) -> None:
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.iters < 1:
            raise ValueError("need at least one descent iteration")


@dataclass(frozen=True)
class ActiveLoopConfig:
    """Settings for one active embedding run.

    normalize_scale keeps the fitted embedding at a fixed size (RMS pairwise
    distance sqrt(2 * dim), centered) after every fit. Comparisons constrain
    geometry only up to scale, and the fitted scale otherwise drifts upward,
    which silently changes what the margin schedule and distance-noise
    variance mean from cycle to cycle. Normalizing is a rigid motion plus
    scaling, so reported metrics are unaffected.
    """

    n_items: int
    dim: int
    query_length: int = 3
    cycles: int = 100
    burn_in: int = 20
    candidate_cap: int | None = None
    selection: str = "mi"  # mi | random
    query_kind: str = "nn"  # nn | ranking
    normalize_scale: bool = True
    mi: MIConfig = MIConfig()
    mds: MDSConfig = MDSConfig()

    def __post_init__(self) -> None:
        if self.n_items < 2 or self.dim < 1:
            raise ValueError("need at least 2 items and 1 dimension")
        if not 2 <= self.query_length <= self.n_items - 1:
            raise ValueError("query_length must fit the item count")
        if self.cycles < 0 or self.burn_in < 0:
            raise ValueError("cycles and burn_in must be nonnegative")
        if self.selection not in ("mi", "random"):
            raise ValueError(f"unknown selection {self.selection!r}")
        if self.query_kind not in ("nn", "ranking"):
            raise ValueError(f"unknown query_kind {self.query_kind!r}")
        if self.selection == "mi" and self.query_kind == "ranking":
            raise ValueError("active selection of ranking queries is not supported")


def _raw_loss(z, refs, wins, los, mu: float) -> float:
    a = np.sum((z[refs] - z[wins]) ** 2, axis=1) + mu
    b = np.sum((z[refs] - z[los]) ** 2, axis=1) + mu
    return float(np.mean(np.log(a + b) - np.log(b)))


def _raw_grad(z, refs, wins, los, mu: float) -> np.ndarray:
    dw = z[refs] - z[wins]
    dl = z[refs] - z[los]
    a = np.sum(dw * dw, axis=1) + mu
    b = np.sum(dl * dl, axis=1) + mu
    da = 1.0 / (a + b)
    db = 1.0 / (a + b) - 1.0 / b
    coef_w = 2.0 * da[:, None] * dw
    coef_l = 2.0 * db[:, None] * dl
    grad = np.zeros_like(z)
    idx = np.concatenate([refs, wins, los])
    vals = np.concatenate([coef_w + coef_l, -coef_w, -coef_l])
    np.add.at(grad, idx, vals)
    return grad / len(refs)


def pair_log_loss(embedding: Embedding, store: ComparisonStore, mu: float) -> float:
    """Mean negative log-likelihood of the stored comparisons."""
    refs, wins, los = store.as_arrays()
    return _raw_loss(embedding.values, refs, wins, los, mu)


def pair_log_loss_grad(embedding: Embedding, store: ComparisonStore, mu: float) -> np.ndarray:
    """Exact gradient of pair_log_loss with respect to every coordinate.

    Items absent from the store get zero rows.
    """
    refs, wins, los = store.as_arrays()
    return _raw_grad(embedding.values, refs, wins, los, mu)


def mds_fit(
    embedding: Embedding, store: ComparisonStore, cfg: MDSConfig, cycle: int
) -> Embedding:
    """Run exactly cfg.iters descent steps from the given embedding.

    The margin is resolved once per fit from the schedule and the largest
    pairwise distance of the input estimate. Steps that would increase the
    loss are rejected and halve the step size for the rest of the fit.
    """
    z = np.array(embedding.values, dtype=np.float64)
    mu = mu_value(cfg.mu_schedule, cycle, d_max=max_pairwise_distance(z))
    refs, wins, los = store.as_arrays()
    alpha = cfg.step_size
    loss = _raw_loss(z, refs, wins, los, mu)
    if not np.isfinite(loss):
        raise FloatingPointError("log-loss diverged")
    for _ in range(cfg.iters):
        grad = _raw_grad(z, refs, wins, los, mu)
        candidate = z - alpha * grad
        new_loss = _raw_loss(candidate, refs, wins, los, mu)
        if not np.isfinite(new_loss) or new_loss > loss:
            alpha *= 0.5
            logger.info("descent step rejected; step size halved to %g", alpha)
            continue
        z = candidate
        loss = new_loss
    return Embedding(z)


def normalize_embedding_scale(values: np.ndarray, dim: int) -> np.ndarray:
    """Center the rows and rescale so the RMS pairwise distance is
    sqrt(2 * dim), the value a unit-normal point cloud would have."""
    d = pairwise_distances(values)
    iu = np.triu_indices(values.shape[0], k=1)
    rms = float(np.sqrt(np.mean(d[iu] ** 2)))
    if rms == 0.0:
        return values
    centered = values - values.mean(axis=0)
    return centered * (np.sqrt(2.0 * dim) / rms)


def random_query(
    rng: np.random.Generator, n_items: int, length: int, kind: str = "nn"
) -> NNQuery | RankingQuery:
    """A uniformly random query: uniform reference, uniform candidate set."""
    reference = int(rng.integers(n_items))
    others = np.array([i for i in range(n_items) if i != reference])
    candidates = tuple(sorted(rng.choice(others, size=length, replace=False).tolist()))
    cls = NNQuery if kind == "nn" else RankingQuery
    return cls(reference, candidates)


@dataclass
class CycleRecord:
    cycle: int
    embedding: Embedding
    query: NNQuery | RankingQuery | None
    answer: int | tuple[int, ...] | None
    metrics: dict[str, float] = field(default_factory=dict)


class ActiveEmbeddingSession:
    """Stepping engine for the active embedding loop.

    Query flow: ``next_query`` returns the query to ask (idempotent while an
    answer is outstanding); ``submit_nn``/``submit_ranking`` record the
    answer, append its paired-comparison decomposition, and refit. The first
    ``burn_in`` queries are uniformly random; the embedding is fit once from
    the uniform-[0,1] initialization when burn-in completes, then
    warm-started after every answer.
    """

    def __init__(self, cfg: ActiveLoopConfig, rng: np.random.Generator) -> None:
        self.cfg = cfg
        self.rng = rng
        self.z = rng.uniform(0.0, 1.0, size=(cfg.n_items, cfg.dim))
        self.store = ComparisonStore()
        self.answered = 0
        self.cycle = 0
        self.pending: NNQuery | RankingQuery | None = None
        self.query_log: list[tuple[NNQuery | RankingQuery, int | tuple[int, ...]]] = []
        self._static_pools: list[QueryPool] | None = None

    @property
    def embedding(self) -> Embedding:
        return Embedding(self.z)

    @property
    def in_burn_in(self) -> bool:
        return self.answered < self.cfg.burn_in

    @property
    def done(self) -> bool:
        return self.cycle >= self.cfg.cycles and not self.in_burn_in

    def next_query(self) -> NNQuery | RankingQuery:
        if self.pending is not None:
            return self.pending
        if self.done:
            raise RuntimeError("all configured cycles are complete")
        if self.in_burn_in or self.cfg.selection == "random":
            self.pending = random_query(
                self.rng, self.cfg.n_items, self.cfg.query_length, self.cfg.query_kind
            )
        else:
            self.pending = self._most_informative_query()
        return self.pending

    def _cycle_mu(self, cycle: int) -> float:
        return mu_value(
            self.cfg.mds.mu_schedule, cycle, d_max=max_pairwise_distance(self.z)
        )

    def _candidate_pools(self, cycle: int) -> list[QueryPool]:
        cfg = self.cfg
        if cfg.candidate_cap is None:
            # full enumeration is identical every cycle
            if self._static_pools is None:
                self._static_pools = [
                    enumerate_candidate_queries(cfg.n_items, cfg.query_length, ref)
                    for ref in range(cfg.n_items)
                ]
            return self._static_pools
        pool_rng = np.random.default_rng([cfg.mi.seed, cycle, 1])
        return [
            enumerate_candidate_queries(
                cfg.n_items, cfg.query_length, ref, cap=cfg.candidate_cap, rng=pool_rng
            )
            for ref in range(cfg.n_items)
        ]

    def _most_informative_query(self) -> NNQuery:
        cfg = self.cfg
        k = self.cycle + 1
        cycle_seed = int(np.random.SeedSequence([cfg.mi.seed, k]).generate_state(1)[0])
        mi_cfg = replace(cfg.mi, seed=cycle_seed)
        mu = self._cycle_mu(k)
        if mi_cfg.sigma_mode == "margin":
            # distance-noise variance tracks the diminishing margin: both
            # express shrinking uncertainty as the estimate firms up
            mi_cfg = replace(mi_cfg, sigma2=mu, sigma_mode="fixed")
        pools = self._candidate_pools(k)
        merged = QueryPool(
            tuple(q for pool in pools for q in pool), origin=pools[0].origin
        )
        scores = score_pool(self.embedding, merged, mi_cfg, mu)
        best_value = -np.inf
        best_query: NNQuery | None = None
        offset = 0
        for pool in pools:
            segment = scores.values[offset : offset + len(pool)]
            local = int(np.argmax(segment))
            if segment[local] > best_value:
                best_value = float(segment[local])
                best_query = scores.queries[offset + local]
            offset += len(pool)
        assert best_query is not None
        return best_query

    def submit_nn(self, winner: int) -> None:
        if self.pending is None:
            raise RuntimeError("no pending query to answer")
        if not isinstance(self.pending, NNQuery):
            raise RuntimeError("pending query expects a full ranking answer")
        response = QueryResponse(self.pending, winner)
        self._record(decompose_nn(response), winner)

    def submit_ranking(self, ranking: tuple[int, ...]) -> None:
        if self.pending is None:
            raise RuntimeError("no pending query to answer")
        if not isinstance(self.pending, RankingQuery):
            raise RuntimeError("pending query expects a single winner")
        response = RankingResponse(self.pending, ranking)
        self._record(decompose_ranking(response), tuple(ranking))

    def _record(self, comparisons: list[PairedComparison], answer) -> None:
        assert self.pending is not None
        self.query_log.append((self.pending, answer))
        self.store.extend(comparisons)
        self.pending = None
        self.answered += 1
        if self.answered < self.cfg.burn_in:
            return
        if self.answered == self.cfg.burn_in:
            fit_cycle = 0
        else:
            self.cycle += 1
            fit_cycle = self.cycle
        fitted = mds_fit(self.embedding, self.store, self.cfg.mds, fit_cycle).values
        if self.cfg.normalize_scale:
            fitted = normalize_embedding_scale(fitted, self.cfg.dim)
        self.z = np.array(fitted)

    # --- persistence -----------------------------------------------------

    def state_dict(self) -> dict:
        pending = None
        if self.pending is not None:
            pending = {
                "kind": "nn" if isinstance(self.pending, NNQuery) else "ranking",
                "reference": self.pending.reference,
                "candidates": list(self.pending.candidates),
            }
        return {
            "rng_state": self.rng.bit_generator.state,
            "z": self.z.tolist(),
            "comparisons": [[c.reference, c.winner, c.loser] for c in self.store],
            "answered": self.answered,
            "cycle": self.cycle,
            "pending": pending,
            "query_log": [
                {
                    "kind": "nn" if isinstance(q, NNQuery) else "ranking",
                    "reference": q.reference,
                    "candidates": list(q.candidates),
                    "answer": list(a) if isinstance(a, tuple) else a,
                }
                for q, a in self.query_log
            ],
        }

    @classmethod
    def from_state_dict(cls, cfg: ActiveLoopConfig, state: dict) -> "ActiveEmbeddingSession":
        session = cls.__new__(cls)
        session.cfg = cfg
        session.rng = np.random.default_rng()
        session.rng.bit_generator.state = state["rng_state"]
        session.z = np.array(state["z"], dtype=np.float64)
        session.store = ComparisonStore(
            PairedComparison(r, w, l) for r, w, l in state["comparisons"]
        )
        session.answered = state["answered"]
        session.cycle = state["cycle"]
        session.pending = None
        if state["pending"] is not None:
            p = state["pending"]
            cls_q = NNQuery if p["kind"] == "nn" else RankingQuery
            session.pending = cls_q(p["reference"], tuple(p["candidates"]))
        session.query_log = []
        for entry in state["query_log"]:
            cls_q = NNQuery if entry["kind"] == "nn" else RankingQuery
            q = cls_q(entry["reference"], tuple(entry["candidates"]))
            a = entry["answer"]
            session.query_log.append((q, tuple(a) if isinstance(a, list) else a))
        session._static_pools = None
        return session


def active_embed_loop(
    cfg: ActiveLoopConfig,
    oracle: Oracle,
    rng: np.random.Generator,
    metrics_fn: Callable[[Embedding], dict[str, float]] | None = None,
) -> list[CycleRecord]:
    """Drive a full active embedding run against an oracle.

    Returns one record per cycle: cycle 0 is the state right after burn-in,
    cycles 1..K each add one answered query. The single rng drives the
    engine's draws and the oracle's noise, so a (config, seed) pair fixes
    the whole trajectory.
    """
    session = ActiveEmbeddingSession(cfg, rng)
    while session.in_burn_in:
        query = session.next_query()
        _answer(session, oracle, query, rng)
    records = [_snapshot(session, None, None, metrics_fn)]
    for _ in range(cfg.cycles):
        query = session.next_query()
        answer = _answer(session, oracle, query, rng)
        records.append(_snapshot(session, query, answer, metrics_fn))
    return records


def _answer(
    session: ActiveEmbeddingSession,
    oracle: Oracle,
    query: NNQuery | RankingQuery,
    rng: np.random.Generator,
) -> int | tuple[int, ...]:
    if isinstance(query, NNQuery):
        response = oracle.answer_nn(query, rng)
        session.submit_nn(response.winner)
        return response.winner
    response = oracle.answer_ranking(query, rng)
    session.submit_ranking(response.ranking)
    return response.ranking


def _snapshot(
    session: ActiveEmbeddingSession,
    query: NNQuery | RankingQuery | None,
    answer: int | tuple[int, ...] | None,
    metrics_fn: Callable[[Embedding], dict[str, float]] | None,
) -> CycleRecord:
    embedding = session.embedding
    metrics = metrics_fn(embedding) if metrics_fn else {}
    return CycleRecord(session.cycle, embedding, query, answer, metrics)
