"""Live labeling sessions: engine wrapper, metrics, and persistence.

A session owns one ActiveEmbeddingSession plus display metadata and a
per-cycle metric series. All mutations happen under the session lock.
Sessions serialize to JSON losslessly (floats round-trip exactly through
json), so a restored session resumes with the identical next query.
"""
from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path

import numpy as np

from ..acquisition import MIConfig
from ..choice import PLParams
from ..embedding import ActiveEmbeddingSession, ActiveLoopConfig, MDSConfig, pair_log_loss
from ..metrics import aggregate_kendall
from ..types import Embedding
from .schemas import SessionConfigModel


def loop_config_from_model(model: SessionConfigModel, n_items: int) -> ActiveLoopConfig:
    return ActiveLoopConfig(
        n_items=n_items,
        dim=model.dim,
        query_length=model.query_length,
        cycles=model.cycles,
        burn_in=model.burn_in,
        candidate_cap=model.candidate_cap,
        selection=model.selection,
        query_kind="nn",
        mi=MIConfig(
            variant=model.mi.variant,
            sigma2=model.mi.sigma2,
            n_samples=model.mi.n_samples,
            seed=model.mi.seed,
            sigma_mode=model.mi.sigma_mode,
        ),
        mds=MDSConfig(
            step_size=model.mds.step_size,
            iters=model.mds.iters,
            mu_schedule=PLParams(
                mu=model.mds.mu.mu,
                schedule=model.mds.mu.schedule,
                rate=model.mds.mu.rate,
            ),
        ),
    )


def pca_projection(z: np.ndarray) -> np.ndarray:
    """Top-2 principal-component projection with a fixed sign convention:
    each component's largest-magnitude loading is positive."""
    centered = z - z.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[: min(2, vt.shape[0])]
    comps = np.array(comps)
    for i in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    proj = centered @ comps.T
    if proj.shape[1] < 2:
        proj = np.hstack([proj, np.zeros((proj.shape[0], 2 - proj.shape[1]))])
    return proj


class Session:
    def __init__(
        self,
        session_id: str,
        config_model: SessionConfigModel,
        names: list[str],
        truth: np.ndarray | None,
        seed: int,
    ) -> None:
        self.session_id = session_id
        self.config_model = config_model
        self.names = names
        self.truth = truth
        self.lock = threading.Lock()
        cfg = loop_config_from_model(config_model, len(names))
        self.engine = ActiveEmbeddingSession(cfg, np.random.default_rng(seed))
        self.metric_series: dict[str, list[float]] = {"log_loss": []}
        if truth is not None:
            self.metric_series["rank_agreement"] = []

    @property
    def phase(self) -> str:
        if self.engine.done:
            return "done"
        return "burn_in" if self.engine.in_burn_in else "active"

    def next_query(self):
        with self.lock:
            if self.engine.done:
                return None
            return self.engine.next_query()

    def submit(self, winner: int) -> None:
        with self.lock:
            pending = self.engine.pending
            if pending is None:
                raise LookupError("no pending query; fetch next-query first")
            if not 1 <= winner <= pending.length:
                raise ValueError(f"winner must be in 1..{pending.length}")
            self.engine.submit_nn(winner)
            if not self.engine.in_burn_in:
                self._record_metrics()

    def _record_metrics(self) -> None:
        embedding = self.engine.embedding
        mu = self.engine._cycle_mu(self.engine.cycle)
        self.metric_series["log_loss"].append(
            pair_log_loss(embedding, self.engine.store, mu)
        )
        if self.truth is not None:
            self.metric_series["rank_agreement"].append(
                aggregate_kendall(embedding, Embedding(self.truth))
            )

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "session_id": self.session_id,
                "cycle": self.engine.cycle,
                "queries_answered": self.engine.answered,
                "names": self.names,
                "projection": pca_projection(self.engine.z).tolist(),
                "metrics": {k: list(v) for k, v in self.metric_series.items()},
            }

    # --- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "config": self.config_model.model_dump(),
            "names": self.names,
            "truth": None if self.truth is None else self.truth.tolist(),
            "engine": self.engine.state_dict(),
            "metrics": self.metric_series,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Session":
        session = cls.__new__(cls)
        session.session_id = payload["session_id"]
        session.config_model = SessionConfigModel(**payload["config"])
        session.names = payload["names"]
        session.truth = (
            None if payload["truth"] is None else np.array(payload["truth"], dtype=np.float64)
        )
        session.lock = threading.Lock()
        cfg = loop_config_from_model(session.config_model, len(session.names))
        session.engine = ActiveEmbeddingSession.from_state_dict(cfg, payload["engine"])
        session.metric_series = {k: list(v) for k, v in payload["metrics"].items()}
        return session


class SessionStore:
    """In-memory session registry with optional JSON persistence."""

    def __init__(self, directory: str | Path | None = None) -> None:
        self._sessions: dict[str, Session] = {}
        self._dir = Path(directory) if directory else None
        if self._dir:
            self._dir.mkdir(parents=True, exist_ok=True)

    def create(
        self,
        config_model: SessionConfigModel,
        names: list[str],
        truth: np.ndarray | None,
    ) -> Session:
        session_id = uuid.uuid4().hex[:12]
        session = Session(session_id, config_model, names, truth, seed=config_model.seed)
        self._sessions[session_id] = session
        self.save(session)
        return session

    def get(self, session_id: str) -> Session:
        if session_id in self._sessions:
            return self._sessions[session_id]
        if self._dir:
            path = self._dir / f"{session_id}.json"
            if path.exists():
                session = Session.from_dict(json.loads(path.read_text()))
                self._sessions[session_id] = session
                return session
        raise KeyError(session_id)

    def save(self, session: Session) -> None:
        if not self._dir:
            return
        path = self._dir / f"{session.session_id}.json"
        path.write_text(json.dumps(session.to_dict()))
