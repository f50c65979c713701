"""Request/response models for the session API.

Winner indices are 1-based candidate positions, matching the rest of the
package and the on-disk formats.
"""
from __future__ import annotations

from pydantic import BaseModel, Field


class MuScheduleModel(BaseModel):
    schedule: str = "diminishing"
    mu: float = 0.0
    rate: float = 0.99


class MIConfigModel(BaseModel):
    variant: str = "distances"
    sigma2: float = 1.0
    sigma_mode: str = "pairwise_variance"
    n_samples: int = 100
    seed: int = 0


class MDSConfigModel(BaseModel):
    step_size: float = 0.5
    iters: int = 500
    mu: MuScheduleModel = Field(default_factory=MuScheduleModel)


class SessionConfigModel(BaseModel):
    dim: int = 2
    query_length: int = 3
    cycles: int = 100
    burn_in: int = 10
    candidate_cap: int | None = None
    selection: str = "mi"
    seed: int = 0
    mi: MIConfigModel = Field(default_factory=MIConfigModel)
    mds: MDSConfigModel = Field(default_factory=MDSConfigModel)


class CreateSessionRequest(BaseModel):
    config: SessionConfigModel = Field(default_factory=SessionConfigModel)
    items: list[str] | None = None
    n_items: int | None = None
    # optional true coordinates; when present, snapshots include rank-agreement
    truth_features: list[list[float]] | None = None


class CreateSessionResponse(BaseModel):
    session_id: str
    n_items: int
    query_length: int
    burn_in: int
    cycles: int


class ItemCard(BaseModel):
    id: int
    name: str


class QueryPayload(BaseModel):
    reference: ItemCard
    candidates: list[ItemCard]


class NextQueryResponse(BaseModel):
    session_id: str
    cycle: int
    queries_answered: int
    phase: str  # burn_in | active | done
    done: bool
    query: QueryPayload | None


class SubmitRequest(BaseModel):
    winner: int


class SubmitResponse(BaseModel):
    ok: bool
    cycle: int
    queries_answered: int


class SnapshotResponse(BaseModel):
    session_id: str
    cycle: int
    queries_answered: int
    names: list[str]
    projection: list[list[float]]
    metrics: dict[str, list[float]]
