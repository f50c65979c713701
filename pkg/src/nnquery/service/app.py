"""HTTP session API for a live human oracle.

Endpoints:
    POST /sessions                      create a session
    GET  /sessions/{id}/next-query      the query to answer (idempotent)
    POST /sessions/{id}/responses       submit the 1-based winner index
    GET  /sessions/{id}/snapshot        2-D projection + metric series

One query is outstanding per session at a time; submitting advances the
cycle, refits the embedding, and clears the pending query. Responses are
serialized per session, snapshots read the last committed state.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles

from .schemas import (
    CreateSessionRequest,
    CreateSessionResponse,
    ItemCard,
    NextQueryResponse,
    QueryPayload,
    SnapshotResponse,
    SubmitRequest,
    SubmitResponse,
)
from .sessions import Session, SessionStore


def create_app(session_dir: str | Path | None = None, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="nnquery session service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(session_dir)
    app.state.store = store

    def get_session(session_id: str) -> Session:
        try:
            return store.get(session_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(request: CreateSessionRequest) -> CreateSessionResponse:
        if request.items is not None:
            names = list(request.items)
        elif request.n_items is not None:
            names = [f"item {i}" for i in range(request.n_items)]
        else:
            raise HTTPException(status_code=400, detail="provide items or n_items")
        if len(names) < 2:
            raise HTTPException(status_code=400, detail="need at least 2 items")
        truth = None
        if request.truth_features is not None:
            truth = np.array(request.truth_features, dtype=np.float64)
            if truth.shape[0] != len(names):
                raise HTTPException(
                    status_code=400, detail="truth_features must cover every item"
                )
        try:
            session = store.create(request.config, names, truth)
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        return CreateSessionResponse(
            session_id=session.session_id,
            n_items=len(names),
            query_length=session.config_model.query_length,
            burn_in=session.config_model.burn_in,
            cycles=session.config_model.cycles,
        )

    @app.get("/sessions/{session_id}/next-query", response_model=NextQueryResponse)
    def next_query(session_id: str) -> NextQueryResponse:
        session = get_session(session_id)
        query = session.next_query()
        store.save(session)
        payload = None
        if query is not None:
            payload = QueryPayload(
                reference=ItemCard(id=query.reference, name=session.names[query.reference]),
                candidates=[
                    ItemCard(id=c, name=session.names[c]) for c in query.candidates
                ],
            )
        return NextQueryResponse(
            session_id=session_id,
            cycle=session.engine.cycle,
            queries_answered=session.engine.answered,
            phase=session.phase,
            done=session.engine.done,
            query=payload,
        )

    @app.post("/sessions/{session_id}/responses", response_model=SubmitResponse)
    def submit_response(session_id: str, request: SubmitRequest) -> SubmitResponse:
        session = get_session(session_id)
        try:
            session.submit(request.winner)
        except LookupError as e:
            raise HTTPException(status_code=409, detail=str(e))
        except ValueError as e:
            raise HTTPException(status_code=400, detail=str(e))
        store.save(session)
        return SubmitResponse(
            ok=True,
            cycle=session.engine.cycle,
            queries_answered=session.engine.answered,
        )

    @app.get("/sessions/{session_id}/snapshot", response_model=SnapshotResponse)
    def snapshot(session_id: str) -> SnapshotResponse:
        session = get_session(session_id)
        return SnapshotResponse(**session.snapshot())

    ui_dir = ui_dir or os.environ.get("NNQUERY_UI_DIR")
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
