"""HTTP session service.

Exposes one interactive repair session over a small JSON API so a
browser console (or any other client) can review suggested updates,
give feedback, and delegate groups to the trained models.

Routes:

* ``GET  /api/session``              session status, config, metrics
* ``GET  /api/groups``               current group ranking with budgets
* ``POST /api/groups/{id}/select``   mark a group as under review
* ``GET  /api/groups/{id}/updates``  its members, most uncertain first
* ``POST /api/feedback``             apply one feedback decision
* ``POST /api/groups/{id}/delegate`` let the trained model decide a group
* ``GET  /api/events?since=N``       feedback event log, for polling

Update ids on the wire name the cell and the generation at which the
suggestion was made, so feedback on a suggestion that has since been
regenerated is rejected with 409 rather than silently applied.
"""
from __future__ import annotations

import threading

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware

from .consistency import FEEDBACK_KINDS, Feedback, StaleFeedbackError
from .learner import order_by_uncertainty
from .model import Dataset
from .ranking import UpdateGroup, group_budget
from .rules import parse_rules_file
from .session import Session, SessionConfig
from .state import CandidateUpdate


class _GroupIds:
    """Stable public ids for update groups.  A group keeps its id for
    as long as its (attribute, value) key stays alive; a key that
    disappears and later reappears gets a fresh id."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[str, str], str] = {}
        self._by_id: dict[str, tuple[str, str]] = {}
        self._seq = 0

    def id_for(self, key: tuple[str, str]) -> str:
        gid = self._by_key.get(key)
        if gid is None:
            self._seq += 1
            gid = f"g{self._seq}"
            self._by_key[key] = gid
            self._by_id[gid] = key
        return gid

    def key_for(self, gid: str) -> tuple[str, str] | None:
        return self._by_id.get(gid)

    def prune(self, live_keys: set[tuple[str, str]]) -> None:
        for key in list(self._by_key):
            if key not in live_keys:
                gid = self._by_key.pop(key)
                self._by_id.pop(gid, None)


def create_app(session: Session) -> FastAPI:
    app = FastAPI(docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    lock = threading.Lock()
    group_ids = _GroupIds()
    selected: dict[str, str | None] = {"gid": None}

    def ranked_groups() -> list[UpdateGroup]:
        groups = session.ranker.ranked()
        group_ids.prune({g.key for g in groups})
        if selected["gid"] is not None and group_ids.key_for(selected["gid"]) is None:
            selected["gid"] = None
        return groups

    def group_view(group: UpdateGroup, rank: int, g_max: float) -> dict:
        gid = group_ids.id_for(group.key)
        return {
            "id": gid,
            "rank": rank,
            "attribute": group.attribute,
            "value": group.value,
            "size": group.size,
            "gain": group.gain,
            "budget": group_budget(group, session.initial_dirty, g_max),
            "selected": gid == selected["gid"],
        }

    def update_view(candidate: CandidateUpdate) -> dict:
        t = session.state.dataset.tuple(candidate.tuple_id)
        prediction = None
        if session.learner is not None:
            p = session.learner.predict(session.state, candidate)
            if p is not None:
                prediction = {
                    "label": p.label,
                    "confirm_prob": p.confirm_prob,
                    "uncertainty": p.uncertainty,
                }
        return {
            "update_id": session.wire_id(candidate),
            "tuple_id": candidate.tuple_id,
            "attribute": candidate.attribute,
            "current_value": t.cells[candidate.attribute],
            "suggested_value": candidate.value,
            "score": candidate.score,
            "scenario": candidate.scenario,
            "rules": list(candidate.rule_ids),
            "tuple": {"id": t.id, "weight": t.weight, "cells": dict(t.cells)},
            "prediction": prediction,
        }

    def member_views(key: tuple[str, str]) -> list[dict]:
        members = session.live_members(key)
        if session.learner is not None:
            members = order_by_uncertainty(session.state, members, session.learner)
        return [update_view(c) for c in members]

    def resolve_group(gid: str) -> tuple[str, str]:
        ranked_groups()
        key = group_ids.key_for(gid)
        if key is None:
            raise HTTPException(status_code=404, detail=f"no such group: {gid}")
        return key

    @app.get("/api/session")
    async def get_session() -> dict:
        with lock:
            cfg = session.config
            trained = []
            if session.learner is not None:
                trained = [
                    a
                    for a in session.state.dataset.schema.attributes
                    if session.learner.is_trained(a)
                ]
            return {
                "version": 1,
                "config": {
                    "strategy": cfg.strategy,
                    "budget": cfg.budget,
                    "batch_size": cfg.batch_size,
                    "seed": cfg.seed,
                    "threshold": cfg.threshold,
                    "k_reveal": cfg.k_reveal,
                },
                "attributes": list(session.state.dataset.schema.attributes),
                "tuples": len(session.state.dataset.tuples),
                "initial": {
                    "dirty_tuples": session.initial_dirty,
                    "violations": session.initial_violations,
                    "pending": session.initial_pending,
                },
                "trained_attributes": trained,
                "selected_group": selected["gid"],
                "metrics": session.metrics(),
            }

    @app.get("/api/groups")
    async def get_groups() -> dict:
        with lock:
            groups = ranked_groups()
            g_max = groups[0].gain if groups else 0.0
            return {
                "groups": [group_view(g, i + 1, g_max) for i, g in enumerate(groups)]
            }

    @app.post("/api/groups/{gid}/select")
    async def select_group(gid: str) -> dict:
        with lock:
            key = resolve_group(gid)
            selected["gid"] = gid
            return {"selected": gid, "updates": member_views(key)}

    @app.get("/api/groups/{gid}/updates")
    async def get_updates(gid: str) -> dict:
        with lock:
            key = resolve_group(gid)
            return {"group": gid, "updates": member_views(key)}

    @app.post("/api/feedback")
    async def post_feedback(request: Request) -> dict:
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(status_code=400, detail="body must be JSON")
        if not isinstance(body, dict):
            raise HTTPException(status_code=400, detail="body must be a JSON object")
        update_id = body.get("update_id")
        kind = body.get("kind")
        new_value = body.get("new_value")
        if not isinstance(update_id, str) or not update_id:
            raise HTTPException(status_code=400, detail="update_id must be a string")
        if kind not in FEEDBACK_KINDS:
            raise HTTPException(
                status_code=400,
                detail=f"kind must be one of {', '.join(FEEDBACK_KINDS)}",
            )
        if kind == "replace":
            if not isinstance(new_value, str):
                raise HTTPException(
                    status_code=400, detail="replace feedback needs new_value"
                )
        elif new_value is not None:
            raise HTTPException(
                status_code=400, detail="new_value is only valid with replace"
            )
        with lock:
            try:
                candidate = session.resolve_wire_id(update_id)
            except StaleFeedbackError as err:
                raise HTTPException(status_code=409, detail=str(err))
            result = session.apply(candidate, Feedback(kind, new_value), "user")
            return {
                "event": session.events[-1],
                "discarded": list(result.discarded),
                "created": list(result.created),
                "metrics": session.metrics(),
            }

    @app.post("/api/groups/{gid}/delegate")
    async def delegate_group(gid: str) -> dict:
        with lock:
            key = resolve_group(gid)
            if session.learner is None:
                raise HTTPException(status_code=409, detail="learning is disabled")
            session.learner.retrain()
            attribute = key[0]
            if not session.learner.is_trained(attribute):
                raise HTTPException(
                    status_code=409,
                    detail=f"no trained model for attribute {attribute} yet",
                )
            decided = session.delegate_members(session.live_members(key))
            return {"decided": decided, "metrics": session.metrics()}

    @app.get("/api/events")
    async def get_events(since: int = 0) -> dict:
        if since < 0:
            raise HTTPException(status_code=400, detail="since must be >= 0")
        with lock:
            return {
                "cursor": len(session.events),
                "events": session.events[since:],
            }

    return app


def create_app_from_files(
    data_path: str,
    rules_path: str,
    truth_path: str | None = None,
    config: SessionConfig | None = None,
) -> FastAPI:
    dataset = Dataset.from_csv(data_path)
    rules = parse_rules_file(rules_path, dataset.schema)
    truth = Dataset.from_csv(truth_path) if truth_path else None
    session = Session(
        dataset, rules, truth, config or SessionConfig(strategy="gdr"), learning=True
    )
    return create_app(session)
