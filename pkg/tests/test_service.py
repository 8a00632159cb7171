"""HTTP API behavior, driven through an in-process test client."""
from __future__ import annotations

import pytest
from fastapi.testclient import TestClient

from cfdrepair.service import create_app
from cfdrepair.session import Session, SessionConfig


@pytest.fixture
def harness(demo, rules, truth):
    def build(learning: bool = True, **overrides):
        config = SessionConfig(strategy="gdr", **overrides)
        session = Session(demo.copy(), rules, truth, config, learning=learning)
        return TestClient(create_app(session)), session

    return build


def _groups(client) -> list[dict]:
    response = client.get("/api/groups")
    assert response.status_code == 200
    return response.json()["groups"]


def _gid(client, attribute: str, value: str) -> str:
    for g in _groups(client):
        if (g["attribute"], g["value"]) == (attribute, value):
            return g["id"]
    raise AssertionError(f"no live group for ({attribute}, {value})")


def test_session_snapshot(harness):
    client, session = harness()
    doc = client.get("/api/session").json()
    assert doc["version"] == 1
    assert doc["config"]["strategy"] == "gdr"
    assert doc["attributes"] == ["NAME", "HN", "STR", "CT", "STT", "ZIP"]
    assert doc["tuples"] == 8
    assert doc["initial"] == {"dirty_tuples": 8, "violations": 10.0, "pending": 16}
    assert doc["trained_attributes"] == []
    assert doc["selected_group"] is None
    assert doc["metrics"] == session.metrics()


def test_group_listing(harness):
    client, _ = harness()
    groups = _groups(client)
    assert [g["rank"] for g in groups] == list(range(1, 9))
    assert len({g["id"] for g in groups}) == len(groups)
    top = groups[0]
    assert (top["id"], top["attribute"], top["value"], top["size"]) == (
        "g1",
        "ZIP",
        "46391",
        6,
    )
    assert top["gain"] == pytest.approx(0.95, abs=1e-9)
    assert top["budget"] == 0
    assert top["selected"] is False
    for g in groups:
        assert 0 <= g["budget"] <= g["size"]
    # ids are sticky while the key stays alive
    assert [g["id"] for g in _groups(client)] == [g["id"] for g in groups]


def test_group_ids_come_from_listings(harness):
    """An id the service never handed out in a listing does not resolve,
    even if it is the one the first listing would assign."""
    client, _ = harness()
    assert client.post("/api/groups/g1/select").status_code == 404
    _groups(client)
    assert client.post("/api/groups/g1/select").status_code == 200


def test_select_and_updates(harness):
    client, _ = harness()
    _groups(client)
    response = client.post("/api/groups/g1/select")
    assert response.status_code == 200
    doc = response.json()
    assert doc["selected"] == "g1"
    assert [u["tuple_id"] for u in doc["updates"]] == ["t6", "t7", "t1", "t2", "t3", "t4"]
    first = doc["updates"][0]
    assert first["attribute"] == "ZIP"
    assert first["suggested_value"] == "46391"
    assert first["current_value"] == "46825"
    assert first["update_id"] == "t6:ZIP:0"
    assert first["prediction"] is None
    assert first["tuple"]["cells"]["CT"] == "FORT WAYNE"
    assert first["rules"]

    assert client.get("/api/session").json()["selected_group"] == "g1"
    assert [g["selected"] for g in _groups(client)] == [g["id"] == "g1" for g in _groups(client)]

    again = client.get("/api/groups/g1/updates")
    assert again.status_code == 200
    assert again.json()["group"] == "g1"
    assert [u["update_id"] for u in again.json()["updates"]] == [
        u["update_id"] for u in doc["updates"]
    ]


def test_unknown_group_404(harness):
    client, _ = harness()
    assert client.post("/api/groups/g99/select").status_code == 404
    assert client.get("/api/groups/g99/updates").status_code == 404
    assert client.post("/api/groups/g99/delegate").status_code == 404


def test_feedback_cascade(harness):
    client, session = harness()
    westville_gid = _gid(client, "CT", "WESTVILLE")
    assert _gid(client, "CT", "FT WAYNE")

    updates = client.post("/api/groups/g1/select").json()["updates"]
    t6_zip = next(u for u in updates if u["tuple_id"] == "t6")
    response = client.post(
        "/api/feedback", json={"update_id": t6_zip["update_id"], "kind": "confirm"}
    )
    assert response.status_code == 200
    doc = response.json()
    assert doc["event"]["kind"] == "confirm"
    assert doc["event"]["tuple_id"] == "t6"
    assert doc["event"]["writes"] == [["t6", "ZIP", "46825", "46391", False]]
    assert doc["discarded"]
    assert doc["created"]
    assert doc["metrics"]["user_labels"] == 1

    # the confirmed zip moved t6 into the westville context: its city
    # suggestion switched groups, and the old group shrank
    groups = {(g["attribute"], g["value"]): g for g in _groups(client)}
    assert groups[("CT", "WESTVILLE")]["id"] == westville_gid
    assert groups[("CT", "WESTVILLE")]["size"] == 2
    assert groups[("CT", "FT WAYNE")]["size"] == 1
    assert ("ZIP", "46391") not in groups or groups[("ZIP", "46391")]["size"] == 5


def test_feedback_validation(harness):
    client, _ = harness()
    _groups(client)
    wire = client.post("/api/groups/g1/select").json()["updates"][0]["update_id"]

    assert client.post("/api/feedback", json={"update_id": wire}).status_code == 400
    assert (
        client.post(
            "/api/feedback", json={"update_id": wire, "kind": "approve"}
        ).status_code
        == 400
    )
    assert (
        client.post(
            "/api/feedback", json={"update_id": wire, "kind": "replace"}
        ).status_code
        == 400
    )
    assert (
        client.post(
            "/api/feedback",
            json={"update_id": wire, "kind": "confirm", "new_value": "X"},
        ).status_code
        == 400
    )
    assert (
        client.post("/api/feedback", json={"update_id": 7, "kind": "confirm"}).status_code
        == 400
    )
    assert client.post("/api/feedback", json=["nope"]).status_code == 400
    assert (
        client.post(
            "/api/feedback",
            content="not json",
            headers={"content-type": "application/json"},
        ).status_code
        == 400
    )


def test_feedback_stale_409(harness):
    client, _ = harness()
    _groups(client)
    wire = client.post("/api/groups/g1/select").json()["updates"][0]["update_id"]
    assert (
        client.post("/api/feedback", json={"update_id": wire, "kind": "confirm"}).status_code
        == 200
    )
    assert (
        client.post("/api/feedback", json={"update_id": wire, "kind": "confirm"}).status_code
        == 409
    )
    assert (
        client.post("/api/feedback", json={"update_id": "garbage", "kind": "confirm"}).status_code
        == 409
    )


def test_replace_writes_the_given_value(harness):
    client, session = harness()
    gid = _gid(client, "CT", "NEW HAVEN")
    update = client.get(f"/api/groups/{gid}/updates").json()["updates"][0]
    response = client.post(
        "/api/feedback",
        json={"update_id": update["update_id"], "kind": "replace", "new_value": "NEW HAVEN"},
    )
    assert response.status_code == 200
    assert session.state.dataset.value("t8", "CT") == "NEW HAVEN"


def test_event_polling(harness):
    client, _ = harness()
    empty = client.get("/api/events").json()
    assert empty == {"cursor": 0, "events": []}

    _groups(client)
    updates = client.post("/api/groups/g1/select").json()["updates"]
    for u in updates[:2]:
        client.post("/api/feedback", json={"update_id": u["update_id"], "kind": "retain"})

    log = client.get("/api/events").json()
    assert log["cursor"] == 2
    assert [e["index"] for e in log["events"]] == [0, 1]
    tail = client.get("/api/events", params={"since": 1}).json()
    assert [e["index"] for e in tail["events"]] == [1]
    assert client.get("/api/events", params={"since": 5}).json()["events"] == []
    assert client.get("/api/events", params={"since": -1}).status_code == 400


def test_delegate_conflicts(harness):
    client, _ = harness(learning=False)
    _groups(client)
    assert client.post("/api/groups/g1/delegate").status_code == 409

    learning_client, _ = harness()
    _groups(learning_client)
    response = learning_client.post("/api/groups/g1/delegate")
    assert response.status_code == 409
    assert "no trained model" in response.json()["detail"]


def test_delegate_after_training(harness):
    client, session = harness(min_examples=4, threshold=0.0)
    confirmed = 0
    mc_gid = _gid(client, "CT", "MICHIGAN CITY")
    for u in client.get(f"/api/groups/{mc_gid}/updates").json()["updates"]:
        assert (
            client.post(
                "/api/feedback", json={"update_id": u["update_id"], "kind": "confirm"}
            ).status_code
            == 200
        )
        confirmed += 1
    nh_gid = _gid(client, "CT", "NEW HAVEN")
    nh = client.get(f"/api/groups/{nh_gid}/updates").json()["updates"][0]
    client.post("/api/feedback", json={"update_id": nh["update_id"], "kind": "reject"})
    assert confirmed + 1 == 4

    fw_gid = _gid(client, "CT", "FT WAYNE")
    client.post(f"/api/groups/{fw_gid}/select")
    response = client.post(f"/api/groups/{fw_gid}/delegate")
    assert response.status_code == 200
    doc = response.json()
    assert doc["decided"] == 2
    assert doc["metrics"]["user_labels"] == 4

    assert client.get("/api/session").json()["trained_attributes"] == ["CT"]
    # the decided group is gone; the next listing also drops the selection
    assert ("CT", "FT WAYNE") not in {
        (g["attribute"], g["value"]) for g in _groups(client)
    }
    assert client.get(f"/api/groups/{fw_gid}/updates").status_code == 404
    assert client.get("/api/session").json()["selected_group"] is None
    model_events = [e for e in session.events if e["source"] == "model"]
    assert len(model_events) == 2
