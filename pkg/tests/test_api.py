"""Tests for the HTTP API: experiments, comparisons, fault plans, metrics and health."""

import pytest
from httpx import ASGITransport, AsyncClient

from src.main import app


@pytest.fixture
async def client():
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as c:
        yield c


def _faults(*entries: tuple[int, int]) -> dict:
    return {"injections": [{"rank": r, "outer_iteration": t} for r, t in entries]}


async def test_health(client):
    response = await client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"


async def test_run_fault_free_experiment(client, make_document):
    response = await client.post("/api/v1/experiments", json=make_document())
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["P"] == 4 and body["strategy"] == "shrink" and body["failures"] == 0
    assert body["slowdown"] > 1.0
    assert body["checkpoints_taken"] > 0
    assert body["relative_residual"] <= 1e-8
    assert body["recoveries"] == []


async def test_run_experiment_with_a_failure(client, make_document):
    response = await client.post("/api/v1/experiments", json=make_document(faults=_faults((3, 1))))
    assert response.status_code == 200
    body = response.json()
    assert body["failures"] == 1
    assert body["unfired_failures"] == 0
    (recovery,) = body["recoveries"]
    assert recovery["failed"] == [3]
    assert recovery["tag"] == 1
    assert body["t_pfd_s"] > 0 and body["t_recompute_s"] > 0


async def test_unrecoverable_run_is_a_result_not_an_error(client, make_document):
    doc = make_document(allow_unsurvivable_plans=True, faults=_faults((1, 1), (2, 1)))
    response = await client.post("/api/v1/experiments", json=doc)
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "unrecoverable"
    assert body["relative_residual"] is None
    assert body["reason"]


@pytest.mark.parametrize(
    "overrides",
    [
        {"checkpoint": {"interval": 2}},
        {"world": {"processes": 0}},
        {"strategy": "restart"},
        {"strategy": "substitute", "preset": {"name": "worst_case_substitute", "k": 1}},
    ],
)
async def test_invalid_documents_are_rejected(client, make_document, overrides):
    response = await client.post("/api/v1/experiments", json=make_document(**overrides))
    assert response.status_code == 422


async def test_fault_plan_outside_the_world_is_rejected(client, make_document):
    response = await client.post("/api/v1/experiments", json=make_document(faults=_faults((9, 1))))
    assert response.status_code == 422
    assert "rank 9" in response.json()["detail"]


async def test_compare_shrink_and_substitute(client, make_document):
    shrink = make_document(preset={"name": "worst_case_shrink", "k": 1})
    substitute = make_document(
        strategy="substitute", world={"spares": 1}, preset={"name": "worst_case_substitute", "k": 1}
    )
    response = await client.post("/api/v1/experiments/compare", json={"experiments": [shrink, substitute]})
    assert response.status_code == 200
    body = response.json()
    assert [r["strategy"] for r in body["rows"]] == ["shrink", "substitute"]
    (point,) = body["comparisons"]
    assert (point["P"], point["failures"]) == (4, 1)
    assert point["slowdown_ratio"] == pytest.approx(point["slowdown_shrink"] / point["slowdown_substitute"])


async def test_compare_needs_pairs(client, make_document):
    response = await client.post("/api/v1/experiments/compare", json={"experiments": [make_document()]})
    assert response.status_code == 422
    two_shrinks = [make_document(), make_document(name="again")]
    response = await client.post("/api/v1/experiments/compare", json={"experiments": two_shrinks})
    assert response.status_code == 422


async def test_generated_plans(client):
    response = await client.get("/api/v1/plans/worst_case_shrink", params={"p": 8, "k": 2})
    assert response.status_code == 200
    body = response.json()
    assert body["preset"] == "worst_case_shrink"
    assert [(i["rank"], i["outer_iteration"]) for i in body["injections"]] == [(7, 1), (6, 2)]

    response = await client.get(
        "/api/v1/plans/worst_case_substitute", params={"p": 8, "k": 2, "cores_per_node": 2, "spares": 2}
    )
    assert [i["rank"] for i in response.json()["injections"]] == [7, 5]


async def test_plan_errors(client):
    assert (await client.get("/api/v1/plans/everything", params={"p": 8, "k": 1})).status_code == 422
    assert (await client.get("/api/v1/plans/random", params={"p": 4, "k": 4})).status_code == 422


async def test_metrics_after_a_run(client, make_document):
    await client.post("/api/v1/experiments", json=make_document(faults=_faults((2, 1))))
    response = await client.get("/metrics")
    assert response.status_code == 200
    text = response.text
    assert "ckpt_sim_experiments_total" in text
    assert "ckpt_sim_recoveries_total" in text
    assert "ckpt_sim_request_duration_seconds" in text
