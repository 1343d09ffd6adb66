import json
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

import isingart.service as service_mod
from isingart.imaging import encode_png
from isingart.service import JobManager, create_app


def make_image(seed=31, w=48, h=36):
    rng = np.random.default_rng(seed)
    return encode_png(Image.fromarray(rng.integers(0, 256, (h, w, 3), dtype=np.uint8)))


def base_request(**overrides):
    doc = {
        "mode": "row",
        "grid": {"rows": 3, "columns": 4, "origin_row": "bottom"},
        "seed": 5,
        "shots": 64,
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def client(tmp_path):
    app = create_app(workspace=tmp_path / "ws")
    with TestClient(app) as tc:
        yield tc
    app.state.manager.shutdown()


def submit(client, request_doc=None, image=None):
    response = client.post(
        "/api/runs",
        files={"image": ("input.png", image or make_image(), "image/png")},
        data={"request": json.dumps(request_doc or base_request())},
    )
    return response


def wait_done(client, run_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/api/runs/{run_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.02)
    raise TimeoutError(f"run {run_id} did not finish")


def test_submit_poll_fetch(client):
    response = submit(client)
    assert response.status_code == 200
    run_id = response.json()["id"]
    status = wait_done(client, run_id)
    assert status["state"] == "done", status["error"]
    assert status["progress"]["completed"] == status["progress"]["total"] == 3
    image = client.get(f"/api/runs/{run_id}/image")
    assert image.status_code == 200
    assert image.headers["content-type"] == "image/png"
    sidecar = client.get(f"/api/runs/{run_id}/sidecar")
    assert sidecar.status_code == 200
    doc = json.loads(sidecar.content)
    assert doc["format"] == "qmplan/1"
    trace = client.get(f"/api/runs/{run_id}/trace").json()
    assert len(trace["traces"]["trace"]) == 3


def test_unknown_run_is_404(client):
    assert client.get("/api/runs/deadbeef").status_code == 404
    assert client.get("/api/runs/deadbeef/image").status_code == 404
    assert client.delete("/api/runs/deadbeef").status_code == 404


def test_invalid_requests_are_400(client):
    response = client.post(
        "/api/runs",
        files={"image": ("input.png", make_image(), "image/png")},
        data={"request": "{broken"},
    )
    assert response.status_code == 400
    response = submit(client, base_request(mode="nonsense"))
    assert response.status_code == 400
    response = client.post(
        "/api/runs",
        files={"image": ("input.png", b"", "image/png")},
        data={"request": json.dumps(base_request())},
    )
    assert response.status_code == 400


def test_failed_run_reports_error(client):
    # grid larger than the image cannot be sliced
    response = submit(client, base_request(grid={"rows": 100, "columns": 100}))
    assert response.status_code == 200
    status = wait_done(client, response.json()["id"])
    assert status["state"] == "failed"
    assert "grid" in status["error"] or "pixels" in status["error"]


def test_delete_semantics(client, monkeypatch):
    run_id = submit(client).json()["id"]
    wait_done(client, run_id)
    assert client.delete(f"/api/runs/{run_id}").status_code == 200
    assert client.get(f"/api/runs/{run_id}").status_code == 404

    # a slow job cannot be deleted while in flight
    gate = threading.Event()
    original = service_mod.run_transform

    def slow_transform(request, image, progress=None):
        gate.wait(timeout=10)
        return original(request, image, progress=progress)

    monkeypatch.setattr(service_mod, "run_transform", slow_transform)
    run_id = submit(client).json()["id"]
    try:
        assert client.delete(f"/api/runs/{run_id}").status_code == 409
    finally:
        gate.set()
    wait_done(client, run_id)
    assert client.delete(f"/api/runs/{run_id}").status_code == 200


def test_concurrent_runs_are_isolated(client):
    # dt large enough that different couplings visibly reorder the tiles
    def request(seed):
        return base_request(seed=seed, shots=None, schedule={"dt": 0.5})

    ids = {}
    for seed in range(4):
        response = submit(client, request(seed))
        assert response.status_code == 200
        ids[seed] = response.json()["id"]
    images = {}
    for seed, run_id in ids.items():
        status = wait_done(client, run_id)
        assert status["state"] == "done", status["error"]
        images[seed] = client.get(f"/api/runs/{run_id}/image").content
    # different seeds give different outputs, and each matches a direct run
    assert len(set(images.values())) == 4
    from isingart.pipeline import RunRequest, run_transform

    for seed in range(4):
        direct = run_transform(RunRequest.from_dict(request(seed)), make_image())
        assert images[seed] == direct.png_bytes


def test_restart_preserves_completed_runs(tmp_path):
    ws = tmp_path / "ws"
    app = create_app(workspace=ws)
    with TestClient(app) as tc:
        run_id = submit(tc).json()["id"]
        status = wait_done(tc, run_id)
        assert status["state"] == "done"
        image_bytes = tc.get(f"/api/runs/{run_id}/image").content
    app.state.manager.shutdown()

    # simulate a crash that left another run mid-flight
    stale_dir = ws / "stale0000"
    stale_dir.mkdir()
    (stale_dir / "status.json").write_text(
        json.dumps({"id": "stale0000", "state": "running",
                    "progress": {"completed": 1, "total": 3},
                    "error": None, "result": None})
    )

    app2 = create_app(workspace=ws)
    with TestClient(app2) as tc:
        status = tc.get(f"/api/runs/{run_id}").json()
        assert status["state"] == "done"
        assert tc.get(f"/api/runs/{run_id}/image").content == image_bytes
        stale = tc.get("/api/runs/stale0000").json()
        assert stale["state"] == "failed"
        assert "restart" in stale["error"]
    app2.state.manager.shutdown()


def test_run_listing(client):
    first = submit(client).json()["id"]
    second = submit(client).json()["id"]
    wait_done(client, first)
    wait_done(client, second)
    listed = {run["id"] for run in client.get("/api/runs").json()}
    assert {first, second} <= listed


def test_terminal_status_files_are_final(tmp_path):
    manager = JobManager(tmp_path / "ws", max_workers=1)
    run_id = manager.submit(base_request(shots=None), make_image())
    deadline = time.time() + 30
    while manager.status(run_id)["state"] not in ("done", "failed"):
        assert time.time() < deadline
        time.sleep(0.02)
    manager._update(run_id, state="queued")  # ignored: terminal is immutable
    assert manager.status(run_id)["state"] == "done"
    manager.shutdown()
