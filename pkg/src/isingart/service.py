"""HTTP job service around the transformation pipeline.

Jobs run on a small worker pool and are persisted as plain files, one
directory per run id (request, input, output, sidecar, status). Completed
runs survive a restart; runs that were still in flight are marked failed.
"""
from __future__ import annotations

import json
import os
import shutil
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.responses import JSONResponse, Response

from .pipeline import RunRequest, run_transform

__all__ = ["JobManager", "create_app", "DEFAULT_WORKSPACE_ENV"]

DEFAULT_WORKSPACE_ENV = "ISINGART_WORKSPACE"
TERMINAL_STATES = ("done", "failed")


def default_workspace() -> Path:
    return Path(os.environ.get(DEFAULT_WORKSPACE_ENV, "isingart-workspace"))


class JobManager:
    """Append-only run registry plus a worker pool executing requests."""

    def __init__(self, workspace: Path, max_workers: int = 4):
        self.workspace = Path(workspace)
        self.workspace.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._jobs: dict[str, dict] = {}
        self._pool = ThreadPoolExecutor(max_workers=max_workers)
        self._recover()

    # ------------------------------------------------------------- storage

    def run_dir(self, run_id: str) -> Path:
        return self.workspace / run_id

    def _write_status(self, run_id: str, status: dict) -> None:
        path = self.run_dir(run_id) / "status.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(status, indent=2) + "\n")
        tmp.replace(path)

    def _recover(self) -> None:
        for entry in sorted(self.workspace.iterdir()) if self.workspace.exists() else []:
            status_file = entry / "status.json"
            if not entry.is_dir() or not status_file.is_file():
                continue
            try:
                status = json.loads(status_file.read_text())
            except (OSError, json.JSONDecodeError):
                continue
            if status.get("state") not in TERMINAL_STATES:
                status["state"] = "failed"
                status["error"] = "service restarted while the run was in flight"
                self._write_status(status["id"], status)
            self._jobs[status["id"]] = status

    # ------------------------------------------------------------- lifecycle

    def submit(self, request_doc: dict, image_bytes: bytes) -> str:
        try:
            request = RunRequest.from_dict(request_doc)
            resolved = request.resolve()
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"invalid run request: {exc}") from exc
        run_id = uuid.uuid4().hex[:12]
        rdir = self.run_dir(run_id)
        rdir.mkdir(parents=True)
        (rdir / "request.json").write_text(
            json.dumps(resolved.to_dict(), indent=2, sort_keys=True) + "\n"
        )
        (rdir / "input.png").write_bytes(image_bytes)
        slices = resolved.num_steps + 1
        total = 2 * slices if resolved.mode == "mirrored" else slices
        status = {
            "id": run_id,
            "state": "queued",
            "progress": {"completed": 0, "total": total},
            "error": None,
            "result": None,
        }
        with self._lock:
            self._jobs[run_id] = status
            self._write_status(run_id, status)
        self._pool.submit(self._execute, run_id)
        return run_id

    def _update(self, run_id: str, **changes) -> None:
        with self._lock:
            status = self._jobs[run_id]
            if status["state"] in TERMINAL_STATES:
                return  # terminal states are immutable
            status.update(changes)
            self._write_status(run_id, status)

    def _execute(self, run_id: str) -> None:
        rdir = self.run_dir(run_id)
        self._update(run_id, state="running")
        try:
            request = RunRequest.from_dict(
                json.loads((rdir / "request.json").read_text())
            )
            result = run_transform(
                request,
                (rdir / "input.png").read_bytes(),
                progress=lambda done, total: self._update(
                    run_id, progress={"completed": done, "total": total}
                ),
            )
            (rdir / "output.png").write_bytes(result.png_bytes)
            (rdir / "output.qmplan").write_text(result.sidecar_text)
            self._update(
                run_id,
                state="done",
                progress={"completed": result.total_slices, "total": result.total_slices},
                result={
                    "image": f"/api/runs/{run_id}/image",
                    "sidecar": f"/api/runs/{run_id}/sidecar",
                    "trace": f"/api/runs/{run_id}/trace",
                },
            )
        except Exception as exc:  # surfaced verbatim through the status record
            self._update(run_id, state="failed", error=f"{type(exc).__name__}: {exc}")

    # ------------------------------------------------------------- queries

    def status(self, run_id: str) -> dict:
        with self._lock:
            if run_id not in self._jobs:
                raise KeyError(run_id)
            return dict(self._jobs[run_id])

    def list_runs(self) -> list[dict]:
        with self._lock:
            return [dict(s) for s in self._jobs.values()]

    def artifact(self, run_id: str, name: str) -> bytes:
        status = self.status(run_id)
        path = self.run_dir(run_id) / name
        if status["state"] != "done" or not path.is_file():
            raise FileNotFoundError(name)
        return path.read_bytes()

    def delete(self, run_id: str) -> None:
        with self._lock:
            if run_id not in self._jobs:
                raise KeyError(run_id)
            if self._jobs[run_id]["state"] not in TERMINAL_STATES:
                raise RuntimeError("run is still in flight")
            del self._jobs[run_id]
        shutil.rmtree(self.run_dir(run_id), ignore_errors=True)

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)


def create_app(workspace: Path | None = None, ui_dir: Path | None = None) -> FastAPI:
    app = FastAPI(title="isingart", version="0.1.0")
    manager = JobManager(workspace or default_workspace())
    app.state.manager = manager

    def found(run_id: str) -> dict:
        try:
            return manager.status(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")

    @app.post("/api/runs")
    async def create_run(
        image: UploadFile = File(...), request: str = Form(...)
    ) -> dict:
        try:
            doc = json.loads(request)
        except json.JSONDecodeError as exc:
            raise HTTPException(status_code=400, detail=f"request is not JSON: {exc}")
        data = await image.read()
        if not data:
            raise HTTPException(status_code=400, detail="empty image upload")
        try:
            run_id = manager.submit(doc, data)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"id": run_id}

    @app.get("/api/runs")
    def list_runs() -> list[dict]:
        return manager.list_runs()

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str) -> dict:
        return found(run_id)

    @app.get("/api/runs/{run_id}/image")
    def run_image(run_id: str) -> Response:
        found(run_id)
        try:
            return Response(manager.artifact(run_id, "output.png"), media_type="image/png")
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="run has no image yet")

    @app.get("/api/runs/{run_id}/input")
    def run_input(run_id: str) -> Response:
        found(run_id)
        path = manager.run_dir(run_id) / "input.png"
        if not path.is_file():
            raise HTTPException(status_code=404, detail="no input stored")
        return Response(path.read_bytes(), media_type="image/png")

    @app.get("/api/runs/{run_id}/sidecar")
    def run_sidecar(run_id: str) -> Response:
        found(run_id)
        try:
            data = manager.artifact(run_id, "output.qmplan")
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="run has no sidecar yet")
        return Response(data, media_type="application/json")

    @app.get("/api/runs/{run_id}/trace")
    def run_trace(run_id: str) -> JSONResponse:
        found(run_id)
        try:
            doc = json.loads(manager.artifact(run_id, "output.qmplan"))
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="run has no trace yet")
        traces = {
            key: doc[key]["expectations"]
            for key in ("trace", "trace_a", "trace_b")
            if key in doc
        }
        return JSONResponse({"traces": traces})

    @app.delete("/api/runs/{run_id}")
    def delete_run(run_id: str) -> dict:
        found(run_id)
        try:
            manager.delete(run_id)
        except RuntimeError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except KeyError:
            raise HTTPException(status_code=404, detail=f"no run {run_id}")
        return {"deleted": run_id}

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
