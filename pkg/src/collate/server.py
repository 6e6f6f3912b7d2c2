"""HTTP API for the review workflow, one project per server process.

Every response carries the current project revision so clients can detect
staleness.  Pipeline runs execute on a background thread; clients poll the
status endpoint.  Reads are served from the last committed revision and are
never blocked by a running pipeline.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from .project import (
    Project,
    ProjectError,
    StageOrderError,
    STAGES,
    UnknownManuscriptError,
)


class PairBody(BaseModel):
    i: int
    j: int


class RunBody(BaseModel):
    stages: list[str] = list(STAGES)


class _RunState:
    """Status of the most recent pipeline run for one manuscript pair."""

    def __init__(self) -> None:
        self.state = "idle"
        self.executed: list[str] = []
        self.error: str | None = None

    def snapshot(self) -> dict:
        return {"state": self.state, "executed": list(self.executed), "error": self.error}


def create_app(project: Project) -> FastAPI:
    app = FastAPI(title="manuscript collation review")
    # the review page may be served from a different origin than the API
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"])
    runs: dict[str, _RunState] = {}
    runs_lock = threading.Lock()

    def run_state(key: str) -> _RunState:
        with runs_lock:
            return runs.setdefault(key, _RunState())

    def pair_key_or_404(a: str, b: str) -> str:
        try:
            return project.pair_key(a, b)
        except UnknownManuscriptError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ProjectError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/manuscripts")
    def manuscripts() -> dict:
        listing = [
            {
                "id": ms_id,
                "illustrations": [p.illustration_id for p in project.manuscript(ms_id).pyramids],
            }
            for ms_id in project.manuscript_ids()
        ]
        return {"revision": project.revision, "manuscripts": listing}

    @app.get("/pairs/{a}/{b}/candidates/{i}")
    def candidates(
        a: str,
        b: str,
        i: int,
        k: int = Query(default=5, ge=1),
        mask: str | None = Query(default=None),
    ) -> dict:
        pair_key_or_404(a, b)
        if mask not in (None, "rejected"):
            raise HTTPException(status_code=400, detail=f"unknown mask {mask!r}")
        try:
            body = project.candidates(a, b, i, k=k, mask_rejected=mask == "rejected")
        except StageOrderError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except IndexError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        body["revision"] = project.revision
        body["pair"] = [a, b]
        return body

    def annotate(a: str, b: str, body: PairBody, op) -> dict:
        pair_key_or_404(a, b)
        try:
            revision = op(a, b, body.i, body.j)
        except IndexError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"revision": revision, "i": body.i, "j": body.j}

    @app.post("/pairs/{a}/{b}/confirm")
    def confirm(a: str, b: str, body: PairBody) -> dict:
        out = annotate(a, b, body, project.confirm)
        out["status"] = "confirmed"
        return out

    @app.post("/pairs/{a}/{b}/reject")
    def reject(a: str, b: str, body: PairBody) -> dict:
        out = annotate(a, b, body, project.reject)
        out["status"] = "rejected"
        return out

    @app.post("/pairs/{a}/{b}/run", status_code=202)
    def run(a: str, b: str, body: RunBody) -> dict:
        key = pair_key_or_404(a, b)
        for stage in body.stages:
            if stage not in STAGES:
                raise HTTPException(status_code=400, detail=f"unknown stage {stage!r}")
        state = run_state(key)
        with runs_lock:
            if state.state == "running":
                raise HTTPException(status_code=409, detail="a run is already in progress")
            state.state = "running"
            state.executed = []
            state.error = None

        def work() -> None:
            try:
                state.executed = project.run_pipeline(a, b, tuple(body.stages))
                state.state = "done"
            except Exception as exc:  # surfaced through the status endpoint
                state.error = str(exc)
                state.state = "error"

        threading.Thread(target=work, daemon=True).start()
        return {"revision": project.revision, "state": state.state, "pair": [a, b]}

    @app.get("/pairs/{a}/{b}/status")
    def status(a: str, b: str) -> dict:
        key = pair_key_or_404(a, b)
        out = run_state(key).snapshot()
        out["revision"] = project.revision
        return out

    @app.get("/pairs/{a}/{b}/matches")
    def matches(a: str, b: str) -> dict:
        key = pair_key_or_404(a, b)
        found = project.matches(key)
        if found is None:
            raise HTTPException(status_code=404, detail=f"no matches computed for {key}")
        ann = {(e.i, e.j): e.status for e in project.annotations(key).entries}
        return {
            "revision": project.revision,
            "pair": [a, b],
            "entries": [
                {
                    "i": e.i,
                    "j": e.j,
                    "score": e.score,
                    "source": e.source,
                    "status": ann.get((e.i, e.j), e.status),
                }
                for e in found.entries
            ],
        }

    @app.get("/images/{illustration_id}")
    def image(illustration_id: str):
        path = project.images.path_for(illustration_id)
        if path is None:
            raise HTTPException(status_code=404, detail="image missing")
        return FileResponse(path)

    return app


def serve(project_dir: Path | str, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(create_app(Project(project_dir)), host=host, port=port)
