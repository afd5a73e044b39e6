"""HTTP session service: one loaded collection + index, many live sessions.

Each session holds one engine instance in memory, guarded by a non-blocking
lock (concurrent mutations get 409), persisted to JSON after every mutation,
and lazily reloaded from disk after a restart. Mutating endpoints accept a
client request id and replay the stored response on retry.
"""

from __future__ import annotations

import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import Body, FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .dataset import Collection, CollectionManifest, load_collection
from .engine import Engine, EngineConfig
from .pq import PQIndex, load_knn_matrix
from .session import ConstraintError, UnknownEntityError


class _SessionEntry:
    def __init__(self, engine: Engine):
        self.engine = engine
        self.lock = threading.Lock()
        self.replies: dict[str, dict] = {}


class ServiceState:
    def __init__(
        self,
        collection: Collection,
        index: PQIndex,
        knn_matrix: np.ndarray | None,
        sessions_dir: Path,
    ):
        self.collection = collection
        self.index = index
        self.knn_matrix = knn_matrix
        self.sessions_dir = sessions_dir
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.store: dict[str, _SessionEntry] = {}
        self.store_lock = threading.Lock()

    def session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def get_entry(self, session_id: str) -> _SessionEntry:
        with self.store_lock:
            entry = self.store.get(session_id)
            if entry is None:
                path = self.session_path(session_id)
                if not path.exists():
                    raise UnknownEntityError(f"no session {session_id}")
                engine = Engine.load(path, self.collection, self.index, self.knn_matrix)
                entry = _SessionEntry(engine)
                self.store[session_id] = entry
            return entry

    def persist(self, session_id: str, entry: _SessionEntry) -> None:
        entry.engine.save(self.session_path(session_id))


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": message})


def create_app(
    collection: Collection,
    index: PQIndex,
    knn_matrix: np.ndarray | None = None,
    sessions_dir: str | Path = "sessions",
) -> FastAPI:
    state = ServiceState(collection, index, knn_matrix, Path(sessions_dir))
    app = FastAPI(title="bucketeer", version="0.1.0")
    app.state.service = state
    # the web client may be served from another origin during development
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(UnknownEntityError)
    async def _unknown(request: Request, exc: UnknownEntityError):
        return _error(404, str(exc.args[0]) if exc.args else "not found")

    @app.exception_handler(ConstraintError)
    async def _constraint(request: Request, exc: ConstraintError):
        return _error(422, str(exc))

    @app.exception_handler(ValueError)
    async def _value(request: Request, exc: ValueError):
        return _error(422, str(exc))

    def _bucket_doc(engine: Engine, bucket) -> dict:
        return {
            "bucket_id": bucket.bucket_id,
            "name": bucket.name,
            "color": bucket.color,
            "active": bucket.active,
            "size": len(bucket.members),
            "archetypes": engine.archetypes(bucket.bucket_id),
        }

    def _mutate(session_id: str, request_id: str | None, fn) -> dict:
        """Run a mutation under the session lock with idempotent replay."""
        entry = state.get_entry(session_id)
        if not entry.lock.acquire(blocking=False):
            raise _Busy()
        try:
            if request_id is not None and request_id in entry.replies:
                return entry.replies[request_id]
            reply = fn(entry.engine)
            state.persist(session_id, entry)
            if request_id is not None:
                entry.replies[request_id] = reply
            return reply
        finally:
            entry.lock.release()

    class _Busy(Exception):
        pass

    @app.exception_handler(_Busy)
    async def _busy(request: Request, exc: _Busy):
        return _error(409, "another mutation is in flight for this session")

    @app.get("/")
    def root():
        return {
            "service": "bucketeer",
            "dataset": collection.name,
            "images": collection.n,
            "sessions": len(state.store),
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: dict = Body(default={})):
        dataset = body.get("dataset")
        if dataset is not None and dataset != collection.name:
            raise UnknownEntityError(f"unknown dataset {dataset!r}")
        config = EngineConfig.from_dict(body.get("config", {}))
        engine = Engine(collection, index, config, knn_matrix=state.knn_matrix)
        session_id = uuid.uuid4().hex[:12]
        entry = _SessionEntry(engine)
        with state.store_lock:
            state.store[session_id] = entry
        state.persist(session_id, entry)
        return {"session_id": session_id, "config": body.get("config", {}), "dataset": collection.name}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        entry = state.get_entry(session_id)
        engine = entry.engine
        return {
            "session_id": session_id,
            "dataset": collection.name,
            "round": engine.session.round,
            "buckets": [_bucket_doc(engine, b) for b in engine.session.buckets.values()],
        }

    @app.post("/sessions/{session_id}/feedback")
    def feedback(session_id: str, body: dict = Body(...)):
        assignments = body.get("assignments")
        if not isinstance(assignments, dict) or not assignments:
            raise ValueError("body needs a non-empty 'assignments' object")
        parsed = {int(k): int(v) for k, v in assignments.items()}
        return _mutate(
            session_id,
            body.get("request_id"),
            lambda engine: {"retrained": engine.process_feedback(parsed)},
        )

    @app.post("/sessions/{session_id}/suggest")
    def suggest(session_id: str, body: dict = Body(default={})):
        counts = body.get("counts")
        per_bucket = body.get("per_bucket_count")
        def run(engine: Engine) -> dict:
            if counts is not None:
                wanted = {int(k): int(v) for k, v in counts.items()}
            elif per_bucket is not None:
                wanted = {b: int(per_bucket) for b in engine.session.active_bucket_ids()}
            else:
                wanted = None
            result = engine.suggest(wanted)
            return {
                "round": result.round,
                "exhausted": result.exhausted,
                "suggestions": [s.to_doc() for s in result.suggestions],
            }
        return _mutate(session_id, body.get("request_id"), run)

    @app.post("/sessions/{session_id}/fast-forward")
    def fast_forward(session_id: str, body: dict = Body(...)):
        if "bucket_id" not in body or "n_ff" not in body:
            raise ValueError("body needs bucket_id and n_ff")
        return _mutate(
            session_id,
            body.get("request_id"),
            lambda engine: {"added": engine.fast_forward(int(body["bucket_id"]), int(body["n_ff"]))},
        )

    @app.get("/sessions/{session_id}/buckets")
    def list_buckets(session_id: str):
        engine = state.get_entry(session_id).engine
        return [_bucket_doc(engine, b) for b in engine.session.buckets.values()]

    @app.post("/sessions/{session_id}/buckets", status_code=201)
    def create_bucket(session_id: str, body: dict = Body(default={})):
        return _mutate(
            session_id,
            body.get("request_id"),
            lambda engine: _bucket_doc(
                engine, engine.create_bucket(body.get("name"), body.get("color"))
            ),
        )

    @app.patch("/sessions/{session_id}/buckets/{bucket_id}")
    def update_bucket(session_id: str, bucket_id: int, body: dict = Body(...)):
        def run(engine: Engine) -> dict:
            if "name" in body or "color" in body:
                engine.rename_bucket(bucket_id, body.get("name"), body.get("color"))
            if "active" in body:
                engine.set_active(bucket_id, bool(body["active"]))
            return _bucket_doc(engine, engine.session.bucket(bucket_id))
        return _mutate(session_id, body.get("request_id"), run)

    @app.delete("/sessions/{session_id}/buckets/{bucket_id}")
    def delete_bucket(session_id: str, bucket_id: int, body: dict = Body(default={})):
        def run(engine: Engine) -> dict:
            engine.delete_bucket(bucket_id)
            return {"deleted": bucket_id}
        return _mutate(session_id, body.get("request_id"), run)

    @app.post("/sessions/{session_id}/buckets/transfer")
    def transfer(session_id: str, body: dict = Body(...)):
        for field in ("ids", "from", "to"):
            if field not in body:
                raise ValueError(f"body needs '{field}'")
        return _mutate(
            session_id,
            body.get("request_id"),
            lambda engine: {
                "retrained": engine.transfer(
                    [int(i) for i in body["ids"]],
                    int(body["from"]),
                    int(body["to"]),
                    body.get("mode", "move"),
                )
            },
        )

    @app.post("/sessions/{session_id}/buckets/{bucket_id}/commit-review")
    def commit_review(session_id: str, bucket_id: int, body: dict = Body(default={})):
        return _mutate(
            session_id,
            body.get("request_id"),
            lambda engine: {"cleared": engine.commit_review(bucket_id)},
        )

    @app.get("/sessions/{session_id}/buckets/{bucket_id}/view")
    def bucket_view(session_id: str, bucket_id: int, sort: str = "confidence", order: str = "desc"):
        engine = state.get_entry(session_id).engine
        return {"bucket_id": bucket_id, "members": engine.bucket_view(bucket_id, sort, order)}

    @app.get("/images/{image_id}")
    def image(image_id: int):
        if not 0 <= image_id < collection.n:
            raise UnknownEntityError(f"no image {image_id}")
        record = collection.record(image_id)
        return {
            "image_id": image_id,
            "uri": record.display_uri,
            "metadata": {
                "concepts": [[int(i), float(v)] for i, v in record.concept_vec[:10]],
                "extra": record.metadata,
            },
        }

    return app


def create_app_from_paths(
    manifest_path: str | Path,
    index_path: str | Path,
    knn_path: str | Path | None = None,
    sessions_dir: str | Path = "sessions",
) -> FastAPI:
    manifest = CollectionManifest.load(manifest_path)
    collection = load_collection(manifest)
    index = PQIndex.load(index_path)
    knn_matrix = load_knn_matrix(knn_path) if knn_path else None
    return create_app(collection, index, knn_matrix, sessions_dir)
