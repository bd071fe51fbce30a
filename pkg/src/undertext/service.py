"""HTTP annotation service: band imagery out, point sets in, runs queued.

The service holds one in-memory session (single scholar, single machine):
a loaded stack, the current annotation set with a version counter, and an
append-only run history. Compute runs on one worker thread consuming a FIFO
queue, so two runs never execute concurrently and history order equals
submission order.

Runs call the same pipeline functions as the command line with the same
defaults, so a service run's artifacts are byte-identical to a CLI run given
identical inputs. Annotation upload and download use the CSV format
verbatim; everything else is JSON.
"""

from __future__ import annotations

import queue
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import cv2
from fastapi import FastAPI, HTTPException, Request, Response
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from . import __version__, pipeline
from .annotations import TrainingSet, parse_annotations, serialize_annotations
from .eigen import DEFAULT_RIDGE
from .errors import DataError, UndertextError
from .projection import ALL_METHODS, SUPERVISED_METHODS
from .rendering import CompositeRecipe, RenderSpec, downsample_mean, load_image
from .stack import SpectralStack

_SCALES = {"1": 1, "1/2": 2, "1/4": 4, "1/8": 8, "2": 2, "4": 4, "8": 8}

STATUS_QUEUED = "QUEUED"
STATUS_RUNNING = "RUNNING"
STATUS_DONE = "DONE"
STATUS_FAILED = "FAILED"


class StackRequest(BaseModel):
    manifest: str
    crop: list[int] | None = None
    scope: str = "per-band"


class RunRequest(BaseModel):
    method: str = "cva"
    k: int | None = None
    ridge: float = DEFAULT_RIDGE
    mode: str = "full"
    percentile_p: float | None = None
    depth: int = 8
    one_tail: bool = False
    components: list[int] | None = None
    recipe: list[int] | None = None
    swap: list[int] | None = None
    region: list[int] | None = None


@dataclass
class RunRecord:
    run_id: str
    request: RunRequest
    status: str = STATUS_QUEUED
    error: str | None = None
    artifacts: list[str] = field(default_factory=list)
    preview: str | None = None
    metrics: dict | None = None
    directory: Path | None = None

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "method": self.request.method,
            "k": self.request.k,
            "mode": self.request.mode,
            "status": self.status,
            "error": self.error,
            "artifacts": list(self.artifacts),
            "preview": self.preview,
            "metrics": self.metrics,
        }


@dataclass
class _Session:
    session_id: str
    stack: SpectralStack | None = None
    stack_meta: dict = field(default_factory=dict)
    training: TrainingSet | None = None
    annotation_version: int = 0
    annotation_text: str = ""
    runs: list[RunRecord] = field(default_factory=list)


class _Service:
    """All mutable state plus the worker thread, shared by the routes."""

    def __init__(self, artifact_root: Path):
        self.artifact_root = artifact_root
        self.lock = threading.Lock()
        self.session = _Session(session_id=uuid.uuid4().hex[:12])
        self.queue: "queue.Queue[tuple[RunRecord, object, TrainingSet | None]]" = (
            queue.Queue()
        )
        self.run_counter = 0
        self.worker = threading.Thread(target=self._work, daemon=True)
        self.worker.start()

    def load_stack(
        self,
        manifest: str,
        crop_rect: tuple[int, int, int, int] | None = None,
        scope: str = "per-band",
    ) -> SpectralStack:
        """Load a stack and make it the session's, discarding prior state."""
        stack = pipeline.load_normalized(manifest, crop_rect, scope)
        with self.lock:
            s = self.session
            s.stack = stack
            s.stack_meta = {
                "manifest": manifest,
                "manifest_sha256": pipeline.sha256_file(manifest),
                "crop": ",".join(map(str, crop_rect)) if crop_rect else "none",
                "scope": scope,
            }
            s.training = None
            s.annotation_text = ""
            s.annotation_version = 0
            s.runs = []
        return stack

    def _work(self) -> None:
        while True:
            record, stack, training = self.queue.get()
            with self.lock:
                record.status = STATUS_RUNNING
            try:
                self._execute(record, stack, training)
                with self.lock:
                    record.status = STATUS_DONE
            except UndertextError as exc:
                with self.lock:
                    record.status = STATUS_FAILED
                    record.error = str(exc)
            except Exception as exc:  # keep the worker alive
                with self.lock:
                    record.status = STATUS_FAILED
                    record.error = f"internal error: {exc}"
            finally:
                self.queue.task_done()

    def _execute(self, record: RunRecord, stack, training) -> None:
        req = record.request
        run_dir = self.artifact_root / record.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        record.directory = run_dir

        canonical = None if training is None else serialize_annotations(training)
        provenance = pipeline.model_provenance(
            self.session.stack_meta, canonical, req.method, req.k, req.ridge
        )
        model = pipeline.fit_model(
            stack, training, req.method, k=req.k, ridge=req.ridge,
            region=tuple(req.region) if req.region else None,
            provenance=provenance,
        )
        spec = RenderSpec(
            mode={"full": "full", "training": "training", "percentile": "percentile"}
            .get(req.mode, req.mode),
            percentile_p=req.percentile_p,
            out_depth=req.depth,
            one_tail=req.one_tail,
        )
        recipe = None
        if req.recipe is not None:
            if len(req.recipe) != 3:
                raise DataError("recipe needs exactly three plane indices")
            swap = None
            if req.swap is not None:
                if len(req.swap) != 2:
                    raise DataError("swap needs exactly two channel indices")
                swap = (req.swap[0], req.swap[1])
            recipe = CompositeRecipe(*req.recipe, swap=swap)
        result = pipeline.render_planes(
            stack, model, [spec], run_dir, run_name="run",
            components=req.components, recipe=recipe,
        )
        model.save(run_dir / "run_model.json")
        meta = dict(provenance)
        meta.update({"mode": req.mode, "depth": req.depth})
        pipeline.write_run_meta(run_dir, meta)

        artifacts = [p.name for p in result.plane_paths]
        if result.composite_path is not None:
            artifacts.append(result.composite_path.name)
        artifacts += ["run_model.json", pipeline.RUN_META_NAME]
        record.artifacts = artifacts
        record.preview = (
            result.composite_path.name
            if result.composite_path is not None
            else result.plane_paths[0].name
        )

        if training is not None:
            try:
                under, parch = pipeline.eval_points(training)
            except DataError:
                return  # no evaluation classes annotated; metrics stay empty
            named = [(p.name, load_image(p)) for p in result.plane_paths]
            rows = pipeline.evaluate_images(named, under, parch)
            record.metrics = {
                "rows": [
                    {
                        "image": r.name,
                        "db": None if r.report is None else r.report.db,
                        "dunn": None if r.report is None else r.report.dunn,
                        "s_under": None if r.report is None else r.report.s_under,
                        "s_parchment": (
                            None if r.report is None else r.report.s_parchment
                        ),
                        "m": None if r.report is None else r.report.m,
                        "error": r.error,
                    }
                    for r in rows
                ],
                "best": next((r.name for r in rows if r.report is not None), None),
            }
            best = record.metrics["best"]
            if result.composite_path is None and best is not None:
                record.preview = best


def create_app(
    artifact_root: str | Path,
    ui_dir: str | Path | None = None,
    manifest: str | None = None,
    crop: tuple[int, int, int, int] | None = None,
    scope: str = "per-band",
) -> FastAPI:
    """Build the service app. ``artifact_root`` stores per-run outputs;
    ``ui_dir`` (optional) is served statically at /. Passing ``manifest``
    preloads a stack so clients need not POST one first."""
    root = Path(artifact_root)
    root.mkdir(parents=True, exist_ok=True)
    service = _Service(root)
    if manifest is not None:
        service.load_stack(manifest, crop, scope)
    app = FastAPI(title="undertext annotator", version=__version__)

    def _require_stack():
        if service.session.stack is None:
            raise HTTPException(404, "no stack loaded in this session")
        return service.session.stack

    @app.get("/api/session")
    def get_session():
        s = service.session
        with service.lock:
            stack_info = None
            if s.stack is not None:
                stack_info = {
                    "bands": s.stack.band_count,
                    "width": s.stack.width,
                    "height": s.stack.height,
                    "bit_depth": s.stack.bit_depth,
                    "manifest": s.stack_meta.get("manifest"),
                }
            return {
                "session_id": s.session_id,
                "stack": stack_info,
                "annotation_version": s.annotation_version,
                "runs": [r.run_id for r in s.runs],
            }

    @app.post("/api/session/stack")
    def post_stack(req: StackRequest):
        crop_rect = None
        if req.crop is not None:
            if len(req.crop) != 4:
                raise HTTPException(422, "crop needs [x0, y0, width, height]")
            crop_rect = tuple(req.crop)
        try:
            stack = service.load_stack(req.manifest, crop_rect, req.scope)
        except UndertextError as exc:
            raise HTTPException(400, str(exc))
        return {
            "bands": stack.band_count,
            "width": stack.width,
            "height": stack.height,
            "bit_depth": stack.bit_depth,
        }

    @app.get("/api/bands")
    def get_bands():
        stack = _require_stack()
        return [
            {
                "band_id": b.band_id,
                "wavelength_nm": b.wavelength_nm,
                "illumination": b.illumination,
                "filter": b.filter,
                "width": stack.width,
                "height": stack.height,
            }
            for b in stack.bands
        ]

    @app.get("/api/band/{band_id}")
    def get_band(band_id: int, scale: str = "1"):
        stack = _require_stack()
        if scale not in _SCALES:
            raise HTTPException(422, "scale must be one of 1, 1/2, 1/4, 1/8")
        try:
            plane = stack.band_by_id(band_id)
        except DataError as exc:
            raise HTTPException(404, str(exc))
        small = downsample_mean(plane, _SCALES[scale])
        ok, payload = cv2.imencode(".png", small)
        if not ok:
            raise HTTPException(500, "PNG encoding failed")
        return Response(content=payload.tobytes(), media_type="image/png")

    @app.put("/api/annotations")
    async def put_annotations(request: Request):
        body = (await request.body()).decode("utf-8")
        import warnings as _warnings

        try:
            with _warnings.catch_warnings(record=True) as caught:
                _warnings.simplefilter("always")
                training = parse_annotations(body)
        except DataError as exc:
            raise HTTPException(422, str(exc))
        with service.lock:
            s = service.session
            s.training = training
            s.annotation_text = body
            s.annotation_version += 1
            version = s.annotation_version
        return {
            "counts": training.counts(),
            "version": version,
            "warnings": [str(w.message) for w in caught],
        }

    @app.get("/api/annotations")
    def get_annotations():
        with service.lock:
            training = service.session.training
        if training is None:
            raise HTTPException(404, "no annotations in this session")
        return Response(
            content=serialize_annotations(training), media_type="text/csv"
        )

    @app.post("/api/runs", status_code=202)
    def post_run(req: RunRequest):
        stack = _require_stack()
        if req.method not in ALL_METHODS:
            raise HTTPException(422, f"method must be one of {ALL_METHODS}")
        with service.lock:
            training = service.session.training
            if req.method in SUPERVISED_METHODS and training is None:
                raise HTTPException(
                    409, f"method {req.method!r} needs annotations; none uploaded"
                )
            service.run_counter += 1
            record = RunRecord(run_id=f"r{service.run_counter:04d}", request=req)
            service.session.runs.append(record)
        service.queue.put((record, stack, training))
        return {"run_id": record.run_id, "status": record.status}

    def _find_run(run_id: str) -> RunRecord:
        with service.lock:
            for record in service.session.runs:
                if record.run_id == run_id:
                    return record
        raise HTTPException(404, f"unknown run {run_id!r}")

    @app.get("/api/runs/{run_id}")
    def get_run(run_id: str):
        record = _find_run(run_id)
        with service.lock:
            return record.to_json()

    @app.get("/api/runs/{run_id}/artifact/{name}")
    def get_artifact(run_id: str, name: str):
        record = _find_run(run_id)
        with service.lock:
            known = name in record.artifacts and record.directory is not None
            directory = record.directory
        if not known:
            raise HTTPException(404, f"run {run_id} has no artifact {name!r}")
        path = directory / name
        if not path.is_file():
            raise HTTPException(404, f"artifact {name!r} missing on disk")
        media = "image/png" if name.endswith(".png") else (
            "image/tiff" if name.endswith(".tif") else "text/plain"
        )
        return FileResponse(path, media_type=media)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    else:
        @app.get("/")
        def index():
            return JSONResponse(
                {"service": "undertext annotator", "version": __version__}
            )

    return app
