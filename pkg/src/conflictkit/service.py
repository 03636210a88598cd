"""HTTP service: detection, annotation, preference prediction, and ratings.

State is file-backed: cases/predictions/ratings live in append-only journals
under the data directory and are replayed on startup, so a restarted service
answers listing requests byte-for-byte identically. Uploaded observation
images are stored content-addressed so detection and annotation reference the
same bytes. Every non-2xx response body is an ApiError object.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import os
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import EngineConfig, build_detector, load_engine_config
from .detection import ConflictDetector, DetectionError
from .preferences import (
    DEFAULT_CASE_CAP,
    MockSummarizer,
    PredictionParseError,
    PreferenceError,
    PreferenceStore,
    RemoteSummarizer,
    Scenario,
    UserCase,
    predict_solution,
)
from .types import ConflictLabel, DetectionInput, catalog_options, option_by_text

logger = logging.getLogger(__name__)

API_PREFIX = "/v1"

ERROR_VALIDATION = "validation"
ERROR_NOT_FOUND = "not_found"
ERROR_BACKEND_UNAVAILABLE = "backend_unavailable"
ERROR_INTERNAL = "internal"


class ApiException(Exception):
    """Maps to one ApiError response."""

    def __init__(self, status: int, code: str, message: str, detail: str | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail

    def response(self) -> JSONResponse:
        return JSONResponse(
            status_code=self.status,
            content={"code": self.code, "message": self.message, "detail": self.detail},
        )


@dataclass(frozen=True)
class ServiceConfig:
    """Service-level settings; engine wiring comes from the engine config file."""

    data_dir: Path
    engine_config_path: Path | None = None
    host: str = "127.0.0.1"
    port: int = 8400
    auth_token: str | None = None
    cors_origins: tuple[str, ...] = ()
    summarizer_kind: str = "mock"
    summarizer_endpoint: str | None = None
    static_dir: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "ServiceConfig":
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        base = path.parent

        def resolve(value):
            if value is None:
                return None
            p = Path(value)
            return p if p.is_absolute() else base / p

        summarizer = data.get("summarizer", {"kind": "mock"})
        config = cls(
            data_dir=resolve(data.get("data_dir", "data")),
            engine_config_path=resolve(data.get("engine_config")),
            host=data.get("host", "127.0.0.1"),
            port=int(data.get("port", 8400)),
            auth_token=data.get("auth_token"),
            cors_origins=tuple(data.get("cors_origins", [])),
            summarizer_kind=summarizer.get("kind", "mock"),
            summarizer_endpoint=summarizer.get("endpoint"),
            static_dir=resolve(data.get("static_dir")),
        )
        return config.with_env_overrides()

    def with_env_overrides(self) -> "ServiceConfig":
        """CONFLICTKIT_PORT and CONFLICTKIT_DATA_DIR override file values."""
        port = os.environ.get("CONFLICTKIT_PORT")
        data_dir = os.environ.get("CONFLICTKIT_DATA_DIR")
        updated = self
        if port:
            updated = ServiceConfig(**{**updated.__dict__, "port": int(port)})
        if data_dir:
            updated = ServiceConfig(**{**updated.__dict__, "data_dir": Path(data_dir)})
        return updated


def load_scenarios(data_dir: Path) -> dict[str, Scenario]:
    """Read the annotation scenario set from data_dir/scenarios.jsonl, if present."""
    path = data_dir / "scenarios.jsonl"
    scenarios: dict[str, Scenario] = {}
    if path.exists():
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    scenario = Scenario.from_dict(json.loads(line))
                    scenarios[scenario.scenario_id] = scenario
    return scenarios


def save_scenarios(scenarios: list[Scenario], data_dir: Path) -> None:
    data_dir.mkdir(parents=True, exist_ok=True)
    with open(data_dir / "scenarios.jsonl", "w", encoding="utf-8") as fh:
        for scenario in scenarios:
            fh.write(json.dumps(scenario.to_dict(), ensure_ascii=False,
                                separators=(",", ":")) + "\n")


class DetectRequest(BaseModel):
    task: str
    step: str
    speech: str | None = None
    image: str | None = None
    image_b64: str | None = None


class CaseRequest(BaseModel):
    case_id: str | None = None
    user_id: str
    scenario_id: str
    option_text: str
    emergency: int


class PredictRequest(BaseModel):
    user_id: str
    scenario_id: str


class RatingRequest(BaseModel):
    rating: int


def _scenario_view(scenario: Scenario) -> dict:
    view = scenario.to_dict()
    view["options"] = [o.text for o in catalog_options(scenario.conflict_type)]
    return view


def create_app(
    service_config: ServiceConfig,
    *,
    detector: ConflictDetector | None = None,
    summarizer=None,
    scenarios: dict[str, Scenario] | None = None,
) -> FastAPI:
    """Build the service; prebuilt detector/summarizer/scenarios override config."""
    data_dir = Path(service_config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / "images").mkdir(exist_ok=True)

    if detector is None and service_config.engine_config_path is not None:
        engine_config: EngineConfig = load_engine_config(service_config.engine_config_path)
        detector = build_detector(engine_config)
    if summarizer is None:
        if service_config.summarizer_kind == "remote" and service_config.summarizer_endpoint:
            summarizer = RemoteSummarizer(service_config.summarizer_endpoint)
        else:
            summarizer = MockSummarizer()

    store = PreferenceStore(data_dir / "journal")
    scenario_set = scenarios if scenarios is not None else load_scenarios(data_dir)

    app = FastAPI(title="conflictkit service", version="0.1.0")
    app.state.detector = detector
    app.state.store = store
    app.state.scenarios = scenario_set
    app.state.summarizer = summarizer
    app.state.config = service_config

    if service_config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(service_config.cors_origins),
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(ApiException)
    async def handle_api_exception(request: Request, exc: ApiException):
        return exc.response()

    @app.exception_handler(RequestValidationError)
    async def handle_validation(request: Request, exc: RequestValidationError):
        return ApiException(
            400, ERROR_VALIDATION, "request validation failed", detail=str(exc.errors())
        ).response()

    @app.exception_handler(Exception)
    async def handle_internal(request: Request, exc: Exception):
        logger.exception("unhandled service error")
        return ApiException(500, ERROR_INTERNAL, "internal error", detail=str(exc)).response()

    @app.middleware("http")
    async def check_auth(request: Request, call_next):
        token = service_config.auth_token
        if token and request.url.path.startswith(API_PREFIX):
            header = request.headers.get("authorization", "")
            if header != f"Bearer {token}":
                return ApiException(
                    401, ERROR_VALIDATION, "missing or invalid bearer token"
                ).response()
        return await call_next(request)

    # -- detection --------------------------------------------------------------

    @app.post(API_PREFIX + "/detect")
    def detect(body: DetectRequest):
        if app.state.detector is None:
            raise ApiException(503, ERROR_BACKEND_UNAVAILABLE, "detector not configured")
        if not body.task.strip() or not body.step.strip():
            raise ApiException(400, ERROR_VALIDATION, "task and step must be non-empty")
        image: str | bytes
        if body.image_b64:
            try:
                blob = base64.b64decode(body.image_b64)
            except ValueError as exc:
                raise ApiException(400, ERROR_VALIDATION, f"bad image_b64: {exc}") from exc
            digest = hashlib.sha256(blob).hexdigest()
            stored = data_dir / "images" / digest
            if not stored.exists():
                stored.write_bytes(blob)
            image = str(stored)
        elif body.image:
            image = body.image
        else:
            raise ApiException(400, ERROR_VALIDATION, "provide image or image_b64")
        tick = DetectionInput(image=image, task=body.task, step=body.step, speech=body.speech)
        try:
            result = app.state.detector.detect(tick)
        except DetectionError as exc:
            if exc.escalation_failure:
                raise ApiException(
                    503, ERROR_BACKEND_UNAVAILABLE, str(exc),
                    detail=f"speech_score={exc.speech_score} task_score={exc.task_score}",
                ) from exc
            raise ApiException(500, ERROR_INTERNAL, str(exc)) from exc
        return JSONResponse(result.to_dict())

    # -- annotation -------------------------------------------------------------

    @app.get(API_PREFIX + "/annotation/scenarios")
    def pending_scenarios(user: str):
        answered = {
            c.scenario.scenario_id for c in app.state.store.cases_for_user(user)
        }
        ordered = sorted(app.state.scenarios.values(), key=lambda s: s.scenario_id)
        pending = [_scenario_view(s) for s in ordered if s.scenario_id not in answered]
        return JSONResponse({
            "user": user,
            "total": len(ordered),
            "pending": pending,
            "completed": len(ordered) - len(pending),
        })

    @app.post(API_PREFIX + "/annotation/cases")
    def submit_case(body: CaseRequest):
        scenario = app.state.scenarios.get(body.scenario_id)
        if scenario is None:
            raise ApiException(404, ERROR_NOT_FOUND, f"unknown scenario {body.scenario_id}")
        try:
            option = option_by_text(scenario.conflict_type, body.option_text)
        except ValueError as exc:
            raise ApiException(400, ERROR_VALIDATION, str(exc)) from exc

        store: PreferenceStore = app.state.store
        # Idempotence: identical content for the same scenario/user reuses the
        # stored case rather than appending an audit row with a fresh timestamp.
        for existing in store.cases_for_user(body.user_id):
            same_submission = (
                existing.scenario.scenario_id == body.scenario_id
                and existing.chosen_option.text == option.text
                and existing.emergency == body.emergency
                and (body.case_id is None or body.case_id == existing.case_id)
            )
            if same_submission:
                return JSONResponse({"case_id": existing.case_id, "stored": True})

        try:
            case = UserCase(
                case_id=body.case_id or uuid.uuid4().hex,
                user_id=body.user_id,
                scenario=scenario,
                chosen_option=option,
                emergency=body.emergency,
                created_at=datetime.now(timezone.utc).isoformat(),
            )
        except (PreferenceError, ValueError) as exc:
            raise ApiException(400, ERROR_VALIDATION, str(exc)) from exc
        store.record_case(case)
        return JSONResponse({"case_id": case.case_id, "stored": True})

    @app.get(API_PREFIX + "/annotation/cases")
    def list_cases(user: str):
        cases = app.state.store.cases_for_user(user)
        return JSONResponse({"user": user, "cases": [c.to_dict() for c in cases]})

    # -- prediction and rating -----------------------------------------------------

    @app.post(API_PREFIX + "/predict")
    def predict(body: PredictRequest):
        scenario = app.state.scenarios.get(body.scenario_id)
        if scenario is None:
            raise ApiException(404, ERROR_NOT_FOUND, f"unknown scenario {body.scenario_id}")
        store: PreferenceStore = app.state.store
        cases = store.cases_for_type(body.user_id, scenario.conflict_type)
        try:
            prediction = predict_solution(
                scenario, cases, app.state.summarizer, store=store,
                user_id=body.user_id, case_cap=DEFAULT_CASE_CAP,
            )
        except PredictionParseError as exc:
            raise ApiException(
                422, ERROR_VALIDATION, "summarizer output invalid", detail=exc.raw
            ) from exc
        except PreferenceError as exc:
            raise ApiException(503, ERROR_BACKEND_UNAVAILABLE, str(exc)) from exc
        return JSONResponse(prediction.to_dict())

    @app.get(API_PREFIX + "/predictions")
    def list_predictions(user: str):
        predictions = app.state.store.predictions_for_user(user)
        return JSONResponse({"user": user, "predictions": [p.to_dict() for p in predictions]})

    @app.get(API_PREFIX + "/predictions/{prediction_id}")
    def get_prediction(prediction_id: str):
        prediction = app.state.store.get_prediction(prediction_id)
        if prediction is None:
            raise ApiException(404, ERROR_NOT_FOUND, f"unknown prediction {prediction_id}")
        return JSONResponse(prediction.to_dict())

    @app.post(API_PREFIX + "/predictions/{prediction_id}/rating")
    def rate_prediction(prediction_id: str, body: RatingRequest):
        try:
            updated = app.state.store.record_rating(prediction_id, body.rating)
        except KeyError as exc:
            raise ApiException(404, ERROR_NOT_FOUND, str(exc.args[0])) from exc
        except ValueError as exc:
            raise ApiException(400, ERROR_VALIDATION, str(exc)) from exc
        return JSONResponse(updated.to_dict())

    @app.get(API_PREFIX + "/ratings")
    def list_ratings():
        return JSONResponse({"ratings": app.state.store.rating_events()})

    @app.get(API_PREFIX + "/health")
    def health():
        return JSONResponse({
            "status": "ok",
            "scenarios": len(app.state.scenarios),
            "detector": app.state.detector is not None,
        })

    if service_config.static_dir and Path(service_config.static_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=service_config.static_dir, html=True),
                  name="ui")

    return app


def run_service(service_config: ServiceConfig, **uvicorn_kwargs) -> None:
    """Blocking entry point used by the CLI serve command."""
    import uvicorn

    app = create_app(service_config)
    uvicorn.run(app, host=service_config.host, port=service_config.port, **uvicorn_kwargs)
