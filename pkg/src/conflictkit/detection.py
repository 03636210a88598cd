"""Detection pipeline: speech gate, task-attribute gate, model escalation.

Per tick, speech retrieval runs first and short-circuits the pipeline when its
max similarity strictly exceeds tau_s. Otherwise task-attribute retrieval
answers when its fused score is at least tau_t, and anything below tau_t
escalates to the model backend. Exactly one of the three methods produces
each result, and every score that was computed rides along with it.
"""

from __future__ import annotations

import base64
import re
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Iterable, Iterator, Protocol

import httpx

from . import prompts
from .buffers import (
    BufferError,
    EmptyBufferError,
    MultiModalBuffer,
    SpeechBuffer,
    render_prompt,
    validate_weight,
)
from .embeddings import EmbeddingError
from .types import ConflictLabel, DetectionInput

DEFAULT_W = 0.87
DEFAULT_TAU_S = 0.88
DEFAULT_TAU_T = 0.94

METHOD_SPEECH = "speech_retrieval"
METHOD_TASK = "task_retrieval"
METHOD_MODEL = "model_inference"


class DetectionError(Exception):
    """Detection failed; partial stage scores are attached when available.

    escalation_failure distinguishes "the model backend was needed and did
    not answer" from provider/input failures, so callers can surface backend
    unavailability separately.
    """

    def __init__(self, message: str, *, speech_score: float | None = None,
                 task_score: float | None = None, escalation_failure: bool = False):
        super().__init__(message)
        self.speech_score = speech_score
        self.task_score = task_score
        self.escalation_failure = escalation_failure


class ModelBackendError(Exception):
    """Model backend call failed."""

    def __init__(self, message: str, *, retriable: bool = False):
        super().__init__(message)
        self.retriable = retriable


class LabelParseError(ModelBackendError):
    """Backend output did not contain exactly one label token."""

    def __init__(self, message: str, raw: str):
        super().__init__(message, retriable=False)
        self.raw = raw


@dataclass(frozen=True)
class DetectionConfig:
    """Fusion weight and the two confidence gates.

    tau values are permitted above 1.0: a tau_t above every possible score
    forces every task-retrieval query to escalate, which the property suite
    relies on; a tau_s above 1.0 disables the speech gate.
    """

    w: float
    tau_s: float
    tau_t: float

    def __post_init__(self) -> None:
        validate_weight(self.w)
        if self.tau_s < 0 or self.tau_t < 0:
            raise ValueError("thresholds must be non-negative")

    @classmethod
    def default(cls) -> "DetectionConfig":
        return cls(w=DEFAULT_W, tau_s=DEFAULT_TAU_S, tau_t=DEFAULT_TAU_T)


@dataclass(frozen=True)
class DetectionResult:
    """Outcome of one detection tick."""

    label: ConflictLabel
    method: str  # one of METHOD_SPEECH / METHOD_TASK / METHOD_MODEL
    speech_score: float | None
    task_score: float | None
    matched_entry_id: str | None
    latency_s: float
    timestamp: datetime
    stage_latencies: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label.value,
            "method": self.method,
            "speech_score": self.speech_score,
            "task_score": self.task_score,
            "matched_entry_id": self.matched_entry_id,
            "latency_s": self.latency_s,
            "timestamp": self.timestamp.isoformat(),
            "stage_latencies": dict(self.stage_latencies),
        }


@dataclass(frozen=True)
class StreamFailure:
    """A frame of a detection stream that errored; later frames still run."""

    frame_index: int
    error: str


class ModelBackend(Protocol):
    def classify(self, system: str, user: str, image: str | bytes) -> str: ...


class MockModelBackend:
    """Scripted backend for tests and offline runs; counts its calls."""

    def __init__(self, label: str | ConflictLabel = ConflictLabel.NORMAL,
                 responder: Callable[[str], str] | None = None):
        self._label = label.value if isinstance(label, ConflictLabel) else label
        self._responder = responder
        self.calls = 0

    def classify(self, system: str, user: str, image: str | bytes) -> str:
        self.calls += 1
        if self._responder is not None:
            return self._responder(user)
        return self._label


class RemoteModelBackend:
    """HTTP backend: POST {"system", "prompt", "image"|"image_b64"} -> {"response": str}."""

    def __init__(self, endpoint: str, *, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def classify(self, system: str, user: str, image: str | bytes) -> str:
        body: dict = {"system": system, "prompt": user}
        if isinstance(image, bytes):
            body["image_b64"] = base64.b64encode(image).decode("ascii")
        else:
            body["image"] = str(image)
        try:
            response = self._client.post(self.endpoint, json=body)
        except httpx.TimeoutException as exc:
            raise ModelBackendError(
                f"model backend {self.endpoint} timed out after {self.timeout}s", retriable=True
            ) from exc
        except httpx.HTTPError as exc:
            raise ModelBackendError(f"model backend {self.endpoint} failed: {exc}",
                                    retriable=True) from exc
        if response.status_code != 200:
            raise ModelBackendError(
                f"model backend {self.endpoint} returned HTTP {response.status_code}",
                retriable=response.status_code >= 500,
            )
        data = response.json()
        if "response" not in data:
            raise ModelBackendError(f"model backend {self.endpoint} returned no 'response' field")
        return str(data["response"])

    def close(self) -> None:
        self._client.close()


_LABEL_PATTERNS = {
    label: re.compile(r"(?<![a-z0-9_])" + label.value.replace("_", "[ _]") + r"(?![a-z0-9_])")
    for label in ConflictLabel
}


def parse_label(text: str) -> ConflictLabel:
    """Extract the single conflict label named in backend output.

    Matching is case-insensitive and accepts a space for the underscore.
    Zero or multiple label mentions are a parse error rather than a guess,
    so backend drift surfaces instead of silently mislabeling.
    """
    lowered = text.lower()
    found: list[ConflictLabel] = []
    for label, pattern in _LABEL_PATTERNS.items():
        found.extend(label for _ in pattern.finditer(lowered))
    if len(found) != 1:
        raise LabelParseError(
            f"expected exactly one label token in backend output, found {len(found)}", raw=text
        )
    return found[0]


def escalate(input: DetectionInput, backend: ModelBackend) -> ConflictLabel:
    """Ask the model backend to classify one tick and parse its answer strictly."""
    user = prompts.render_detection_prompt(input.task, input.step, input.speech)
    raw = backend.classify(prompts.DETECTION_SYSTEM_INSTRUCTION, user, input.image)
    return parse_label(raw)


class ConflictDetector:
    """Bundles config, buffers, providers, and backend behind detect()."""

    def __init__(
        self,
        config: DetectionConfig,
        *,
        text_provider,
        image_provider,
        speech_buffer: SpeechBuffer | None = None,
        multimodal_buffer: MultiModalBuffer | None = None,
        backend: ModelBackend | None = None,
    ):
        self.config = config
        self.text_provider = text_provider
        self.image_provider = image_provider
        self.speech_buffer = speech_buffer
        self.multimodal_buffer = multimodal_buffer
        self.backend = backend

    def detect(self, input: DetectionInput) -> DetectionResult:
        started = time.perf_counter()
        stages: dict[str, float] = {}
        speech_score_val: float | None = None
        task_score_val: float | None = None

        # Stage 1: speech gate. An empty or missing speech buffer means no
        # speech trigger, never an abort.
        if input.speech is not None and self.speech_buffer is not None:
            stage_start = time.perf_counter()
            try:
                query = self.text_provider.embed_text(input.speech)
                hit = self.speech_buffer.query(query)
            except EmptyBufferError:
                hit = None
            except EmbeddingError as exc:
                raise DetectionError(f"speech embedding failed: {exc}") from exc
            except BufferError as exc:
                raise DetectionError(f"speech retrieval failed: {exc}") from exc
            stages[METHOD_SPEECH] = time.perf_counter() - stage_start
            if hit is not None:
                speech_score_val = hit.score
                if hit.score > self.config.tau_s:
                    return self._result(
                        label=hit.entry_label,
                        method=METHOD_SPEECH,
                        speech_score=speech_score_val,
                        task_score=None,
                        matched_entry_id=hit.entry_id,
                        started=started,
                        stages=stages,
                    )

        # Stage 2: task-attribute gate.
        task_hit = None
        if self.multimodal_buffer is not None and len(self.multimodal_buffer) > 0:
            stage_start = time.perf_counter()
            try:
                prompt_q = self.text_provider.embed_text(render_prompt(input.task, input.step))
                obs_q = self.image_provider.embed_image(input.image)
                task_hit = self.multimodal_buffer.query(prompt_q, obs_q, self.config.w)
            except EmbeddingError as exc:
                raise DetectionError(
                    f"task attribute embedding failed: {exc}", speech_score=speech_score_val
                ) from exc
            except BufferError as exc:
                raise DetectionError(
                    f"task attribute retrieval failed: {exc}", speech_score=speech_score_val
                ) from exc
            stages[METHOD_TASK] = time.perf_counter() - stage_start
            task_score_val = task_hit.score
            if task_hit.score >= self.config.tau_t:
                return self._result(
                    label=task_hit.entry_label,
                    method=METHOD_TASK,
                    speech_score=speech_score_val,
                    task_score=task_score_val,
                    matched_entry_id=task_hit.entry_id,
                    started=started,
                    stages=stages,
                )

        # Stage 3: escalation. Reached when the fused score fell below tau_t
        # or task retrieval was unavailable.
        if self.backend is None:
            raise DetectionError(
                "escalation required but no model backend configured",
                speech_score=speech_score_val,
                task_score=task_score_val,
                escalation_failure=True,
            )
        stage_start = time.perf_counter()
        try:
            label = escalate(input, self.backend)
        except ModelBackendError as exc:
            raise DetectionError(
                f"model escalation failed: {exc}",
                speech_score=speech_score_val,
                task_score=task_score_val,
                escalation_failure=True,
            ) from exc
        stages[METHOD_MODEL] = time.perf_counter() - stage_start
        return self._result(
            label=label,
            method=METHOD_MODEL,
            speech_score=speech_score_val,
            task_score=task_score_val,
            matched_entry_id=None,
            started=started,
            stages=stages,
        )

    def detect_stream(
        self, frames: Iterable[DetectionInput]
    ) -> Iterator[DetectionResult | StreamFailure]:
        """Run detect per frame in order; a failing frame never aborts the rest."""
        for index, frame in enumerate(frames):
            try:
                yield self.detect(frame)
            except DetectionError as exc:
                yield StreamFailure(frame_index=index, error=str(exc))

    @staticmethod
    def _result(*, label, method, speech_score, task_score, matched_entry_id,
                started, stages) -> DetectionResult:
        return DetectionResult(
            label=label,
            method=method,
            speech_score=speech_score,
            task_score=task_score,
            matched_entry_id=matched_entry_id,
            latency_s=time.perf_counter() - started,
            timestamp=datetime.now(timezone.utc),
            stage_latencies=stages,
        )
