"""Engine configuration: one JSON file wiring providers, buffers, gates, backend.

Example:

    {
      "w": 0.87, "tau_s": 0.88, "tau_t": 0.94,
      "text_provider": {"kind": "mock", "dimension": 256, "seed": 7},
      "image_provider": {"kind": "mock", "dimension": 256, "seed": 7},
      "model_backend": {"kind": "mock", "label": "normal"},
      "speech_buffer": "buffers/speech.ckbuf",
      "multimodal_buffer": "buffers/multimodal.ckbuf",
      "include_noise_speech": false
    }

Relative buffer paths resolve against the config file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .buffers import MultiModalBuffer, SpeechBuffer, load_buffer
from .detection import (
    ConflictDetector,
    DetectionConfig,
    MockModelBackend,
    RemoteModelBackend,
)
from .embeddings import EmbeddingProviderConfig, provider_from_config


@dataclass(frozen=True)
class BackendConfig:
    """Model backend selection: scripted mock or remote HTTP."""

    kind: str  # "mock" | "remote"
    endpoint: str | None = None
    timeout: float = 30.0
    label: str = "normal"  # mock only: the label it always answers

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"backend kind must be 'mock' or 'remote', got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")

    def build(self):
        if self.kind == "mock":
            return MockModelBackend(label=self.label)
        return RemoteModelBackend(self.endpoint, timeout=self.timeout)  # type: ignore[arg-type]


@dataclass(frozen=True)
class EngineConfig:
    """Everything detect() needs, loadable from one file."""

    detection: DetectionConfig
    text_provider: EmbeddingProviderConfig
    image_provider: EmbeddingProviderConfig
    model_backend: BackendConfig
    speech_buffer_path: str | None = None
    multimodal_buffer_path: str | None = None
    include_noise_speech: bool = False
    eval_parallelism: int = 1
    base_dir: Path = field(default_factory=Path)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def _provider_config(data: dict) -> EmbeddingProviderConfig:
    return EmbeddingProviderConfig(
        kind=data["kind"],
        dimension=data.get("dimension"),
        endpoint=data.get("endpoint"),
        timeout=data.get("timeout", 10.0),
        seed=data.get("seed"),
        max_inflight=data.get("max_inflight", 8),
    )


def load_engine_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    for key in ("w", "tau_s", "tau_t"):
        if key not in data:
            raise ValueError(f"engine config {path} missing required field {key!r}")
    backend_data = data.get("model_backend", {"kind": "mock"})
    return EngineConfig(
        detection=DetectionConfig(w=data["w"], tau_s=data["tau_s"], tau_t=data["tau_t"]),
        text_provider=_provider_config(data["text_provider"]),
        image_provider=_provider_config(data["image_provider"]),
        model_backend=BackendConfig(
            kind=backend_data["kind"],
            endpoint=backend_data.get("endpoint"),
            timeout=backend_data.get("timeout", 30.0),
            label=backend_data.get("label", "normal"),
        ),
        speech_buffer_path=data.get("speech_buffer"),
        multimodal_buffer_path=data.get("multimodal_buffer"),
        include_noise_speech=data.get("include_noise_speech", False),
        eval_parallelism=data.get("eval_parallelism", 1),
        base_dir=path.parent,
    )


def build_detector(config: EngineConfig) -> ConflictDetector:
    """Instantiate providers, load buffers from disk, and wire the detector."""
    text_provider = provider_from_config(config.text_provider)
    image_provider = provider_from_config(config.image_provider)

    speech_buffer = None
    speech_path = config.resolve(config.speech_buffer_path)
    if speech_path is not None:
        loaded = load_buffer(speech_path)
        if not isinstance(loaded, SpeechBuffer):
            raise ValueError(f"{speech_path}: expected a speech buffer")
        speech_buffer = loaded

    multimodal_buffer = None
    mm_path = config.resolve(config.multimodal_buffer_path)
    if mm_path is not None:
        loaded = load_buffer(mm_path)
        if not isinstance(loaded, MultiModalBuffer):
            raise ValueError(f"{mm_path}: expected a multi-modal buffer")
        multimodal_buffer = loaded

    return ConflictDetector(
        config.detection,
        text_provider=text_provider,
        image_provider=image_provider,
        speech_buffer=speech_buffer,
        multimodal_buffer=multimodal_buffer,
        backend=config.model_backend.build(),
    )
