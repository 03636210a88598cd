"""Text/image embedding providers: deterministic offline mock and remote HTTP client.

Every provider emits unit-norm float64 vectors tagged with a provider id.
Vectors from different providers (or modalities) must never be compared, so
the id encodes kind, dimension, and configuration.
"""

from __future__ import annotations

import base64
import hashlib
import re
import struct
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

NORM_TOLERANCE = 1e-6
ZERO_NORM_GUARD = 1e-12

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Each token spreads over this many buckets. A single bucket per token would
# force direction collisions once the corpus has more distinct tokens than
# dimensions; multiple weighted buckets keep distinct token multisets on
# distinct directions while shared tokens still pull texts together.
_BUCKETS_PER_TOKEN = 4


class EmbeddingError(Exception):
    """Raised when a provider cannot produce a vector."""


class RemoteProviderError(EmbeddingError):
    """Remote embedding call failed; carries endpoint, status, and retriability."""

    def __init__(self, message: str, *, endpoint: str, status: int | None, retriable: bool):
        super().__init__(message)
        self.endpoint = endpoint
        self.status = status
        self.retriable = retriable


@dataclass(frozen=True)
class EmbeddingVector:
    """Unit-norm float vector plus the id of the provider that produced it."""

    values: np.ndarray
    provider_id: str

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dimension(self) -> int:
        return int(self.values.shape[0])


def _finish(raw: np.ndarray, provider_id: str) -> EmbeddingVector:
    norm = float(np.linalg.norm(raw))
    if norm < ZERO_NORM_GUARD:
        raise EmbeddingError("embedding has near-zero norm; cosine similarity undefined")
    return EmbeddingVector(values=raw / norm, provider_id=provider_id)


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    """Declarative provider setup loaded from the engine config file."""

    kind: str  # "mock" | "remote"
    dimension: int | None = None
    endpoint: str | None = None
    timeout: float = 10.0
    seed: int | None = None
    max_inflight: int = 8

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"provider kind must be 'mock' or 'remote', got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote provider requires an endpoint")
        if self.kind == "mock" and self.seed is None:
            raise ValueError("mock provider requires a seed")
        if self.dimension is not None and self.dimension <= 0:
            raise ValueError("dimension must be a positive integer")


class MockEmbeddingProvider:
    """Deterministic offline provider.

    Text: tokens hash (keyed by the seed) into a handful of positively
    weighted buckets, accumulate, then L2-normalize. Same text and seed give
    bitwise-identical vectors; texts sharing tokens land near each other.

    Image: the raw bytes seed a PRNG that draws the vector, so identical
    bytes give identical vectors. All coordinates are kept non-negative, so
    every mock cosine lies in [0, 1].
    """

    def __init__(self, dimension: int = 256, seed: int = 0):
        if dimension <= 0:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.seed = seed
        self._key = struct.pack("<q", seed)
        self.text_provider_id = f"mock:text:d={dimension}:seed={seed}"
        self.image_provider_id = f"mock:image:d={dimension}:seed={seed}"

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be non-empty")
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise EmbeddingError(f"text has no embeddable tokens: {text!r}")
        raw = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            digest = hashlib.blake2b(token.encode("utf-8"), key=self._key, digest_size=16).digest()
            for i in range(_BUCKETS_PER_TOKEN):
                bucket = int.from_bytes(digest[4 * i : 4 * i + 2], "little") % self.dimension
                weight = 0.5 + digest[4 * i + 2] / 255.0
                raw[bucket] += weight
        return _finish(raw, self.text_provider_id)

    def embed_image(self, image: str | Path | bytes) -> EmbeddingVector:
        data = _read_image_bytes(image)
        digest = hashlib.blake2b(data, key=self._key, digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        raw = rng.random(self.dimension)
        return _finish(raw, self.image_provider_id)


def _read_image_bytes(image: str | Path | bytes) -> bytes:
    if isinstance(image, bytes):
        if not image:
            raise EmbeddingError("image bytes are empty")
        return image
    try:
        data = Path(image).read_bytes()
    except OSError as exc:
        raise EmbeddingError(f"cannot read image {image!r}: {exc}") from exc
    if not data:
        raise EmbeddingError(f"image file {image!r} is empty")
    return data


class RemoteEmbeddingProvider:
    """HTTP provider: JSON POST {"kind": "text"|"image", "payload": ...} -> {"vector": [...]}.

    One request per item. The emitted dimension is locked either from config
    or from the first response; any later drift is an error. In-flight
    requests are bounded by a semaphore so concurrent callers cannot pile up.
    """

    def __init__(
        self,
        endpoint: str,
        *,
        dimension: int | None = None,
        timeout: float = 10.0,
        max_inflight: int = 8,
    ):
        self.endpoint = endpoint
        self.timeout = timeout
        self._dimension = dimension
        self._dim_lock = threading.Lock()
        self._inflight = threading.Semaphore(max_inflight)
        self._client = httpx.Client(timeout=timeout)
        self.text_provider_id = f"remote:text:{endpoint}"
        self.image_provider_id = f"remote:image:{endpoint}"

    @property
    def dimension(self) -> int | None:
        return self._dimension

    def embed_text(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be non-empty")
        raw = self._request("text", text)
        return _finish(raw, self.text_provider_id)

    def embed_image(self, image: str | Path | bytes) -> EmbeddingVector:
        data = _read_image_bytes(image)
        payload = base64.b64encode(data).decode("ascii")
        raw = self._request("image", payload)
        return _finish(raw, self.image_provider_id)

    def _request(self, kind: str, payload: str) -> np.ndarray:
        try:
            with self._inflight:
                response = self._client.post(self.endpoint, json={"kind": kind, "payload": payload})
        except httpx.TimeoutException as exc:
            raise RemoteProviderError(
                f"embedding request to {self.endpoint} timed out after {self.timeout}s",
                endpoint=self.endpoint,
                status=None,
                retriable=True,
            ) from exc
        except httpx.HTTPError as exc:
            raise RemoteProviderError(
                f"embedding request to {self.endpoint} failed: {exc}",
                endpoint=self.endpoint,
                status=None,
                retriable=True,
            ) from exc
        if response.status_code != 200:
            raise RemoteProviderError(
                f"embedding endpoint {self.endpoint} returned HTTP {response.status_code}",
                endpoint=self.endpoint,
                status=response.status_code,
                retriable=response.status_code >= 500,
            )
        body = response.json()
        if "vector" not in body:
            raise RemoteProviderError(
                f"embedding endpoint {self.endpoint} returned no 'vector' field",
                endpoint=self.endpoint,
                status=response.status_code,
                retriable=False,
            )
        raw = np.asarray(body["vector"], dtype=np.float64)
        if raw.ndim != 1:
            raise EmbeddingError(f"remote vector must be 1-D, got shape {raw.shape}")
        self._lock_dimension(raw.shape[0])
        return raw

    def _lock_dimension(self, observed: int) -> None:
        with self._dim_lock:
            if self._dimension is None:
                self._dimension = observed
            elif self._dimension != observed:
                raise EmbeddingError(
                    f"remote provider emitted dimension {observed}, expected {self._dimension}"
                )

    def close(self) -> None:
        self._client.close()


def provider_from_config(config: EmbeddingProviderConfig):
    """Instantiate a provider from its declarative config."""
    if config.kind == "mock":
        return MockEmbeddingProvider(dimension=config.dimension or 256, seed=config.seed or 0)
    return RemoteEmbeddingProvider(
        config.endpoint,  # type: ignore[arg-type]
        dimension=config.dimension,
        timeout=config.timeout,
        max_inflight=config.max_inflight,
    )
