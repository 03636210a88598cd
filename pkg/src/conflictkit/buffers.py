"""Retrieval buffers: the speech store and the multi-modal task-attribute store.

Both buffers are exact-scan stores over unit-norm embeddings. The speech
buffer is queried by max cosine; the multi-modal buffer fuses a prompt cosine
and an observation cosine with a convex weight and takes the max. At the
scale these buffers run (a few thousand entries) a full scan is faster to
verify and still far inside the latency budget, so no ANN index is used.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embeddings import EmbeddingError, EmbeddingVector
from .types import ConflictLabel, DatasetRecord

BUFFER_MAGIC = b"CKBUF1\n"
BUFFER_VERSION = 1


class BufferError(Exception):
    """Base error for buffer construction, persistence, and queries."""


class EmptyBufferError(BufferError):
    """Query against a buffer with no entries."""


class DimensionMismatchError(BufferError):
    """Query vector dimension or provider does not match the buffer."""


class BufferBuildError(BufferError):
    """Building a buffer failed; message names the offending record."""


def render_prompt(task: str, step: str) -> str:
    """Render task attributes (user task + current step) into one prompt string."""
    return f"Task: {task}\nStep: {step}"


def render_unified_prompt(task: str, step: str, speech: str | None) -> str:
    """Prompt variant that folds speech into the task attributes (joint-retrieval baseline)."""
    if speech is None:
        return render_prompt(task, step)
    return render_prompt(task, step) + f"\nSpeech: {speech}"


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit-norm vectors, clamped to [-1, 1]."""
    if a.dimension != b.dimension:
        raise DimensionMismatchError(f"dimension mismatch: {a.dimension} vs {b.dimension}")
    return float(np.clip(a.values @ b.values, -1.0, 1.0))


@dataclass(frozen=True)
class RetrievalHit:
    """Maximizing entry of a buffer scan: its score, label, and source id."""

    score: float
    entry_label: ConflictLabel
    entry_id: str


def _argmax_hit(scores: np.ndarray, ids: Sequence[str], labels: Sequence[ConflictLabel]) -> RetrievalHit:
    # Ties break to the lexicographically smallest entry id so results are
    # invariant under buffer permutation.
    best_score = float(scores.max())
    tied = np.flatnonzero(scores == best_score)
    best = min(tied, key=lambda i: ids[i])
    return RetrievalHit(score=best_score, entry_label=labels[best], entry_id=ids[best])


class SpeechBuffer:
    """Labeled store of speech-utterance embeddings, scanned by max cosine."""

    kind = "speech"

    def __init__(
        self,
        matrix: np.ndarray,
        ids: Sequence[str],
        labels: Sequence[ConflictLabel],
        provider_id: str,
    ):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise BufferError("speech buffer matrix must be 2-D")
        if matrix.shape[0] != len(ids) or len(ids) != len(labels):
            raise BufferError("speech buffer ids/labels/matrix row counts differ")
        matrix.setflags(write=False)
        self._matrix = matrix
        self._ids = tuple(ids)
        self._labels = tuple(labels)
        self.provider_id = provider_id

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dimension(self) -> int:
        return int(self._matrix.shape[1])

    @property
    def entries(self) -> list[tuple[str, ConflictLabel]]:
        return list(zip(self._ids, self._labels))

    def query(self, query: EmbeddingVector) -> RetrievalHit:
        if len(self) == 0:
            raise EmptyBufferError("speech buffer empty")
        if query.dimension != self.dimension:
            raise DimensionMismatchError(
                f"query dimension {query.dimension} != buffer dimension {self.dimension}"
            )
        if query.provider_id != self.provider_id:
            raise DimensionMismatchError(
                f"query provider {query.provider_id!r} != buffer provider {self.provider_id!r}"
            )
        scores = np.clip(self._matrix @ query.values, -1.0, 1.0)
        return _argmax_hit(scores, self._ids, self._labels)


class MultiModalBuffer:
    """Store of (prompt embedding, observation embedding, label) triples.

    Prompt and observation embeddings may come from different providers and
    have different dimensions; only scores are fused, never vectors.
    """

    kind = "multimodal"

    def __init__(
        self,
        prompt_matrix: np.ndarray,
        obs_matrix: np.ndarray,
        ids: Sequence[str],
        labels: Sequence[ConflictLabel],
        prompt_provider_id: str,
        obs_provider_id: str,
    ):
        prompt_matrix = np.asarray(prompt_matrix, dtype=np.float64)
        obs_matrix = np.asarray(obs_matrix, dtype=np.float64)
        if prompt_matrix.ndim != 2 or obs_matrix.ndim != 2:
            raise BufferError("multi-modal buffer matrices must be 2-D")
        if not (prompt_matrix.shape[0] == obs_matrix.shape[0] == len(ids) == len(labels)):
            raise BufferError("multi-modal buffer ids/labels/matrix row counts differ")
        prompt_matrix.setflags(write=False)
        obs_matrix.setflags(write=False)
        self._prompt_matrix = prompt_matrix
        self._obs_matrix = obs_matrix
        self._ids = tuple(ids)
        self._labels = tuple(labels)
        self.prompt_provider_id = prompt_provider_id
        self.obs_provider_id = obs_provider_id

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def prompt_dimension(self) -> int:
        return int(self._prompt_matrix.shape[1])

    @property
    def obs_dimension(self) -> int:
        return int(self._obs_matrix.shape[1])

    @property
    def entries(self) -> list[tuple[str, ConflictLabel]]:
        return list(zip(self._ids, self._labels))

    def query(self, prompt_q: EmbeddingVector, obs_q: EmbeddingVector, weight: float) -> RetrievalHit:
        if len(self) == 0:
            raise EmptyBufferError("multi-modal buffer empty")
        validate_weight(weight)
        if prompt_q.dimension != self.prompt_dimension:
            raise DimensionMismatchError(
                f"prompt dimension {prompt_q.dimension} != buffer {self.prompt_dimension}"
            )
        if obs_q.dimension != self.obs_dimension:
            raise DimensionMismatchError(
                f"observation dimension {obs_q.dimension} != buffer {self.obs_dimension}"
            )
        if prompt_q.provider_id != self.prompt_provider_id:
            raise DimensionMismatchError(
                f"prompt provider {prompt_q.provider_id!r} != buffer {self.prompt_provider_id!r}"
            )
        if obs_q.provider_id != self.obs_provider_id:
            raise DimensionMismatchError(
                f"observation provider {obs_q.provider_id!r} != buffer {self.obs_provider_id!r}"
            )
        prompt_cos = np.clip(self._prompt_matrix @ prompt_q.values, -1.0, 1.0)
        obs_cos = np.clip(self._obs_matrix @ obs_q.values, -1.0, 1.0)
        fused = weight * prompt_cos + (1.0 - weight) * obs_cos
        return _argmax_hit(fused, self._ids, self._labels)


def validate_weight(weight: float) -> float:
    if not (0.0 <= weight <= 1.0):
        raise ValueError(f"fusion weight must lie in [0, 1], got {weight}")
    return weight


def speech_score(query: EmbeddingVector, buffer: SpeechBuffer) -> RetrievalHit:
    """Max cosine between the speech query and every buffered utterance."""
    return buffer.query(query)


def task_attribute_score(
    prompt_q: EmbeddingVector,
    obs_q: EmbeddingVector,
    buffer: MultiModalBuffer,
    weight: float,
) -> RetrievalHit:
    """Max over entries of weight * prompt cosine + (1 - weight) * observation cosine."""
    return buffer.query(prompt_q, obs_q, weight)


def build_speech_buffer(
    records: Iterable[DatasetRecord],
    provider,
    *,
    include_noise: bool = False,
) -> SpeechBuffer:
    """Embed stored utterances into a speech buffer.

    Default mode keeps only interaction-request speech, so a hit always means
    a human is addressing the robot. With include_noise, normal-labeled noise
    utterances are stored too and the hit's own label is propagated instead.
    """
    wanted = {ConflictLabel.HUMAN_INTERACTION}
    if include_noise:
        wanted.add(ConflictLabel.NORMAL)
    vectors, ids, labels = [], [], []
    for record in records:
        if record.speech is None or record.label not in wanted:
            continue
        try:
            vec = provider.embed_text(record.speech)
        except (EmbeddingError, ValueError) as exc:
            raise BufferBuildError(f"record {record.id}: {exc}") from exc
        vectors.append(vec.values)
        ids.append(record.id)
        labels.append(record.label)
    matrix = np.stack(vectors) if vectors else np.zeros((0, 0), dtype=np.float64)
    provider_id = getattr(provider, "text_provider_id", "unknown")
    return SpeechBuffer(matrix, ids, labels, provider_id)


def build_multimodal_buffer(
    records: Iterable[DatasetRecord],
    text_provider,
    image_provider,
    *,
    unified: bool = False,
) -> MultiModalBuffer:
    """Embed every record's task attributes and observation into a multi-modal buffer.

    With unified=True the prompt additionally folds in the record's speech
    (the joint-retrieval baseline); otherwise speech never enters the prompt.
    """
    prompt_vectors, obs_vectors, ids, labels = [], [], [], []
    for record in records:
        prompt = (
            render_unified_prompt(record.task, record.step, record.speech)
            if unified
            else render_prompt(record.task, record.step)
        )
        try:
            prompt_vec = text_provider.embed_text(prompt)
            obs_vec = image_provider.embed_image(record.image)
        except (EmbeddingError, ValueError) as exc:
            raise BufferBuildError(f"record {record.id}: {exc}") from exc
        prompt_vectors.append(prompt_vec.values)
        obs_vectors.append(obs_vec.values)
        ids.append(record.id)
        labels.append(record.label)
    prompt_matrix = np.stack(prompt_vectors) if prompt_vectors else np.zeros((0, 0))
    obs_matrix = np.stack(obs_vectors) if obs_vectors else np.zeros((0, 0))
    return MultiModalBuffer(
        prompt_matrix,
        obs_matrix,
        ids,
        labels,
        prompt_provider_id=getattr(text_provider, "text_provider_id", "unknown"),
        obs_provider_id=getattr(image_provider, "image_provider_id", "unknown"),
    )


def save_buffer(buffer: SpeechBuffer | MultiModalBuffer, path: str | Path) -> None:
    """Write a buffer to disk: magic + JSON header line + raw float64 matrices.

    The layout is deterministic, so identical buffers serialize byte-identically,
    and float64 payloads round-trip losslessly.
    """
    path = Path(path)
    if isinstance(buffer, SpeechBuffer):
        header = {
            "version": BUFFER_VERSION,
            "kind": buffer.kind,
            "count": len(buffer),
            "dimension": buffer.dimension,
            "provider_id": buffer.provider_id,
            "ids": [i for i, _ in buffer.entries],
            "labels": [l.value for _, l in buffer.entries],
        }
        payload = buffer._matrix.tobytes(order="C")
    else:
        header = {
            "version": BUFFER_VERSION,
            "kind": buffer.kind,
            "count": len(buffer),
            "prompt_dimension": buffer.prompt_dimension,
            "obs_dimension": buffer.obs_dimension,
            "prompt_provider_id": buffer.prompt_provider_id,
            "obs_provider_id": buffer.obs_provider_id,
            "ids": [i for i, _ in buffer.entries],
            "labels": [l.value for _, l in buffer.entries],
        }
        payload = buffer._prompt_matrix.tobytes(order="C") + buffer._obs_matrix.tobytes(order="C")
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(BUFFER_MAGIC)
        fh.write(header_bytes + b"\n")
        fh.write(payload)


def load_buffer(path: str | Path) -> SpeechBuffer | MultiModalBuffer:
    """Read a buffer written by save_buffer."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(BUFFER_MAGIC))
        if magic != BUFFER_MAGIC:
            raise BufferError(f"{path}: not a buffer file (bad magic)")
        header_line = fh.readline()
        payload = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("version") != BUFFER_VERSION:
        raise BufferError(f"{path}: unsupported buffer version {header.get('version')}")
    ids = header["ids"]
    labels = [ConflictLabel.from_string(l) for l in header["labels"]]
    count = header["count"]
    if header["kind"] == "speech":
        dim = header["dimension"]
        matrix = np.frombuffer(payload, dtype=np.float64).reshape(count, dim)
        return SpeechBuffer(matrix, ids, labels, header["provider_id"])
    if header["kind"] == "multimodal":
        pdim, odim = header["prompt_dimension"], header["obs_dimension"]
        split = count * pdim * 8
        prompt_matrix = np.frombuffer(payload[:split], dtype=np.float64).reshape(count, pdim)
        obs_matrix = np.frombuffer(payload[split:], dtype=np.float64).reshape(count, odim)
        return MultiModalBuffer(
            prompt_matrix,
            obs_matrix,
            ids,
            labels,
            prompt_provider_id=header["prompt_provider_id"],
            obs_provider_id=header["obs_provider_id"],
        )
    raise BufferError(f"{path}: unknown buffer kind {header['kind']!r}")
