"""Shared test helpers."""

from __future__ import annotations

import numpy as np

from conflictkit.embeddings import EmbeddingVector


def unit_vector(values, provider_id="test") -> EmbeddingVector:
    arr = np.asarray(values, dtype=np.float64)
    return EmbeddingVector(values=arr / np.linalg.norm(arr), provider_id=provider_id)


def random_unit_vectors(rng, n, d, provider_id="test"):
    raw = rng.standard_normal((n, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    return [EmbeddingVector(values=row, provider_id=provider_id) for row in raw]
