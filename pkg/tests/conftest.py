from __future__ import annotations

import pytest

from conflictkit.embeddings import MockEmbeddingProvider
from conflictkit.synthetic import generate_corpus


@pytest.fixture
def provider():
    return MockEmbeddingProvider(dimension=64, seed=7)


@pytest.fixture
def corpus(tmp_path):
    return generate_corpus(tmp_path / "images", trajectory_lengths=[20, 16], n_static=12, seed=3)
