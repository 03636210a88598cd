from __future__ import annotations

from pathlib import Path

from conflictkit.buffers import cosine
from conflictkit.synthetic import (
    INTERACTION_REQUESTS,
    NOISE_SPEECH,
    generate_annotation_scenarios,
    generate_corpus,
)
from conflictkit.types import ANOMALY_LABELS, ConflictLabel, check_trajectory_frames


def test_corpus_is_reproducible(tmp_path):
    a = generate_corpus(tmp_path / "a", trajectory_lengths=[10], n_static=5, seed=42)
    b = generate_corpus(tmp_path / "b", trajectory_lengths=[10], n_static=5, seed=42)
    strip = lambda r: (r.id, r.task, r.step, r.label, r.speech, r.trajectory_id, r.frame_index)
    assert [strip(r) for r in a] == [strip(r) for r in b]
    for ra, rb in zip(a, b):
        assert Path(ra.image).read_bytes() == Path(rb.image).read_bytes()


def test_corpus_has_valid_trajectories_and_unique_images(tmp_path, corpus):
    check_trajectory_frames(corpus)
    blobs = [Path(r.image).read_bytes() for r in corpus]
    assert len(set(blobs)) == len(blobs)
    assert len({r.id for r in corpus}) == len(corpus)


def test_corpus_noise_records_are_normal(corpus):
    noise = [r for r in corpus if r.speech in NOISE_SPEECH]
    assert noise
    assert all(r.label is ConflictLabel.NORMAL for r in noise)


def test_corpus_interaction_speech_only_on_interaction_records(corpus):
    for record in corpus:
        if record.speech in INTERACTION_REQUESTS:
            assert record.label is ConflictLabel.HUMAN_INTERACTION
        if record.label is ConflictLabel.HUMAN_INTERACTION:
            assert record.speech in INTERACTION_REQUESTS


def test_noise_and_interaction_vocabularies_are_disjoint():
    import re

    tokenize = lambda text: set(re.findall(r"[a-z0-9]+", text.lower()))
    noise_tokens = set().union(*(tokenize(t) for t in NOISE_SPEECH))
    request_tokens = set().union(*(tokenize(t) for t in INTERACTION_REQUESTS))
    assert noise_tokens.isdisjoint(request_tokens)


def test_noise_speech_never_trips_the_speech_gate(corpus, provider):
    # Empirical separation: every noise utterance stays far below tau_s
    # against every stored interaction request.
    requests = [provider.embed_text(t) for t in INTERACTION_REQUESTS]
    for noise in NOISE_SPEECH:
        noise_vec = provider.embed_text(noise)
        assert max(cosine(noise_vec, r) for r in requests) < 0.88


def test_annotation_scenarios_cover_each_type(tmp_path):
    scenarios = generate_annotation_scenarios(tmp_path / "imgs", per_type=5)
    assert len(scenarios) == 20
    for label in ANOMALY_LABELS:
        assert sum(1 for s in scenarios if s.conflict_type is label) == 5
    assert len({s.scenario_id for s in scenarios}) == 20
