from __future__ import annotations

import pytest

from conflictkit.buffers import build_multimodal_buffer, build_speech_buffer
from conflictkit.embeddings import MockEmbeddingProvider
from conflictkit.detection import (
    METHOD_MODEL,
    METHOD_SPEECH,
    METHOD_TASK,
    ConflictDetector,
    DetectionConfig,
    DetectionError,
    LabelParseError,
    MockModelBackend,
    ModelBackendError,
    RemoteModelBackend,
    StreamFailure,
    escalate,
    parse_label,
)
from conflictkit.types import ConflictLabel, DetectionInput


def make_detector(corpus, provider, *, config=None, backend=None, include_noise=False,
                  with_speech=True, with_multimodal=True):
    return ConflictDetector(
        config or DetectionConfig.default(),
        text_provider=provider,
        image_provider=provider,
        speech_buffer=build_speech_buffer(corpus, provider, include_noise=include_noise)
        if with_speech else None,
        multimodal_buffer=build_multimodal_buffer(corpus, provider, provider)
        if with_multimodal else None,
        backend=backend,
    )


def novel_input(speech=None):
    return DetectionInput(
        image=b"never-seen-observation-bytes",
        task="assemble the prototype windmill kit",
        step="align the rotor blades",
        speech=speech,
    )


# -- config ---------------------------------------------------------------------

def test_default_config_ships_published_values():
    config = DetectionConfig.default()
    assert (config.w, config.tau_s, config.tau_t) == (0.87, 0.88, 0.94)


def test_config_validates_weight_and_thresholds():
    with pytest.raises(ValueError):
        DetectionConfig(w=1.2, tau_s=0.5, tau_t=0.5)
    with pytest.raises(ValueError):
        DetectionConfig(w=0.5, tau_s=-0.1, tau_t=0.5)
    # Thresholds above 1 are allowed: they disable a gate / force escalation.
    DetectionConfig(w=0.5, tau_s=1.5, tau_t=1.5)


# -- label parsing -----------------------------------------------------------------

@pytest.mark.parametrize("label", list(ConflictLabel))
def test_parse_label_accepts_each_canonical_token(label):
    assert parse_label(f"The detected type is {label.value}.") is label


def test_parse_label_case_insensitive_and_space_tolerant():
    assert parse_label("GOAL_ABSENCE") is ConflictLabel.GOAL_ABSENCE
    assert parse_label("I see a Human Interaction here") is ConflictLabel.HUMAN_INTERACTION


def test_parse_label_zero_tokens_is_error():
    with pytest.raises(LabelParseError) as err:
        parse_label("no conflict mentioned at all")
    assert err.value.raw == "no conflict mentioned at all"


def test_parse_label_multiple_tokens_is_error():
    with pytest.raises(LabelParseError):
        parse_label("could be normal or object_state")
    with pytest.raises(LabelParseError):
        parse_label("normal normal")


def test_parse_label_ignores_embedded_words():
    # "abnormal"/"normally" must not count as the normal token.
    with pytest.raises(LabelParseError):
        parse_label("abnormal readings, normally fine")


# -- escalation ---------------------------------------------------------------------

def test_escalate_scripted_normal():
    backend = MockModelBackend(label="normal")
    assert escalate(novel_input(), backend) is ConflictLabel.NORMAL
    assert backend.calls == 1


def test_escalate_parses_free_text_with_one_token():
    backend = MockModelBackend(responder=lambda user: "After looking, this is goal_absence.")
    assert escalate(novel_input(), backend) is ConflictLabel.GOAL_ABSENCE


def test_escalate_unparseable_keeps_raw_response():
    backend = MockModelBackend(responder=lambda user: "object_state or human_occupancy")
    with pytest.raises(LabelParseError) as err:
        escalate(novel_input(), backend)
    assert "object_state or human_occupancy" == err.value.raw


def test_escalate_renders_task_step_and_speech_into_prompt():
    seen = {}

    def responder(user):
        seen["user"] = user
        return "normal"

    backend = MockModelBackend(responder=responder)
    escalate(novel_input(speech="robot please wait"), backend)
    assert "Task: assemble the prototype windmill kit" in seen["user"]
    assert "Step: align the rotor blades" in seen["user"]
    assert "Speech: robot please wait" in seen["user"]
    escalate(novel_input(), backend)
    assert "Speech: none" in seen["user"]


def test_remote_backend_wire_format(monkeypatch):
    import httpx

    calls = {}

    def fake_post(self, url, json=None):
        calls["url"] = url
        calls["body"] = json
        return httpx.Response(200, json={"response": "human_occupancy"},
                              request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx.Client, "post", fake_post)
    backend = RemoteModelBackend("http://model.local/v1/classify")
    label = escalate(novel_input(), backend)
    assert label is ConflictLabel.HUMAN_OCCUPANCY
    assert calls["body"]["system"]
    assert "Task:" in calls["body"]["prompt"]
    assert "image_b64" in calls["body"]


def test_remote_backend_http_error(monkeypatch):
    import httpx

    def fake_post(self, url, json=None):
        return httpx.Response(500, json={}, request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx.Client, "post", fake_post)
    backend = RemoteModelBackend("http://model.local/v1/classify")
    with pytest.raises(ModelBackendError) as err:
        backend.classify("sys", "user", b"img")
    assert err.value.retriable


# -- detect: the three gates -----------------------------------------------------------

def interaction_record(corpus):
    return next(r for r in corpus
                if r.label is ConflictLabel.HUMAN_INTERACTION and r.speech)


def test_planted_speech_short_circuits(corpus, provider):
    backend = MockModelBackend(label="normal")
    detector = make_detector(corpus, provider, backend=backend)
    record = interaction_record(corpus)
    result = detector.detect(record.to_detection_input())
    assert result.label is ConflictLabel.HUMAN_INTERACTION
    assert result.method == METHOD_SPEECH
    assert result.speech_score is not None and result.speech_score > 0.88
    assert result.task_score is None  # short-circuit: task stage never ran
    assert result.matched_entry_id == record.id
    assert backend.calls == 0


def test_speech_gate_result_is_independent_of_multimodal_buffer(corpus, provider):
    record = interaction_record(corpus)
    with_buffer = make_detector(corpus, provider, backend=MockModelBackend())
    without_buffer = make_detector(corpus, provider, backend=MockModelBackend(),
                                   with_multimodal=False)
    a = with_buffer.detect(record.to_detection_input())
    b = without_buffer.detect(record.to_detection_input())
    assert (a.label, a.method, a.matched_entry_id) == (b.label, b.method, b.matched_entry_id)


def test_planted_task_attributes_answer_without_model(corpus, provider):
    backend = MockModelBackend(label="normal")
    detector = make_detector(corpus, provider, backend=backend)
    record = next(r for r in corpus if r.label is ConflictLabel.OBJECT_STATE and not r.speech)
    result = detector.detect(record.to_detection_input())
    assert result.label is ConflictLabel.OBJECT_STATE
    assert result.method == METHOD_TASK
    assert result.task_score == pytest.approx(1.0, abs=1e-9)
    assert result.task_score >= 0.94
    assert result.matched_entry_id == record.id
    assert backend.calls == 0


def test_low_confidence_escalates_to_model(corpus, provider):
    backend = MockModelBackend(label="goal_absence")
    detector = make_detector(corpus, provider, backend=backend)
    result = detector.detect(novel_input())
    assert result.label is ConflictLabel.GOAL_ABSENCE
    assert result.method == METHOD_MODEL
    assert result.task_score is not None and result.task_score < 0.94
    assert backend.calls == 1


def test_subthreshold_speech_falls_through_to_task_stage(corpus, provider):
    backend = MockModelBackend(label="normal")
    detector = make_detector(corpus, provider, backend=backend)
    noise_record = next(
        r for r in corpus if r.label is ConflictLabel.NORMAL and r.speech
    )
    result = detector.detect(noise_record.to_detection_input())
    assert result.method == METHOD_TASK
    assert result.label is ConflictLabel.NORMAL
    assert result.speech_score is not None  # computed and carried
    assert result.speech_score <= 0.88
    assert result.task_score == pytest.approx(1.0, abs=1e-9)


def test_no_speech_never_uses_speech_method(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    for record in corpus[:20]:
        if record.speech:
            continue
        result = detector.detect(record.to_detection_input())
        assert result.method != METHOD_SPEECH
        assert result.speech_score is None


def test_empty_speech_buffer_is_no_trigger(corpus, provider):
    detector = make_detector([], provider, backend=MockModelBackend(), with_multimodal=False)
    detector.multimodal_buffer = build_multimodal_buffer(corpus, provider, provider)
    record = interaction_record(corpus)
    result = detector.detect(record.to_detection_input())
    assert result.method == METHOD_TASK  # planted in B_m, so the task gate answers
    assert result.speech_score is None


def test_noise_mode_propagates_stored_label(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend(),
                             include_noise=True)
    noise_record = next(r for r in corpus if r.label is ConflictLabel.NORMAL and r.speech)
    result = detector.detect(noise_record.to_detection_input())
    assert result.method == METHOD_SPEECH
    assert result.label is ConflictLabel.NORMAL
    assert result.speech_score == pytest.approx(1.0, abs=1e-9)


def test_missing_backend_when_escalation_needed(corpus, provider):
    detector = make_detector(corpus, provider, backend=None)
    with pytest.raises(DetectionError) as err:
        detector.detect(novel_input())
    assert err.value.task_score is not None


def test_backend_failure_carries_partial_scores(corpus, provider):
    class FailingBackend:
        def classify(self, system, user, image):
            raise ModelBackendError("backend down", retriable=True)

    detector = make_detector(corpus, provider, backend=FailingBackend())
    with pytest.raises(DetectionError) as err:
        detector.detect(novel_input())
    assert err.value.task_score is not None and err.value.task_score < 0.94


def test_provider_failure_is_an_error_not_silent_normal(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    unreadable = DetectionInput(image="/nonexistent/observation.img",
                                task="tidy the shelf", step="reach the shelf")
    with pytest.raises(DetectionError, match="embedding failed"):
        detector.detect(unreadable)


def test_incompatible_buffer_is_a_detection_error(corpus, provider):
    # buffers built at d=32 but queried with the d=64 provider
    narrow = MockEmbeddingProvider(dimension=32, seed=7)
    detector = ConflictDetector(
        DetectionConfig.default(), text_provider=provider, image_provider=provider,
        multimodal_buffer=build_multimodal_buffer(corpus, narrow, narrow),
        backend=MockModelBackend(),
    )
    with pytest.raises(DetectionError, match="retrieval failed"):
        detector.detect(corpus[0].to_detection_input())


def test_detect_is_reentrant_across_threads(corpus, provider):
    import threading

    detector = make_detector(corpus, provider, backend=MockModelBackend())
    record = next(r for r in corpus if not r.speech)
    results = [None] * 8

    def work(i):
        results[i] = detector.detect(record.to_detection_input())

    threads = [threading.Thread(target=work, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r is not None for r in results)
    assert len({(r.label, r.method, r.matched_entry_id) for r in results}) == 1


def test_no_buffers_at_all_escalates_directly(provider):
    detector = ConflictDetector(
        DetectionConfig.default(), text_provider=provider, image_provider=provider,
        backend=MockModelBackend(label="human_occupancy"),
    )
    result = detector.detect(novel_input())
    assert result.method == METHOD_MODEL
    assert result.task_score is None
    assert result.speech_score is None


def test_gate_exclusivity_and_score_consistency(corpus, provider):
    config = DetectionConfig(w=0.87, tau_s=0.88, tau_t=0.94)
    detector = make_detector(corpus, provider, config=config,
                             backend=MockModelBackend(label="normal"))
    for record in corpus:
        result = detector.detect(record.to_detection_input())
        if result.method == METHOD_SPEECH:
            assert result.speech_score is not None and result.speech_score > config.tau_s
        elif result.method == METHOD_TASK:
            assert result.task_score is not None and result.task_score >= config.tau_t
            assert result.speech_score is None or result.speech_score <= config.tau_s
        else:
            assert result.method == METHOD_MODEL
            assert result.task_score is not None and result.task_score < config.tau_t


def test_escalation_count_monotone_in_tau_t(corpus, provider):
    no_speech = [r for r in corpus if not r.speech][:25]
    counts = []
    for tau_t in (0.0, 0.5, 1.0, 1.5):
        backend = MockModelBackend(label="normal")
        detector = make_detector(corpus, provider,
                                 config=DetectionConfig(w=0.87, tau_s=0.88, tau_t=tau_t),
                                 backend=backend)
        for record in no_speech:
            detector.detect(record.to_detection_input())
        counts.append(backend.calls)
    assert counts == sorted(counts)
    assert counts[0] == 0  # every fused score is >= 0, so tau_t = 0 never escalates
    assert counts[-1] == len(no_speech)  # tau_t > 1 escalates everything


def test_latency_accounts_for_stages(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    result = detector.detect(corpus[0].to_detection_input())
    assert result.latency_s >= sum(result.stage_latencies.values()) - 1e-4
    assert result.latency_s < 1.0


def test_result_serializes_to_json_dict(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    result = detector.detect(corpus[0].to_detection_input())
    data = result.to_dict()
    assert data["label"] in {l.value for l in ConflictLabel}
    assert data["method"] in (METHOD_SPEECH, METHOD_TASK, METHOD_MODEL)
    assert isinstance(data["latency_s"], float)
    assert "timestamp" in data


# -- detect_stream ------------------------------------------------------------------

def test_stream_of_normal_frames_yields_all_normal(tmp_path, provider):
    from conflictkit.synthetic import generate_corpus

    frames_corpus = generate_corpus(tmp_path / "imgs", trajectory_lengths=[20],
                                    n_static=0, conflict_every=999, seed=11)
    assert all(r.label is ConflictLabel.NORMAL for r in frames_corpus)
    detector = make_detector(frames_corpus, provider, backend=MockModelBackend())
    results = list(detector.detect_stream(r.to_detection_input() for r in frames_corpus))
    assert len(results) == 20
    assert all(r.label is ConflictLabel.NORMAL for r in results)


def test_stream_flags_exactly_the_planted_conflict_frame(corpus, provider):
    trajectory = [r for r in corpus if r.trajectory_id == corpus[0].trajectory_id]
    trajectory.sort(key=lambda r: r.frame_index)
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    streamed = list(detector.detect_stream(r.to_detection_input() for r in trajectory))
    # Stream results must equal per-frame independent detection.
    for record, streamed_result in zip(trajectory, streamed):
        single = detector.detect(record.to_detection_input())
        assert streamed_result.label is single.label
        assert streamed_result.method == single.method
    flagged = [r.frame_index for r, s in zip(trajectory, streamed) if s.label.is_anomaly]
    expected = [r.frame_index for r in trajectory if r.label.is_anomaly]
    assert flagged == expected


def test_empty_stream_is_empty(corpus, provider):
    detector = make_detector(corpus, provider, backend=MockModelBackend())
    assert list(detector.detect_stream([])) == []


def test_stream_records_errors_without_aborting(corpus, provider):
    detector = make_detector(corpus, provider, backend=None)  # escalation will fail
    frames = [corpus[0].to_detection_input(), novel_input(), corpus[1].to_detection_input()]
    results = list(detector.detect_stream(frames))
    assert len(results) == 3
    assert isinstance(results[1], StreamFailure)
    assert results[1].frame_index == 1
    assert not isinstance(results[0], StreamFailure)
    assert not isinstance(results[2], StreamFailure)
