from __future__ import annotations

import itertools
from collections import Counter

import pytest

from conflictkit.preferences import (
    DEFAULT_CASE_CAP,
    MockSummarizer,
    PredictionContext,
    PredictionParseError,
    PreferenceError,
    PreferenceStore,
    RemoteSummarizer,
    Scenario,
    UserCase,
    parse_prediction_output,
    predict_solution,
)
from conflictkit.types import ConflictLabel, catalog_options, option_by_text

OCCUPANCY = ConflictLabel.HUMAN_OCCUPANCY
WAIT = "Stop execution and wait for the person"
COMMUNICATE = "Directly communicate with the person"
FIND = "Find another similar spot or object"
INFORM = "Inform the user and wait for instructions"


def scenario(n=0, conflict_type=OCCUPANCY):
    return Scenario(
        scenario_id=f"s{n:03d}",
        image=f"images/s{n:03d}.img",
        task="wipe the kitchen counter",
        step="approach the counter",
        conflict_type=conflict_type,
    )


def case(option_text, emergency=1, *, n=0, user="u1", conflict_type=OCCUPANCY, created_at=None):
    return UserCase(
        case_id=f"c{n:03d}",
        user_id=user,
        scenario=scenario(n, conflict_type),
        chosen_option=option_by_text(conflict_type, option_text),
        emergency=emergency,
        created_at=created_at or f"2026-01-01T00:{n:02d}:00+00:00",
    )


def majority_oracle(option_texts, emergencies, options):
    """Independent enumeration of the documented mock rule."""
    counts = Counter(option_texts)
    best = max(counts.values())
    tied = [o for o in options if counts.get(o.text, 0) == best]
    if len(tied) > 1:
        def peak(o):
            return max(e for t, e in zip(option_texts, emergencies) if t == o.text)
        top = max(peak(o) for o in tied)
        tied = [o for o in tied if peak(o) == top]
    return min(tied, key=lambda o: o.ordinal)


# -- value validation -------------------------------------------------------------

def test_case_requires_matching_option_type():
    with pytest.raises(PreferenceError, match="option belongs to"):
        UserCase(
            case_id="bad",
            user_id="u1",
            scenario=scenario(0, ConflictLabel.HUMAN_INTERACTION),
            chosen_option=option_by_text(ConflictLabel.GOAL_ABSENCE,
                                         "Ask people around for help"),
            emergency=1,
            created_at="2026-01-01T00:00:00+00:00",
        )


def test_case_rejects_normal_scenario():
    with pytest.raises(ValueError):
        scenario(0, ConflictLabel.NORMAL) and case(WAIT, conflict_type=ConflictLabel.NORMAL)


def test_case_rejects_bad_emergency():
    with pytest.raises(ValueError):
        case(WAIT, emergency=4)


def test_scenario_normalizes_empty_speech():
    s = Scenario(scenario_id="x", image="i", task="t", step="s",
                 conflict_type=OCCUPANCY, speech="")
    assert s.speech is None


# -- store: cases ------------------------------------------------------------------

def test_record_case_roundtrips(tmp_path):
    store = PreferenceStore(tmp_path)
    c = case(WAIT, emergency=2)
    assert store.record_case(c) == c.case_id
    assert store.get_case(c.case_id) == c


def test_record_case_idempotent_on_identical_resubmission(tmp_path):
    store = PreferenceStore(tmp_path)
    c = case(WAIT)
    store.record_case(c)
    store.record_case(c)
    assert len(store.cases_for_user("u1")) == 1
    # identical resubmission does not even grow the journal
    assert len((tmp_path / "cases.jsonl").read_text().splitlines()) == 1


def test_record_case_same_id_last_writer_wins_with_audit(tmp_path):
    store = PreferenceStore(tmp_path)
    store.record_case(case(WAIT, emergency=1))
    store.record_case(case(COMMUNICATE, emergency=3))
    cases = store.cases_for_user("u1")
    assert len(cases) == 1
    assert cases[0].chosen_option.text == COMMUNICATE
    assert len((tmp_path / "cases.jsonl").read_text().splitlines()) == 2


def test_cases_for_type_filters_and_orders_newest_first(tmp_path):
    store = PreferenceStore(tmp_path)
    for i, (text, kind) in enumerate([
        (WAIT, OCCUPANCY),
        ("Ask people around for help", ConflictLabel.GOAL_ABSENCE),
        (COMMUNICATE, OCCUPANCY),
        ("Ignore and keep original steps", ConflictLabel.HUMAN_INTERACTION),
        (FIND, OCCUPANCY),
    ]):
        store.record_case(case(text, n=i, conflict_type=kind))
    occupancy = store.cases_for_type("u1", OCCUPANCY)
    assert [c.case_id for c in occupancy] == ["c004", "c002", "c000"]
    assert all(c.scenario.conflict_type is OCCUPANCY for c in occupancy)


def test_cases_for_type_partitions_user_cases(tmp_path):
    store = PreferenceStore(tmp_path)
    texts = {
        ConflictLabel.GOAL_ABSENCE: "Ask people around for help",
        OCCUPANCY: WAIT,
        ConflictLabel.OBJECT_STATE: "Find another similar spot or object",
        ConflictLabel.HUMAN_INTERACTION: "Switch to new user or task",
    }
    n = 0
    for kind, text in texts.items():
        for _ in range(3):
            store.record_case(case(text, n=n, conflict_type=kind))
            n += 1
    per_type = [store.cases_for_type("u1", kind) for kind in texts]
    ids = [c.case_id for cases in per_type for c in cases]
    assert sorted(ids) == sorted(c.case_id for c in store.cases_for_user("u1"))
    assert len(ids) == 12


def test_cases_for_type_unknown_user_is_empty(tmp_path):
    assert PreferenceStore(tmp_path).cases_for_type("ghost", OCCUPANCY) == []


def test_cases_for_type_normal_is_an_error(tmp_path):
    with pytest.raises(PreferenceError):
        PreferenceStore(tmp_path).cases_for_type("u1", ConflictLabel.NORMAL)


# -- prediction ---------------------------------------------------------------------

def test_mock_majority_prediction(tmp_path):
    store = PreferenceStore(tmp_path)
    votes = [WAIT, WAIT, WAIT, COMMUNICATE, INFORM]
    cases = [case(text, n=i) for i, text in enumerate(votes)]
    prediction = predict_solution(scenario(99), cases, MockSummarizer(), store=store,
                                  user_id="u1")
    oracle = majority_oracle(votes, [1] * 5, catalog_options(OCCUPANCY))
    assert prediction.predicted_option.text == oracle.text == WAIT
    assert prediction.used_case_ids == tuple(c.case_id for c in cases)
    assert store.get_prediction(prediction.prediction_id) == prediction


def test_mock_tie_breaks_on_highest_emergency(tmp_path):
    # Two-way tie; the communicate case carries the highest emergency.
    votes = [(WAIT, 1), (WAIT, 2), (COMMUNICATE, 3), (COMMUNICATE, 1)]
    cases = [case(text, emergency=e, n=i) for i, (text, e) in enumerate(votes)]
    prediction = predict_solution(scenario(99), cases, MockSummarizer(), user_id="u1")
    oracle = majority_oracle([t for t, _ in votes], [e for _, e in votes],
                             catalog_options(OCCUPANCY))
    assert prediction.predicted_option.text == oracle.text == COMMUNICATE


def test_mock_residual_tie_breaks_on_lowest_ordinal():
    votes = [(WAIT, 2), (COMMUNICATE, 2)]
    cases = [case(text, emergency=e, n=i) for i, (text, e) in enumerate(votes)]
    prediction = predict_solution(scenario(99), cases, MockSummarizer(), user_id="u1")
    assert prediction.predicted_option.text == WAIT  # ordinal 1 beats ordinal 2


def test_mock_rule_matches_oracle_by_enumeration():
    options = catalog_options(OCCUPANCY)
    texts = [o.text for o in options]
    mock = MockSummarizer()
    for combo in itertools.product(range(4), repeat=3):
        for emergencies in [(1, 1, 1), (1, 2, 3), (3, 2, 1)]:
            votes = [texts[i] for i in combo]
            cases = [case(t, emergency=e, n=i)
                     for i, (t, e) in enumerate(zip(votes, emergencies))]
            context = PredictionContext(scenario=scenario(0), cases=tuple(cases),
                                        options=tuple(options))
            assert mock.choose(context).text == majority_oracle(
                votes, list(emergencies), options
            ).text


def test_mock_prediction_is_deterministic():
    votes = [WAIT, COMMUNICATE, COMMUNICATE, FIND]
    cases = [case(t, n=i) for i, t in enumerate(votes)]
    a = predict_solution(scenario(1), cases, MockSummarizer(), user_id="u1",
                         prediction_id="p1", now=lambda: "2026-01-01T00:00:00+00:00")
    b = predict_solution(scenario(1), cases, MockSummarizer(), user_id="u1",
                         prediction_id="p1", now=lambda: "2026-01-01T00:00:00+00:00")
    assert a == b


def test_uniform_emergency_raise_never_changes_majority_winner():
    options = catalog_options(OCCUPANCY)
    texts = [o.text for o in options]
    mock = MockSummarizer()
    for combo in itertools.product(range(3), repeat=4):
        votes = [texts[i] for i in combo]
        low = [case(t, emergency=1, n=i) for i, t in enumerate(votes)]
        high = [case(t, emergency=3, n=i) for i, t in enumerate(votes)]
        ctx_low = PredictionContext(scenario=scenario(0), cases=tuple(low),
                                    options=tuple(options))
        ctx_high = PredictionContext(scenario=scenario(0), cases=tuple(high),
                                     options=tuple(options))
        assert mock.choose(ctx_low).text == mock.choose(ctx_high).text


def test_prediction_without_cases_is_marked(tmp_path):
    store = PreferenceStore(tmp_path)
    prediction = predict_solution(scenario(5), [], MockSummarizer(), store=store,
                                  user_id="u1")
    assert prediction.preference_summary.startswith("no-preference-data")
    assert prediction.used_case_ids == ()
    assert prediction.predicted_option.text in {o.text for o in catalog_options(OCCUPANCY)}


def test_prediction_rejects_cross_type_cases():
    other = case("Ask people around for help", conflict_type=ConflictLabel.GOAL_ABSENCE)
    with pytest.raises(PreferenceError, match="scenario is human_occupancy"):
        predict_solution(scenario(0), [other], MockSummarizer())


def test_prediction_rejects_normal_scenario():
    s = Scenario(scenario_id="x", image="i", task="t", step="s",
                 conflict_type=ConflictLabel.NORMAL)
    with pytest.raises(PreferenceError, match="Normal"):
        predict_solution(s, [], MockSummarizer())


def test_prediction_caps_cases_newest_first(tmp_path):
    cases = [case(WAIT, n=i) for i in range(DEFAULT_CASE_CAP + 5)]
    prediction = predict_solution(scenario(0), cases, MockSummarizer(), user_id="u1")
    assert len(prediction.used_case_ids) == DEFAULT_CASE_CAP
    assert prediction.used_case_ids == tuple(c.case_id for c in cases[:DEFAULT_CASE_CAP])


def test_backend_option_outside_catalog_is_validation_error():
    class DriftingBackend:
        def complete(self, prompt, context):
            return "Summary: prefers shortcuts\nOption: Reboot the robot"

    with pytest.raises(PredictionParseError) as err:
        predict_solution(scenario(0), [case(WAIT)], DriftingBackend())
    assert "Reboot the robot" in err.value.raw


def test_backend_missing_lines_is_parse_error():
    class MumblingBackend:
        def complete(self, prompt, context):
            return "I think waiting is fine."

    with pytest.raises(PredictionParseError):
        predict_solution(scenario(0), [case(WAIT)], MumblingBackend())


def test_parse_prediction_output_is_case_insensitive_on_option():
    options = catalog_options(OCCUPANCY)
    summary, option = parse_prediction_output(
        "summary: waits patiently\noption: stop execution and wait for the person", options
    )
    assert summary == "waits patiently"
    assert option.text == WAIT


def test_prompt_renders_options_cases_and_scenario():
    seen = {}

    class Recorder:
        def complete(self, prompt, context):
            seen["prompt"] = prompt
            return f"Summary: ok\nOption: {WAIT}"

    cases = [case(WAIT, emergency=3, n=1)]
    predict_solution(scenario(2), cases, Recorder(), user_id="u1")
    prompt = seen["prompt"]
    for option in catalog_options(OCCUPANCY):
        assert option.text in prompt
    assert "Emergency level: 3" in prompt
    assert "wipe the kitchen counter" in prompt
    assert "human_occupancy" in prompt


def test_remote_summarizer_wire_format(monkeypatch):
    import httpx

    calls = {}

    def fake_post(self, url, json=None):
        calls["url"], calls["body"] = url, json
        return httpx.Response(
            200, json={"response": f"Summary: s\nOption: {WAIT}"},
            request=httpx.Request("POST", url),
        )

    monkeypatch.setattr(httpx.Client, "post", fake_post)
    backend = RemoteSummarizer("http://summarize.local/v1")
    prediction = predict_solution(scenario(0), [case(WAIT)], backend, user_id="u1")
    assert prediction.predicted_option.text == WAIT
    assert "prompt" in calls["body"]


# -- ratings ------------------------------------------------------------------------

def make_prediction(store, n=0):
    return predict_solution(scenario(n), [case(WAIT, n=n)], MockSummarizer(),
                            store=store, user_id="u1")


def test_record_rating_stores_value(tmp_path):
    store = PreferenceStore(tmp_path)
    prediction = make_prediction(store)
    updated = store.record_rating(prediction.prediction_id, 5)
    assert updated.rating == 5
    assert updated.rated_at is not None


@pytest.mark.parametrize("bad", [0, 6, -1])
def test_record_rating_range(tmp_path, bad):
    store = PreferenceStore(tmp_path)
    prediction = make_prediction(store)
    with pytest.raises(ValueError):
        store.record_rating(prediction.prediction_id, bad)


def test_record_rating_unknown_prediction(tmp_path):
    with pytest.raises(KeyError):
        PreferenceStore(tmp_path).record_rating("nope", 3)


def test_rerating_overwrites_with_audit(tmp_path):
    store = PreferenceStore(tmp_path)
    prediction = make_prediction(store)
    store.record_rating(prediction.prediction_id, 3)
    updated = store.record_rating(prediction.prediction_id, 4)
    assert updated.rating == 4
    assert len(store.rating_events()) == 2


# -- persistence --------------------------------------------------------------------

def test_store_replays_to_identical_state(tmp_path):
    store = PreferenceStore(tmp_path)
    for i, text in enumerate([WAIT, COMMUNICATE, WAIT]):
        store.record_case(case(text, n=i))
    prediction = make_prediction(store, n=9)
    store.record_rating(prediction.prediction_id, 4)

    reborn = PreferenceStore(tmp_path)
    assert reborn.cases_for_user("u1") == store.cases_for_user("u1")
    assert reborn.predictions_for_user("u1") == store.predictions_for_user("u1")
    assert reborn.rating_events() == store.rating_events()


def test_catalog_closure_over_whole_store(tmp_path):
    store = PreferenceStore(tmp_path)
    for i in range(6):
        prediction = predict_solution(
            scenario(i), [case(WAIT, n=i), case(COMMUNICATE, n=100 + i)],
            MockSummarizer(), store=store, user_id="u1",
        )
        catalog = {o.text for o in catalog_options(prediction.scenario.conflict_type)}
        assert prediction.predicted_option.text in catalog
