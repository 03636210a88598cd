"""Preference engine: stored user cases and summarize-then-choose prediction.

Users annotate conflict scenarios with a preferred option and an emergency
level. When a new conflict of some type arrives, all of that user's cases of
the same type are rendered into a prompt; the summarizer backend writes a
preference summary and picks one catalog option, which is parsed strictly.
State lives in append-only JSON Lines journals so a restart replays to the
exact same listings.
"""

from __future__ import annotations

import json
import re
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Protocol

import httpx

from . import prompts
from .types import (
    ConflictLabel,
    SolutionOption,
    catalog_options,
    option_by_text,
    validate_emergency,
)

RATING_MIN = 1
RATING_MAX = 5

DEFAULT_CASE_CAP = 20


class PreferenceError(Exception):
    """Validation or persistence failure in the preference engine."""


class PredictionParseError(PreferenceError):
    """Summarizer output was missing a summary/option or named a non-catalog option."""

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


@dataclass(frozen=True)
class Scenario:
    """A conflict situation shown to the user or produced by detection."""

    scenario_id: str
    image: str
    task: str
    step: str
    conflict_type: ConflictLabel
    speech: str | None = None

    def __post_init__(self) -> None:
        if not self.task or not self.step:
            raise ValueError(f"scenario {self.scenario_id}: task and step must be non-empty")
        if self.speech == "":
            object.__setattr__(self, "speech", None)

    def to_dict(self) -> dict:
        out = {
            "scenario_id": self.scenario_id,
            "image": self.image,
            "task": self.task,
            "step": self.step,
            "conflict_type": self.conflict_type.value,
        }
        if self.speech is not None:
            out["speech"] = self.speech
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        return cls(
            scenario_id=data["scenario_id"],
            image=data["image"],
            task=data["task"],
            step=data["step"],
            conflict_type=ConflictLabel.from_string(data["conflict_type"]),
            speech=data.get("speech") or None,
        )


@dataclass(frozen=True)
class UserCase:
    """One annotated preference example: scenario, chosen option, emergency level."""

    case_id: str
    user_id: str
    scenario: Scenario
    chosen_option: SolutionOption
    emergency: int
    created_at: str  # ISO-8601 UTC

    def __post_init__(self) -> None:
        if self.scenario.conflict_type is ConflictLabel.NORMAL:
            raise PreferenceError(f"case {self.case_id}: scenario must carry a conflict type")
        if self.chosen_option.conflict_type is not self.scenario.conflict_type:
            raise PreferenceError(
                f"case {self.case_id}: option belongs to {self.chosen_option.conflict_type.value}, "
                f"scenario is {self.scenario.conflict_type.value}"
            )
        catalog = {o.text for o in catalog_options(self.scenario.conflict_type)}
        if self.chosen_option.text not in catalog:
            raise PreferenceError(f"case {self.case_id}: option not in catalog")
        validate_emergency(self.emergency)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "user_id": self.user_id,
            "scenario": self.scenario.to_dict(),
            "chosen_option": self.chosen_option.text,
            "emergency": self.emergency,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "UserCase":
        scenario = Scenario.from_dict(data["scenario"])
        return cls(
            case_id=data["case_id"],
            user_id=data["user_id"],
            scenario=scenario,
            chosen_option=option_by_text(scenario.conflict_type, data["chosen_option"]),
            emergency=data["emergency"],
            created_at=data["created_at"],
        )


@dataclass(frozen=True)
class PreferencePrediction:
    """A predicted preferred option plus the summary that justified it."""

    prediction_id: str
    user_id: str
    scenario: Scenario
    used_case_ids: tuple[str, ...]
    preference_summary: str
    predicted_option: SolutionOption
    created_at: str
    rating: int | None = None
    rated_at: str | None = None

    def __post_init__(self) -> None:
        catalog = {o.text for o in catalog_options(self.scenario.conflict_type)}
        if self.predicted_option.text not in catalog:
            raise PreferenceError(
                f"prediction {self.prediction_id}: predicted option not in catalog"
            )

    def to_dict(self) -> dict:
        return {
            "prediction_id": self.prediction_id,
            "user_id": self.user_id,
            "scenario": self.scenario.to_dict(),
            "used_case_ids": list(self.used_case_ids),
            "preference_summary": self.preference_summary,
            "predicted_option": self.predicted_option.text,
            "created_at": self.created_at,
            "rating": self.rating,
            "rated_at": self.rated_at,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreferencePrediction":
        scenario = Scenario.from_dict(data["scenario"])
        return cls(
            prediction_id=data["prediction_id"],
            user_id=data["user_id"],
            scenario=scenario,
            used_case_ids=tuple(data["used_case_ids"]),
            preference_summary=data["preference_summary"],
            predicted_option=option_by_text(scenario.conflict_type, data["predicted_option"]),
            created_at=data["created_at"],
            rating=data.get("rating"),
            rated_at=data.get("rated_at"),
        )


@dataclass(frozen=True)
class PredictionContext:
    """Structured view of a prediction request, for backends that want it."""

    scenario: Scenario
    cases: tuple[UserCase, ...]
    options: tuple[SolutionOption, ...]


class SummarizerBackend(Protocol):
    def complete(self, prompt: str, context: PredictionContext) -> str: ...


class MockSummarizer:
    """Deterministic stand-in: majority vote over case options.

    Ties go to the option whose supporting cases carry the highest emergency
    level; a residual tie goes to the lowest catalog ordinal. With no cases it
    falls back to the first catalog option. This rule is a test oracle, not a
    claim about what a real summarizer would do.
    """

    def complete(self, prompt: str, context: PredictionContext) -> str:
        option = self.choose(context)
        counts = self._counts(context)
        if context.cases:
            detail = ", ".join(
                f"'{o.text}' x{counts[o.text]}" for o in context.options if counts[o.text]
            )
            summary = (
                f"Across {len(context.cases)} stored cases the user most often chose "
                f"'{option.text}' ({detail})."
            )
        else:
            summary = "No stored cases for this conflict type; defaulting to the first option."
        return f"Summary: {summary}\nOption: {option.text}"

    def choose(self, context: PredictionContext) -> SolutionOption:
        if not context.cases:
            return context.options[0]
        counts = self._counts(context)
        best_count = max(counts.values())
        tied = [o for o in context.options if counts[o.text] == best_count]
        if len(tied) == 1:
            return tied[0]
        def max_emergency(option: SolutionOption) -> int:
            return max(c.emergency for c in context.cases if c.chosen_option.text == option.text)
        best_emergency = max(max_emergency(o) for o in tied)
        tied = [o for o in tied if max_emergency(o) == best_emergency]
        return min(tied, key=lambda o: o.ordinal)

    @staticmethod
    def _counts(context: PredictionContext) -> dict[str, int]:
        counts = {o.text: 0 for o in context.options}
        for case in context.cases:
            counts[case.chosen_option.text] += 1
        return counts


class RemoteSummarizer:
    """HTTP summarizer: POST {"prompt": ...} -> {"response": str}."""

    def __init__(self, endpoint: str, *, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = httpx.Client(timeout=timeout)

    def complete(self, prompt: str, context: PredictionContext) -> str:
        try:
            response = self._client.post(self.endpoint, json={"prompt": prompt})
        except httpx.HTTPError as exc:
            raise PreferenceError(f"summarizer backend {self.endpoint} failed: {exc}") from exc
        if response.status_code != 200:
            raise PreferenceError(
                f"summarizer backend {self.endpoint} returned HTTP {response.status_code}"
            )
        data = response.json()
        if "response" not in data:
            raise PreferenceError(f"summarizer backend {self.endpoint} returned no 'response'")
        return str(data["response"])

    def close(self) -> None:
        self._client.close()


_SUMMARY_RE = re.compile(r"^summary:\s*(.*\S)\s*$", re.IGNORECASE | re.MULTILINE)
_OPTION_RE = re.compile(r"^option:\s*(.*\S)\s*$", re.IGNORECASE | re.MULTILINE)


def parse_prediction_output(raw: str, options: list[SolutionOption]) -> tuple[str, SolutionOption]:
    """Pull (summary, option) out of summarizer output; the option must be in catalog."""
    summary_match = _SUMMARY_RE.search(raw)
    option_match = _OPTION_RE.search(raw)
    if not summary_match or not option_match:
        raise PredictionParseError("summarizer output missing Summary: or Option: line", raw=raw)
    option_text = option_match.group(1).strip()
    matches = [o for o in options if o.text.lower() == option_text.lower()]
    if len(matches) != 1:
        raise PredictionParseError(
            f"summarizer chose {option_text!r}, which is not a catalog option", raw=raw
        )
    return summary_match.group(1).strip(), matches[0]


def _utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def render_scenario_block(scenario: Scenario) -> str:
    lines = [f"Task: {scenario.task}", f"Step: {scenario.step}"]
    if scenario.speech:
        lines.append(f"Speech: {scenario.speech}")
    return "\n".join(lines)


def predict_solution(
    scenario: Scenario,
    cases: list[UserCase],
    backend: SummarizerBackend,
    *,
    store: "PreferenceStore | None" = None,
    user_id: str | None = None,
    case_cap: int = DEFAULT_CASE_CAP,
    prediction_id: str | None = None,
    now: Callable[[], str] = _utc_now_iso,
) -> PreferencePrediction:
    """Render the type-specific prompt, run the summarizer, parse and persist.

    All provided same-type cases are sent, newest first, capped at case_cap to
    bound prompt size. An empty case list still predicts but the stored
    summary is flagged no-preference-data.
    """
    if scenario.conflict_type is ConflictLabel.NORMAL:
        raise PreferenceError("cannot predict a solution for a Normal scenario")
    for case in cases:
        if case.scenario.conflict_type is not scenario.conflict_type:
            raise PreferenceError(
                f"case {case.case_id} is {case.scenario.conflict_type.value}, "
                f"scenario is {scenario.conflict_type.value}"
            )
    used = cases[:case_cap]
    options = catalog_options(scenario.conflict_type)
    case_blocks = [
        prompts.render_case_block(
            i + 1, c.scenario.task, c.scenario.step, c.scenario.speech,
            c.chosen_option.text, c.emergency,
        )
        for i, c in enumerate(used)
    ]
    prompt = prompts.render_preference_prompt(
        scenario.conflict_type, options, case_blocks, render_scenario_block(scenario)
    )
    context = PredictionContext(scenario=scenario, cases=tuple(used), options=tuple(options))
    raw = backend.complete(prompt, context)
    summary, option = parse_prediction_output(raw, options)
    if not used:
        summary = f"no-preference-data: {summary}"
    prediction = PreferencePrediction(
        prediction_id=prediction_id or uuid.uuid4().hex,
        user_id=user_id or (used[0].user_id if used else "unknown"),
        scenario=scenario,
        used_case_ids=tuple(c.case_id for c in used),
        preference_summary=summary,
        predicted_option=option,
        created_at=now(),
    )
    if store is not None:
        store.save_prediction(prediction)
    return prediction


class PreferenceStore:
    """Journal-backed store for cases, predictions, and ratings.

    Submissions append to per-kind JSON Lines journals and update in-memory
    maps; replaying the journals at startup reproduces the exact same state,
    which is what makes restart listings byte-identical. Writes are
    serialized by a lock; reads hit the in-memory maps.
    """

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._cases_path = self.data_dir / "cases.jsonl"
        self._predictions_path = self.data_dir / "predictions.jsonl"
        self._ratings_path = self.data_dir / "ratings.jsonl"
        self._lock = threading.Lock()
        self._cases: dict[str, UserCase] = {}
        self._case_order: dict[str, int] = {}
        self._predictions: dict[str, PreferencePrediction] = {}
        self._prediction_order: dict[str, int] = {}
        self._rating_events: list[dict] = []
        self._seq = 0
        self._replay()

    def _replay(self) -> None:
        for line in _read_lines(self._cases_path):
            self._apply_case(UserCase.from_dict(json.loads(line)))
        for line in _read_lines(self._predictions_path):
            self._apply_prediction(PreferencePrediction.from_dict(json.loads(line)))
        for line in _read_lines(self._ratings_path):
            event = json.loads(line)
            self._apply_rating(event)

    def _apply_case(self, case: UserCase) -> None:
        if case.case_id not in self._case_order:
            self._seq += 1
            self._case_order[case.case_id] = self._seq
        self._cases[case.case_id] = case

    def _apply_prediction(self, prediction: PreferencePrediction) -> None:
        if prediction.prediction_id not in self._prediction_order:
            self._seq += 1
            self._prediction_order[prediction.prediction_id] = self._seq
        self._predictions[prediction.prediction_id] = prediction

    def _apply_rating(self, event: dict) -> None:
        self._rating_events.append(event)
        prediction = self._predictions.get(event["prediction_id"])
        if prediction is not None:
            self._predictions[event["prediction_id"]] = replace(
                prediction, rating=event["rating"], rated_at=event["rated_at"]
            )

    # -- cases ---------------------------------------------------------------

    def record_case(self, case: UserCase) -> str:
        """Persist a case. Identical resubmission is a no-op for state; any
        resubmission of the same case_id is last-writer-wins with the journal
        as audit log."""
        with self._lock:
            existing = self._cases.get(case.case_id)
            if existing is not None and existing.to_dict() == case.to_dict():
                return case.case_id
            _append_line(self._cases_path, case.to_dict())
            self._apply_case(case)
        return case.case_id

    def get_case(self, case_id: str) -> UserCase | None:
        return self._cases.get(case_id)

    def cases_for_user(self, user_id: str) -> list[UserCase]:
        cases = [c for c in self._cases.values() if c.user_id == user_id]
        cases.sort(key=lambda c: (c.created_at, self._case_order[c.case_id]), reverse=True)
        return cases

    def cases_for_type(self, user_id: str, conflict_type: ConflictLabel) -> list[UserCase]:
        """All and only this user's cases of one conflict type, newest first."""
        if conflict_type is ConflictLabel.NORMAL:
            raise PreferenceError("Normal has no preference cases")
        return [c for c in self.cases_for_user(user_id)
                if c.scenario.conflict_type is conflict_type]

    # -- predictions ---------------------------------------------------------

    def save_prediction(self, prediction: PreferencePrediction) -> str:
        with self._lock:
            _append_line(self._predictions_path, prediction.to_dict())
            self._apply_prediction(prediction)
        return prediction.prediction_id

    def get_prediction(self, prediction_id: str) -> PreferencePrediction | None:
        return self._predictions.get(prediction_id)

    def predictions_for_user(self, user_id: str) -> list[PreferencePrediction]:
        preds = [p for p in self._predictions.values() if p.user_id == user_id]
        preds.sort(key=lambda p: (p.created_at, self._prediction_order[p.prediction_id]))
        return preds

    def record_rating(self, prediction_id: str, rating: int,
                      now: Callable[[], str] = _utc_now_iso) -> PreferencePrediction:
        """Store a 1-5 rating; re-rating overwrites and the journal keeps the audit trail."""
        if not (RATING_MIN <= rating <= RATING_MAX):
            raise ValueError(f"rating must be in [{RATING_MIN}, {RATING_MAX}], got {rating}")
        with self._lock:
            prediction = self._predictions.get(prediction_id)
            if prediction is None:
                raise KeyError(f"unknown prediction: {prediction_id}")
            event = {"prediction_id": prediction_id, "rating": rating, "rated_at": now()}
            _append_line(self._ratings_path, event)
            self._apply_rating(event)
            return self._predictions[prediction_id]

    def rating_events(self) -> list[dict]:
        return list(self._rating_events)


def _read_lines(path: Path) -> list[str]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as fh:
        return [line for line in (l.strip() for l in fh) if line]


def _append_line(path: Path, payload: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, ensure_ascii=False, separators=(",", ":")) + "\n")
