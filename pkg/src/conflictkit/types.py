"""Shared vocabulary: conflict taxonomy, solution catalogs, dataset records."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

# Trajectory frames are sampled at this cadence (seconds between frames).
FRAME_INTERVAL_S = 0.5


class ConflictLabel(str, Enum):
    """Five-way label space: four human-induced conflict types plus normal."""

    GOAL_ABSENCE = "goal_absence"
    HUMAN_INTERACTION = "human_interaction"
    HUMAN_OCCUPANCY = "human_occupancy"
    OBJECT_STATE = "object_state"
    NORMAL = "normal"

    @property
    def is_anomaly(self) -> bool:
        return self is not ConflictLabel.NORMAL

    @classmethod
    def from_string(cls, value: str) -> "ConflictLabel":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown conflict label: {value!r}") from None


ANOMALY_LABELS: tuple[ConflictLabel, ...] = tuple(
    label for label in ConflictLabel if label.is_anomaly
)

# Emergency levels attached to preference cases: 1 = lowest concern, 3 = highest.
EMERGENCY_LEVELS = (1, 2, 3)


def validate_emergency(level: int) -> int:
    if level not in EMERGENCY_LEVELS:
        raise ValueError(f"emergency level must be one of {EMERGENCY_LEVELS}, got {level!r}")
    return level


@dataclass(frozen=True)
class SolutionOption:
    """One canonical resolution option for a conflict type."""

    conflict_type: ConflictLabel
    text: str
    ordinal: int  # 1..4, catalog order


_CATALOG_TEXTS: dict[ConflictLabel, tuple[str, ...]] = {
    ConflictLabel.GOAL_ABSENCE: (
        "Ask people around for help",
        "Find another similar spot or object",
        "Re-calculate the path or make a new task plan",
        "Inform the user and wait for instructions",
    ),
    ConflictLabel.HUMAN_OCCUPANCY: (
        "Stop execution and wait for the person",
        "Directly communicate with the person",
        "Find another similar spot or object",
        "Inform the user and wait for instructions",
    ),
    ConflictLabel.OBJECT_STATE: (
        "Ask people around for help",
        "Find another similar spot or object",
        "Re-calculate the path or make a new task plan",
        "Inform the user and wait for instructions",
    ),
    ConflictLabel.HUMAN_INTERACTION: (
        "Ignore and keep original steps",
        "Pause current actions and interact with person (chat)",
        "Switch to new user or task",
        "Inform the user and wait for instructions",
    ),
}

_CATALOGS: dict[ConflictLabel, tuple[SolutionOption, ...]] = {
    label: tuple(
        SolutionOption(conflict_type=label, text=text, ordinal=i + 1)
        for i, text in enumerate(texts)
    )
    for label, texts in _CATALOG_TEXTS.items()
}


def catalog_options(conflict_type: ConflictLabel) -> list[SolutionOption]:
    """Return the four canonical options for a conflict type, in catalog order.

    Normal has no catalog; asking for one is an error.
    """
    if conflict_type is ConflictLabel.NORMAL:
        raise ValueError("no solution catalog for Normal")
    return list(_CATALOGS[conflict_type])


def option_by_text(conflict_type: ConflictLabel, text: str) -> SolutionOption:
    """Resolve an option by its exact text within one conflict type's catalog."""
    for option in catalog_options(conflict_type):
        if option.text == text:
            return option
    raise ValueError(f"option {text!r} not in catalog for {conflict_type.value}")


@dataclass(frozen=True)
class DetectionInput:
    """One detection tick: observation image, task context, optional speech."""

    image: str | bytes
    task: str
    step: str
    speech: str | None = None

    def __post_init__(self) -> None:
        if not self.task:
            raise ValueError("task must be non-empty")
        if not self.step:
            raise ValueError("step must be non-empty")
        if self.speech == "":
            object.__setattr__(self, "speech", None)


@dataclass(frozen=True)
class DatasetRecord:
    """One labeled observation: static scenario or trajectory frame.

    Speech absence is encoded as None; loaders normalize "" to None because
    detection branches on speech presence. frame_index is present exactly when
    trajectory_id is, and frames within a trajectory run consecutively from 0.
    """

    id: str
    image: str
    task: str
    step: str
    label: ConflictLabel
    speech: str | None = None
    trajectory_id: str | None = None
    frame_index: int | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must be non-empty")
        if not self.task:
            raise ValueError(f"record {self.id}: task must be non-empty")
        if not self.step:
            raise ValueError(f"record {self.id}: step must be non-empty")
        if self.speech == "":
            object.__setattr__(self, "speech", None)
        if (self.trajectory_id is None) != (self.frame_index is None):
            raise ValueError(
                f"record {self.id}: trajectory_id and frame_index must be set together"
            )
        if self.frame_index is not None and self.frame_index < 0:
            raise ValueError(f"record {self.id}: frame_index must be non-negative")

    def to_detection_input(self) -> DetectionInput:
        return DetectionInput(image=self.image, task=self.task, step=self.step, speech=self.speech)

    def to_dict(self) -> dict:
        out: dict = {"id": self.id, "image": self.image, "task": self.task, "step": self.step}
        if self.speech is not None:
            out["speech"] = self.speech
        out["label"] = self.label.value
        if self.trajectory_id is not None:
            out["trajectory_id"] = self.trajectory_id
            out["frame_index"] = self.frame_index
        return out

    def to_json_line(self) -> str:
        # Key order is fixed by to_dict so identical records serialize byte-identically.
        return json.dumps(self.to_dict(), ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetRecord":
        return cls(
            id=data["id"],
            image=data["image"],
            task=data["task"],
            step=data["step"],
            label=ConflictLabel.from_string(data["label"]),
            speech=data.get("speech") or None,
            trajectory_id=data.get("trajectory_id"),
            frame_index=data.get("frame_index"),
        )

    @classmethod
    def from_json_line(cls, line: str) -> "DatasetRecord":
        return cls.from_dict(json.loads(line))


def load_records(path: str | Path) -> list[DatasetRecord]:
    """Read a JSON Lines dataset file, one record per line, UTF-8."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(DatasetRecord.from_json_line(line))
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad record: {exc}") from exc
    return records


def dump_records(records: Iterable[DatasetRecord], path: str | Path) -> int:
    """Write records as JSON Lines; returns the number written."""
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json_line() + "\n")
            count += 1
    return count


def check_trajectory_frames(records: Iterable[DatasetRecord]) -> None:
    """Validate that each trajectory's frame indices run 0, 1, 2, ... with no gaps."""
    by_trajectory: dict[str, list[int]] = {}
    for record in records:
        if record.trajectory_id is not None:
            by_trajectory.setdefault(record.trajectory_id, []).append(record.frame_index)  # type: ignore[arg-type]
    for trajectory_id, indices in by_trajectory.items():
        indices.sort()
        if indices != list(range(len(indices))):
            raise ValueError(
                f"trajectory {trajectory_id}: frame indices not consecutive from 0: {indices[:10]}..."
            )


def iter_trajectory(records: Iterable[DatasetRecord], trajectory_id: str) -> Iterator[DatasetRecord]:
    """Yield one trajectory's frames in frame order."""
    frames = [r for r in records if r.trajectory_id == trajectory_id]
    frames.sort(key=lambda r: r.frame_index)  # type: ignore[arg-type, return-value]
    yield from frames
