"""Synthetic corpus generator producing the same record format as real collections.

Real corpora need a camera and a household; tests need neither. The generator
writes one small unique image file per record and fabricates tasks, steps,
interaction requests, and task-irrelevant noise chatter. The interaction and
noise vocabularies are deliberately disjoint so speech retrieval separates
them cleanly under the mock embedders.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .preferences import Scenario
from .types import ANOMALY_LABELS, ConflictLabel, DatasetRecord

TASKS = [
    ("bring the red cup to the dining table", [
        "navigate to the kitchen counter",
        "pick up the red cup",
        "carry the cup to the dining table",
        "place the cup on the table",
    ]),
    ("throw the empty bottle into the recycling bin", [
        "locate the empty bottle",
        "grasp the bottle",
        "navigate to the recycling bin",
        "drop the bottle into the bin",
    ]),
    ("put the folded towel on the bathroom shelf", [
        "pick up the folded towel",
        "navigate to the bathroom",
        "place the towel on the shelf",
    ]),
    ("deliver the mail envelope to the study desk", [
        "collect the envelope from the tray",
        "navigate to the study",
        "place the envelope on the desk",
    ]),
    ("water the plant near the living room window", [
        "fetch the watering can",
        "navigate to the living room window",
        "pour water into the plant pot",
    ]),
    ("load the two plates into the dishwasher", [
        "collect the plates from the sink",
        "open the dishwasher rack",
        "slot the plates into the rack",
    ]),
    ("fetch the charging cable from the bedroom drawer", [
        "navigate to the bedroom",
        "open the drawer",
        "pick up the charging cable",
        "return to the user",
    ]),
]

# Utterances directed at the robot (interaction requests). Vocabulary chosen
# to not overlap the noise pool below.
INTERACTION_REQUESTS = [
    "robot please come over and help me first",
    "hey robot stop what you are doing",
    "robot can you grab this for me instead",
    "robot follow me to the garage right away",
    "excuse me robot I need your assistance now",
    "robot pause and listen to my request",
]

# Task-irrelevant background conversation (noise). Disjoint vocabulary from
# the interaction pool so the speech gate separates them.
NOISE_SPEECH = [
    "did anyone watch that documentary last night",
    "weather forecast said rain all weekend",
    "we should book flights before prices climb",
    "her sister called about a birthday dinner",
    "that soup turned out saltier than expected",
    "their new album sounds better on vinyl",
]


def _write_image(image_dir: Path, name: str, rng: np.random.Generator) -> str:
    # Each record gets unique bytes so mock image embeddings are distinct.
    path = image_dir / f"{name}.img"
    path.write_bytes(rng.bytes(64))
    return str(path)


def generate_corpus(
    image_dir: str | Path,
    *,
    trajectory_lengths: list[int] | None = None,
    n_static: int = 24,
    conflict_every: int = 7,
    noise_every: int = 5,
    seed: int = 0,
) -> list[DatasetRecord]:
    """Build a labeled corpus of trajectory frames plus static scenarios.

    Trajectories are mostly normal frames with periodic conflict frames;
    interaction conflicts carry a request utterance, and periodic normal
    frames carry noise chatter. Statics cycle through every label. The same
    seed always reproduces the same records and image bytes.
    """
    image_dir = Path(image_dir)
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    if trajectory_lengths is None:
        trajectory_lengths = [30, 30, 24, 24]

    records: list[DatasetRecord] = []
    for t_index, length in enumerate(trajectory_lengths):
        task, steps = TASKS[t_index % len(TASKS)]
        trajectory_id = f"traj_{t_index:03d}"
        for frame in range(length):
            step = steps[min(frame * len(steps) // max(length, 1), len(steps) - 1)]
            record_id = f"{trajectory_id}_f{frame:04d}"
            image = _write_image(image_dir, record_id, rng)
            label = ConflictLabel.NORMAL
            speech = None
            if frame > 0 and frame % conflict_every == 0:
                label = ANOMALY_LABELS[(t_index + frame) % len(ANOMALY_LABELS)]
                if label is ConflictLabel.HUMAN_INTERACTION:
                    speech = INTERACTION_REQUESTS[int(rng.integers(len(INTERACTION_REQUESTS)))]
            elif frame % noise_every == 0 and frame % conflict_every != 0:
                speech = NOISE_SPEECH[int(rng.integers(len(NOISE_SPEECH)))]
            records.append(
                DatasetRecord(
                    id=record_id,
                    image=image,
                    task=task,
                    step=step,
                    label=label,
                    speech=speech,
                    trajectory_id=trajectory_id,
                    frame_index=frame,
                )
            )

    labels_cycle = list(ConflictLabel)
    for s_index in range(n_static):
        task, steps = TASKS[s_index % len(TASKS)]
        step = steps[s_index % len(steps)]
        record_id = f"static_{s_index:04d}"
        image = _write_image(image_dir, record_id, rng)
        label = labels_cycle[s_index % len(labels_cycle)]
        speech = None
        if label is ConflictLabel.HUMAN_INTERACTION:
            speech = INTERACTION_REQUESTS[int(rng.integers(len(INTERACTION_REQUESTS)))]
        elif label is ConflictLabel.NORMAL and s_index % 2 == 0:
            speech = NOISE_SPEECH[int(rng.integers(len(NOISE_SPEECH)))]
        records.append(
            DatasetRecord(
                id=record_id, image=image, task=task, step=step, label=label, speech=speech
            )
        )
    return records


def generate_annotation_scenarios(
    image_dir: str | Path,
    *,
    per_type: int = 5,
    seed: int = 100,
) -> list[Scenario]:
    """Build the annotation scenario set: per_type scenarios for each conflict type."""
    image_dir = Path(image_dir)
    image_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    scenarios = []
    for l_index, label in enumerate(ANOMALY_LABELS):
        for k in range(per_type):
            task, steps = TASKS[(k + 3 * l_index) % len(TASKS)]
            scenario_id = f"scenario_{label.value}_{k:02d}"
            image = _write_image(image_dir, scenario_id, rng)
            speech = None
            if label is ConflictLabel.HUMAN_INTERACTION:
                speech = INTERACTION_REQUESTS[k % len(INTERACTION_REQUESTS)]
            scenarios.append(
                Scenario(
                    scenario_id=scenario_id,
                    image=image,
                    task=task,
                    step=steps[k % len(steps)],
                    conflict_type=label,
                    speech=speech,
                )
            )
    return scenarios
