"""Walkthrough: store preference cases, predict a preferred option, rate it.

Each annotated case pairs a conflict scenario with the user's chosen option
and an emergency level (1 = relaxed, 3 = urgent). Prediction sends all stored
same-type cases to a summarizer backend, which writes a preference summary and
picks one catalog option; the pick is validated against the catalog before it
is stored. The offline mock summarizer votes by majority with an
emergency-weighted tie-break, which keeps this demo deterministic.

Run:  python demos/03_preference_prediction.py
"""

import tempfile
from pathlib import Path

from conflictkit import (
    ConflictLabel,
    MockSummarizer,
    PreferenceStore,
    Scenario,
    UserCase,
    catalog_options,
    predict_solution,
)
from conflictkit.types import option_by_text

workdir = Path(tempfile.mkdtemp(prefix="conflictkit_demo_"))
store = PreferenceStore(workdir / "journal")

OCCUPANCY = ConflictLabel.HUMAN_OCCUPANCY
options = catalog_options(OCCUPANCY)
print("catalog for human_occupancy:")
for option in options:
    print(f"  {option.ordinal}. {option.text}")

# The user annotated five occupancy scenarios; they lean toward waiting, but
# marked the one urgent case where they chose to communicate directly.
votes = [
    ("Stop execution and wait for the person", 1),
    ("Stop execution and wait for the person", 1),
    ("Directly communicate with the person", 3),
    ("Stop execution and wait for the person", 2),
    ("Inform the user and wait for instructions", 1),
]
for i, (text, emergency) in enumerate(votes):
    case = UserCase(
        case_id=f"case_{i:02d}",
        user_id="resident",
        scenario=Scenario(
            scenario_id=f"annot_{i:02d}",
            image=f"images/annot_{i:02d}.img",
            task="set the dining table for dinner",
            step="place plates on the table",
            conflict_type=OCCUPANCY,
        ),
        chosen_option=option_by_text(OCCUPANCY, text),
        emergency=emergency,
        created_at=f"2026-08-01T10:{i:02d}:00+00:00",
    )
    store.record_case(case)
print(f"\nstored {len(store.cases_for_type('resident', OCCUPANCY))} occupancy cases")

# A new occupancy conflict arrives; predict the preferred resolution.
scenario = Scenario(
    scenario_id="live_001",
    image="images/live_001.img",
    task="vacuum the living room floor",
    step="vacuum under the coffee table",
    conflict_type=OCCUPANCY,
)
prediction = predict_solution(
    scenario,
    store.cases_for_type("resident", OCCUPANCY),
    MockSummarizer(),
    store=store,
    user_id="resident",
)
print(f"\npreference summary: {prediction.preference_summary}")
print(f"predicted option:  {prediction.predicted_option.text}")
print(f"used cases:        {list(prediction.used_case_ids)}")

# The user rates the prediction 1-5; re-rating overwrites with an audit trail.
updated = store.record_rating(prediction.prediction_id, 5)
print(f"\nrating stored: {updated.rating} (at {updated.rated_at})")

# Restarting replays the journals into identical state.
reborn = PreferenceStore(workdir / "journal")
assert reborn.get_prediction(prediction.prediction_id) == updated
print("journal replay reproduces the prediction exactly")
