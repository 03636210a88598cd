"""Walkthrough: the HTTP service end to end, in process.

Boots the FastAPI app with a planted detector and the mock summarizer, then
drives it exactly like the annotation UI would: check pending scenarios,
submit cases, request a prediction, rate it, and prove that a restart replays
journals into identical listings.

Run:  python demos/04_service_roundtrip.py
"""

import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from conflictkit import (
    ConflictDetector,
    DetectionConfig,
    MockEmbeddingProvider,
    MockModelBackend,
    MockSummarizer,
    build_multimodal_buffer,
    build_speech_buffer,
)
from conflictkit.service import ServiceConfig, create_app
from conflictkit.synthetic import generate_annotation_scenarios, generate_corpus

workdir = Path(tempfile.mkdtemp(prefix="conflictkit_demo_"))
provider = MockEmbeddingProvider(dimension=128, seed=7)
corpus = generate_corpus(workdir / "images", trajectory_lengths=[20], n_static=12, seed=3)
scenarios = {s.scenario_id: s for s in generate_annotation_scenarios(workdir / "scen")}

detector = ConflictDetector(
    DetectionConfig.default(),
    text_provider=provider,
    image_provider=provider,
    speech_buffer=build_speech_buffer(corpus, provider),
    multimodal_buffer=build_multimodal_buffer(corpus, provider, provider),
    backend=MockModelBackend(label="normal"),
)
config = ServiceConfig(data_dir=workdir / "data")
app = create_app(config, detector=detector, summarizer=MockSummarizer(),
                 scenarios=scenarios)
client = TestClient(app)

# Detection over HTTP.
record = corpus[5]
result = client.post("/v1/detect", json={
    "image": record.image, "task": record.task, "step": record.step,
}).json()
print(f"POST /v1/detect -> {result['label']} via {result['method']} "
      f"(task_score={result['task_score']:.3f})")

# Annotation flow: fresh users see 20 pending scenarios, five per type.
pending = client.get("/v1/annotation/scenarios", params={"user": "resident"}).json()
print(f"pending scenarios: {len(pending['pending'])} of {pending['total']}")

for view in pending["pending"][:5]:
    response = client.post("/v1/annotation/cases", json={
        "user_id": "resident",
        "scenario_id": view["scenario_id"],
        "option_text": view["options"][0],  # options come from the API catalog
        "emergency": 2,
    })
    response.raise_for_status()
after = client.get("/v1/annotation/scenarios", params={"user": "resident"}).json()
print(f"after 5 submissions: {len(after['pending'])} pending, "
      f"{after['completed']} completed")

# Prediction + rating for one of the annotated types.
scenario_id = pending["pending"][0]["scenario_id"]
prediction = client.post("/v1/predict", json={
    "user_id": "resident", "scenario_id": scenario_id,
}).json()
print(f"prediction: {prediction['predicted_option']!r}")
print(f"summary:    {prediction['preference_summary'][:88]}...")
rated = client.post(f"/v1/predictions/{prediction['prediction_id']}/rating",
                    json={"rating": 5}).json()
print(f"rating stored: {rated['rating']}")

# Crash recovery: a fresh app over the same data directory replays journals.
before = client.get("/v1/annotation/cases", params={"user": "resident"}).content
reborn = TestClient(create_app(config, detector=detector, summarizer=MockSummarizer(),
                               scenarios=scenarios))
after_restart = reborn.get("/v1/annotation/cases", params={"user": "resident"}).content
assert before == after_restart
print("restart replay: case listing is byte-identical")
