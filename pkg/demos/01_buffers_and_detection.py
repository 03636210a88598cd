"""Walkthrough: build the two retrieval buffers and watch the three gates fire.

Detection answers each tick one of three ways:
  1. speech retrieval     - someone is addressing the robot (score beats tau_s)
  2. task retrieval       - the situation matches stored task attributes (>= tau_t)
  3. model inference      - low-confidence ticks escalate to the model backend

Run:  python demos/01_buffers_and_detection.py
"""

import json
import tempfile
from pathlib import Path

from conflictkit import (
    ConflictDetector,
    ConflictLabel,
    DetectionConfig,
    DetectionInput,
    MockEmbeddingProvider,
    MockModelBackend,
    build_multimodal_buffer,
    build_speech_buffer,
)
from conflictkit.synthetic import generate_corpus

workdir = Path(tempfile.mkdtemp(prefix="conflictkit_demo_"))
print(f"working in {workdir}\n")

# A synthetic corpus stands in for collected robot data: trajectory frames at
# a fixed cadence plus static scenarios, labeled with one of the four conflict
# types or normal. Interaction conflicts carry a request utterance; some
# normal frames carry task-irrelevant chatter that must be ignored.
corpus = generate_corpus(workdir / "images", trajectory_lengths=[30, 24], n_static=16, seed=1)
print(f"corpus: {len(corpus)} records "
      f"({sum(1 for r in corpus if r.label is ConflictLabel.NORMAL)} normal)")

provider = MockEmbeddingProvider(dimension=128, seed=7)

# B_s holds interaction-request utterances; B_m holds (task-attribute prompt,
# observation) embedding pairs for every record.
speech_buffer = build_speech_buffer(corpus, provider)
multimodal_buffer = build_multimodal_buffer(corpus, provider, provider)
print(f"speech buffer: {len(speech_buffer)} utterances")
print(f"multi-modal buffer: {len(multimodal_buffer)} entries\n")

backend = MockModelBackend(label="goal_absence")  # pretend fine-tuned model
detector = ConflictDetector(
    DetectionConfig(w=0.87, tau_s=0.88, tau_t=0.94),
    text_provider=provider,
    image_provider=provider,
    speech_buffer=speech_buffer,
    multimodal_buffer=multimodal_buffer,
    backend=backend,
)


def show(title, result):
    print(f"--- {title}")
    print(json.dumps(result.to_dict(), indent=2), "\n")


# Gate 1: a buffered interaction request comes in as live speech.
interaction = next(r for r in corpus if r.label is ConflictLabel.HUMAN_INTERACTION)
show("speech gate fires (short-circuit)", detector.detect(interaction.to_detection_input()))

# Gate 2: a known situation with no speech; the fused task-attribute score
# matches its stored twin at 1.0 and answers without the model.
known = next(r for r in corpus if r.label is ConflictLabel.OBJECT_STATE and not r.speech)
show("task-attribute gate answers", detector.detect(known.to_detection_input()))

# Gate 3: a situation the buffers have never seen; score falls below tau_t and
# the model backend is asked instead.
novel = DetectionInput(
    image=b"totally new observation bytes",
    task="repot the orchid on the balcony",
    step="loosen the root ball",
)
show("low confidence escalates to the model", detector.detect(novel))
print(f"model backend was called {backend.calls} time(s)")

# Continuous operation: detect_stream processes trajectory frames in order.
trajectory = sorted(
    (r for r in corpus if r.trajectory_id == "traj_000"), key=lambda r: r.frame_index
)
results = list(detector.detect_stream(r.to_detection_input() for r in trajectory))
flagged = [(r.frame_index, s.label.value) for r, s in zip(trajectory, results)
           if s.label.is_anomaly]
print(f"\nstreamed {len(results)} frames; conflict frames: {flagged}")
