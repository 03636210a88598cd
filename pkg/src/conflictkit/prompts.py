"""Prompt template assets for the model detection backend and the preference summarizer.

Templates are plain strings with named placeholders; nothing here talks to a
model. Rendering keeps the same field layout the retrieval stage uses, so a
fine-tuned backend sees inputs in a familiar shape.
"""

from __future__ import annotations

from .types import ConflictLabel, SolutionOption

LABEL_TOKENS = tuple(label.value for label in ConflictLabel)

DETECTION_SYSTEM_INSTRUCTION = """\
You monitor a household robot while it executes a user task. Given the current
camera observation, the final user task, the current step, and any transcribed
background speech, decide whether a human-induced conflict is blocking the
robot right now.

Answer with exactly one of these labels and nothing else:
- goal_absence: the object or target the current step needs is missing from the scene.
- human_interaction: another person is addressing or trying to command the robot.
- human_occupancy: a person's activity occupies the space or object the step needs.
- object_state: an object's state blocks the step (door closed, container full, and similar).
- normal: nothing blocks the robot; task-irrelevant conversation is still normal.

Only report a conflict that affects the robot here and now. Background speech
that is not directed at the robot must be ignored."""

DETECTION_INPUT_TEMPLATE = "Task: {task}\nStep: {step}\nSpeech: {speech}"

# Rendering when no speech was transcribed.
NO_SPEECH_TEXT = "none"


def render_detection_prompt(task: str, step: str, speech: str | None) -> str:
    """Render the per-tick input block sent to the detection backend."""
    return DETECTION_INPUT_TEMPLATE.format(task=task, step=step, speech=speech or NO_SPEECH_TEXT)


_PREFERENCE_TYPE_CONTEXT: dict[ConflictLabel, str] = {
    ConflictLabel.GOAL_ABSENCE: (
        "The robot found that the target it must operate on is missing from the scene."
    ),
    ConflictLabel.HUMAN_INTERACTION: (
        "Another person is addressing the robot or trying to command it while it works."
    ),
    ConflictLabel.HUMAN_OCCUPANCY: (
        "A person's activity is occupying the space or object the robot's step needs."
    ),
    ConflictLabel.OBJECT_STATE: (
        "An object's state is blocking the current step, for example a closed door or a full container."
    ),
}

PREFERENCE_SYSTEM_TEMPLATE = """\
You help a household robot resolve a conflict the way its user would prefer.

Conflict type: {conflict_name}. {type_context}

The available options for this conflict type are:
{options}

Below are this user's previous choices for conflicts of the same type. Each
case lists the situation, the option the user picked, and an emergency level
from 1 to 3: a higher level means the situation was more urgent to the user,
and the robot should prioritize quickly finishing the user's current task; a
lower level means the user accepts compromises in time or task performance to
resolve the conflict in an easier or more harmonious way.

{cases}

Current situation:
{scenario}

First summarize this user's preferences for this conflict type, then choose
the single option from the list above that best matches those preferences.
Reply in exactly this format:
Summary: <one-paragraph preference summary>
Option: <the chosen option text, verbatim>"""

NO_CASES_TEXT = "(no stored cases for this conflict type)"


def render_case_block(index: int, task: str, step: str, speech: str | None,
                      chosen_option: str, emergency: int) -> str:
    lines = [f"Case {index}:", f"  Task: {task}", f"  Step: {step}"]
    if speech:
        lines.append(f"  Speech: {speech}")
    lines.append(f"  Chosen option: {chosen_option}")
    lines.append(f"  Emergency level: {emergency}")
    return "\n".join(lines)


def render_preference_prompt(
    conflict_type: ConflictLabel,
    options: list[SolutionOption],
    case_blocks: list[str],
    scenario_block: str,
) -> str:
    """Render the type-specific summarize-and-choose prompt."""
    if conflict_type is ConflictLabel.NORMAL:
        raise ValueError("no preference prompt for Normal")
    option_lines = "\n".join(f"{o.ordinal}. {o.text}" for o in options)
    cases_text = "\n\n".join(case_blocks) if case_blocks else NO_CASES_TEXT
    return PREFERENCE_SYSTEM_TEMPLATE.format(
        conflict_name=conflict_type.value,
        type_context=_PREFERENCE_TYPE_CONTEXT[conflict_type],
        options=option_lines,
        cases=cases_text,
        scenario=scenario_block,
    )
