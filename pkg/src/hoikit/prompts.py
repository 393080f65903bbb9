"""Prompt template for HOI detection.

The prompt has three parts: the task instruction (role line, the valid
object classes, and the valid verb-object combinations), the reasoning
guidance steps, and a format example showing one answer entry inside the
think/answer scaffolding. Output is deterministic for a fixed configuration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .domain import Vocabulary
from .parsing import KEY_HUMAN, KEY_OBJECT, KEY_OBJECT_CLASS, KEY_VERB_CLASS

OBJECT_CLASSES_OPEN = "<VALID OBJECT CLASSES>"
OBJECT_CLASSES_CLOSE = "</VALID OBJECT CLASSES>"
INTERACTIONS_OPEN = "<VALID INTERACTIONS>"
INTERACTIONS_CLOSE = "</VALID INTERACTIONS>"

DEFAULT_ROLE_LINE = "You are an HOI detection model."

DEFAULT_TASK_LINES = (
    "Detect every human-object interaction in the given image.",
    "Report each interacting human-object pair with the bounding boxes of the "
    "human and the object, the object class, and all interaction verbs.",
)

DEFAULT_REASONING_STEPS = (
    "Identify every human in the image.",
    "Analyze the actions each human is performing.",
    "Determine the object each action involves and name the interaction.",
)


@dataclass(frozen=True)
class PromptConfig:
    role_line: str = DEFAULT_ROLE_LINE
    task_lines: tuple[str, ...] = DEFAULT_TASK_LINES
    reasoning_steps: tuple[str, ...] = DEFAULT_REASONING_STEPS
    example_human: tuple[int, int, int, int] = (12, 30, 140, 390)
    example_object: tuple[int, int, int, int] = (100, 210, 330, 400)
    example_object_class: str = "bicycle"
    example_verbs: tuple[str, ...] = ("ride",)


DEFAULT_PROMPT_CONFIG = PromptConfig()


def _format_example(config: PromptConfig) -> str:
    entry = {
        KEY_HUMAN: list(config.example_human),
        KEY_OBJECT: list(config.example_object),
        KEY_OBJECT_CLASS: config.example_object_class,
        KEY_VERB_CLASS: list(config.example_verbs),
    }
    return json.dumps([entry])


def interaction_lines(vocab: Vocabulary) -> list[str]:
    """One "verb object" line per valid combination, grouped by object."""
    by_object: dict[int, list[int]] = {}
    for v, o in vocab.hoi_triples:
        by_object.setdefault(o, []).append(v)
    lines = []
    for o in sorted(by_object):
        for v in sorted(by_object[o]):
            lines.append(f"{vocab.verbs[v]} {vocab.objects[o]}")
    return lines


def build_prompt(vocab: Vocabulary, config: PromptConfig = DEFAULT_PROMPT_CONFIG) -> str:
    """Render the full detection prompt for one image."""
    numbered = [f"{k}. {step}" for k, step in enumerate(config.reasoning_steps, start=1)]
    sections = [
        config.role_line,
        *config.task_lines,
        "",
        OBJECT_CLASSES_OPEN,
        ", ".join(vocab.objects),
        OBJECT_CLASSES_CLOSE,
        "",
        INTERACTIONS_OPEN,
        *interaction_lines(vocab),
        INTERACTIONS_CLOSE,
        "",
        "Thinking Process:",
        *numbered,
        "",
        "First reason step by step inside <think> and </think>, then give the "
        "final result inside <answer> and </answer> as a JSON array with one "
        "entry per interacting pair, for example:",
        f"<think>{'; '.join(config.reasoning_steps)}</think>",
        f"<answer>{_format_example(config)}</answer>",
    ]
    return "\n".join(sections)
