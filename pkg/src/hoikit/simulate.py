"""Synthetic noisy policies for validating reward shaping.

Starting from the canonical ground-truth serialization, seeded corruptions
are applied at configurable rates: box jitter, label swaps, verb drops,
instance drops and duplications, and format breakage. A zero-noise profile
reproduces the canonical completion byte for byte, and rewards should fall
monotonically as noise rises; tests rely on both properties.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, replace
from typing import Optional

from .datasets import DEFAULT_THINK_TEXT, _round_half_up, wrap_completion
from .domain import GtImage, Vocabulary

_PROBABILITY_FIELDS = (
    "label_swap_prob",
    "verb_drop_prob",
    "instance_drop_prob",
    "instance_dup_prob",
    "format_break_prob",
)


@dataclass(frozen=True)
class NoiseProfile:
    box_jitter_sigma: float = 0.0
    label_swap_prob: float = 0.0
    verb_drop_prob: float = 0.0
    instance_drop_prob: float = 0.0
    instance_dup_prob: float = 0.0
    format_break_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.box_jitter_sigma < 0:
            raise ValueError("box_jitter_sigma must be non-negative")
        for name in _PROBABILITY_FIELDS:
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p!r}")

    @classmethod
    def uniform(cls, level: float, seed: int = 0) -> "NoiseProfile":
        """Profile with every corruption rate set to the same level."""
        return cls(
            box_jitter_sigma=level,
            label_swap_prob=level,
            verb_drop_prob=level,
            instance_drop_prob=level,
            instance_dup_prob=level,
            format_break_prob=level,
            seed=seed,
        )

    def with_seed(self, seed: int) -> "NoiseProfile":
        return replace(self, seed=seed)


def _jitter_box(rng: random.Random, box: list[float], sigma: float) -> list[int]:
    width = max(box[2] - box[0], 1.0)
    height = max(box[3] - box[1], 1.0)
    scale = (width, height, width, height)
    return [_round_half_up(v + rng.gauss(0.0, sigma * s)) for v, s in zip(box, scale)]


def simulate_policy(g: GtImage, noise: NoiseProfile, vocab: Vocabulary) -> str:
    """Produce one corrupted completion for an image.

    Deterministic for a fixed (noise profile, image id); corruption draws are
    only made when the corresponding rate is non-zero, so an all-zero profile
    emits the canonical serialization exactly.
    """
    rng = random.Random(f"{noise.seed}:{g.image_id}")

    entries = []
    for pair in g.pairs:
        if noise.instance_drop_prob and rng.random() < noise.instance_drop_prob:
            continue
        copies = 1
        if noise.instance_dup_prob and rng.random() < noise.instance_dup_prob:
            copies = 2
        for _ in range(copies):
            human = [float(v) for v in pair.human.as_list()]
            obj = [float(v) for v in pair.object.as_list()]
            if noise.box_jitter_sigma:
                human_out = _jitter_box(rng, human, noise.box_jitter_sigma)
                object_out = _jitter_box(rng, obj, noise.box_jitter_sigma)
            else:
                human_out = [_round_half_up(v) for v in human]
                object_out = [_round_half_up(v) for v in obj]

            object_class = vocab.objects[pair.object_class]
            if noise.label_swap_prob and rng.random() < noise.label_swap_prob:
                object_class = vocab.objects[rng.randrange(len(vocab.objects))]

            verbs = []
            for v in sorted(pair.verb_classes):
                if noise.verb_drop_prob and rng.random() < noise.verb_drop_prob:
                    continue
                verbs.append(vocab.verbs[v])

            entries.append(
                {
                    "human": human_out,
                    "object": object_out,
                    "object class": object_class,
                    "verb class": verbs,
                }
            )

    text = wrap_completion(DEFAULT_THINK_TEXT, json.dumps(entries))
    if noise.format_break_prob and rng.random() < noise.format_break_prob:
        # Breakage always removes the answer tag, the one corruption the
        # reward cannot partially forgive.
        text = text.replace("<answer>", "<answr>").replace("</answer>", "</answr>")
        if rng.random() < 0.5:
            text = text[: max(len(text) // 2, 1)]
    return text


def simulate_corpus(
    images,
    noise: NoiseProfile,
    vocab: Vocabulary,
    samples_per_image: int = 1,
    base_seed: Optional[int] = None,
) -> list[tuple[str, str]]:
    """(image_id, completion) rows: samples_per_image draws per image."""
    seed = noise.seed if base_seed is None else base_seed
    rows = []
    for k in range(samples_per_image):
        profile = noise.with_seed(seed * 100003 + k)
        for img in images:
            rows.append((img.image_id, simulate_policy(img, profile, vocab)))
    return rows
