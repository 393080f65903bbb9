"""Core domain types: boxes, the HICO-DET vocabulary, and ground-truth records.

Everything here is immutable after construction and all functions are pure,
so instances can be shared freely across threads.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Optional, Sequence

BUNDLED_VOCABULARY = "hico_vocabulary.json"

# Canonical HICO-DET sizes; other vocabulary files only trigger a warning.
EXPECTED_OBJECTS = 80
EXPECTED_VERBS = 117
EXPECTED_TRIPLES = 600


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in absolute pixel coordinates, origin top-left.

    Corners are canonicalized on construction (min/max per axis), so
    ``x2 >= x1`` and ``y2 >= y1`` always hold. Model text may emit swapped
    corners; rejecting them would forfeit the training signal.
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        x1, x2 = sorted((float(self.x1), float(self.x2)))
        y1, y2 = sorted((float(self.y1), float(self.y2)))
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "y2", y2)

    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def clamped(self, width: float, height: float) -> "BBox":
        return BBox(
            min(max(self.x1, 0.0), width),
            min(max(self.y1, 0.0), height),
            min(max(self.x2, 0.0), width),
            min(max(self.y2, 0.0), height),
        )

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0 when the union is degenerate."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a.area() + b.area() - inter
    if union <= 0:
        return 0.0
    return inter / union


def pair_similarity(pred: tuple[BBox, BBox], gt: tuple[BBox, BBox]) -> float:
    """Mean of the human-human and object-object IoUs of two HO pairs."""
    return 0.5 * (iou(pred[0], gt[0]) + iou(pred[1], gt[1]))


def normalize_name(name: str) -> str:
    """Lowercase, trim, and collapse space/underscore so 'Dining Table',
    'dining_table' and ' dining  table ' all resolve to the same entry."""
    return "_".join(name.strip().lower().replace("_", " ").split())


NOT_FOUND = -1


class Vocabulary:
    """Object names, verb names, and the valid (verb, object) combinations.

    Lookup is by normalized name; ids are positions in the ordered lists.
    """

    def __init__(
        self,
        objects: Sequence[str],
        verbs: Sequence[str],
        hoi_triples: Sequence[tuple[int, int]],
        strict: bool = False,
    ):
        self.objects = tuple(objects)
        self.verbs = tuple(verbs)
        self.hoi_triples = tuple((int(v), int(o)) for v, o in hoi_triples)

        counts_ok = (
            len(self.objects) == EXPECTED_OBJECTS
            and len(self.verbs) == EXPECTED_VERBS
            and len(self.hoi_triples) == EXPECTED_TRIPLES
        )
        if not counts_ok:
            msg = (
                f"non-canonical vocabulary sizes: {len(self.objects)} objects, "
                f"{len(self.verbs)} verbs, {len(self.hoi_triples)} hoi triples"
            )
            if strict:
                raise ValueError(msg)
            warnings.warn(msg, stacklevel=2)

        if len(set(self.hoi_triples)) != len(self.hoi_triples):
            raise ValueError("duplicate (verb, object) pair in hoi_triples")
        for v, o in self.hoi_triples:
            if not (0 <= v < len(self.verbs) and 0 <= o < len(self.objects)):
                raise ValueError(f"hoi triple ({v}, {o}) out of range")

        self._object_index = {normalize_name(n): i for i, n in enumerate(self.objects)}
        self._verb_index = {normalize_name(n): i for i, n in enumerate(self.verbs)}
        self._triple_index = {t: i for i, t in enumerate(self.hoi_triples)}
        self._triple_set = frozenset(self.hoi_triples)

    def object_id(self, name: str) -> int:
        return self._object_index.get(normalize_name(name), NOT_FOUND)

    def verb_id(self, name: str) -> int:
        return self._verb_index.get(normalize_name(name), NOT_FOUND)

    def is_valid_combination(self, verb_id: int, object_id: int) -> bool:
        return (verb_id, object_id) in self._triple_set

    def hoi_category(self, verb_id: int, object_id: int) -> int:
        """Index of (verb, object) in hoi_triples, or NOT_FOUND."""
        return self._triple_index.get((verb_id, object_id), NOT_FOUND)

    def __repr__(self) -> str:
        return (
            f"Vocabulary({len(self.objects)} objects, {len(self.verbs)} verbs, "
            f"{len(self.hoi_triples)} hoi triples)"
        )


def resolve_label(name: str, kind: str, vocab: Vocabulary) -> int:
    """Resolve a free-form label to its vocabulary id; NOT_FOUND when absent."""
    if kind == "object":
        return vocab.object_id(name)
    if kind == "verb":
        return vocab.verb_id(name)
    raise ValueError(f"unknown label kind: {kind!r}")


def load_vocabulary(path: Optional[str] = None) -> Vocabulary:
    """Load a vocabulary JSON file; the bundled HICO-DET lists by default."""
    if path is None:
        payload = json.loads(
            resources.files("hoikit.data").joinpath(BUNDLED_VOCABULARY).read_text()
        )
    else:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    return Vocabulary(
        objects=payload["objects"],
        verbs=payload["verbs"],
        hoi_triples=[tuple(t) for t in payload["hoi_triples"]],
    )


@dataclass(frozen=True)
class GtPair:
    """One annotated human-object pair with its object and verb categories."""

    human: BBox
    object: BBox
    object_class: int
    verb_classes: frozenset[int]

    def __post_init__(self):
        if not self.verb_classes:
            raise ValueError("GtPair requires at least one verb class")
        object.__setattr__(self, "verb_classes", frozenset(self.verb_classes))

    def validate(self, vocab: Vocabulary) -> None:
        for v in self.verb_classes:
            if not vocab.is_valid_combination(v, self.object_class):
                raise ValueError(
                    f"(verb={v}, object={self.object_class}) is not a valid "
                    "HOI combination"
                )


@dataclass(frozen=True)
class GtImage:
    """Ground-truth annotation for one image."""

    image_id: str
    width: float
    height: float
    pairs: tuple[GtPair, ...] = field(default_factory=tuple)

    def __post_init__(self):
        clamped = tuple(
            GtPair(
                human=p.human.clamped(self.width, self.height),
                object=p.object.clamped(self.width, self.height),
                object_class=p.object_class,
                verb_classes=p.verb_classes,
            )
            for p in self.pairs
        )
        object.__setattr__(self, "pairs", clamped)


def box_from_values(values: Iterable[float]) -> BBox:
    vals = [float(v) for v in values]
    if len(vals) != 4:
        raise ValueError(f"expected 4 coordinates, got {len(vals)}")
    return BBox(*vals)
