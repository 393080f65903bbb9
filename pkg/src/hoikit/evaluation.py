"""HICO-DET style mAP over language-emitted predictions.

Instances are expanded into (human box, object box, category, score)
triplets, greedily matched per image at IoU 0.5 on both boxes, and scored
with all-point interpolated average precision per category. Results aggregate
into the six standard cells: {Default, Known Object} x {Full, Rare,
Non-Rare}, reported as percentages.

Language outputs carry no confidence, so scores are synthesized from output
order (earlier instances rank higher). That rule is a convention, not ground
truth; a constant-score mode exists to check how much it matters.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .domain import BBox, GtImage, NOT_FOUND, Vocabulary, iou, pair_similarity
from .parsing import ParsedCompletion

IOU_THRESHOLD = 0.5
SCORE_STEP = 1e-4

SCORE_RANK = "rank"
SCORE_CONSTANT = "constant"

CELL_NAMES = (
    "default_full",
    "default_rare",
    "default_non_rare",
    "known_object_full",
    "known_object_rare",
    "known_object_non_rare",
)


class UnknownImageError(ValueError):
    """Predictions referenced image ids absent from the evaluation dataset."""

    def __init__(self, image_ids: Sequence[str]):
        self.image_ids = tuple(sorted(set(image_ids)))
        shown = ", ".join(self.image_ids[:10])
        suffix = "" if len(self.image_ids) <= 10 else f" (+{len(self.image_ids) - 10} more)"
        super().__init__(f"predictions reference unknown image ids: {shown}{suffix}")


@dataclass(frozen=True)
class PredictionTriplet:
    image_id: str
    human: BBox
    object: BBox
    hoi_category: int
    score: float

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "human": self.human.as_list(),
            "object": self.object.as_list(),
            "hoi_category": self.hoi_category,
            "score": self.score,
        }


@dataclass(frozen=True)
class EvalTable:
    per_category_ap: tuple[float, ...]
    known_object_ap: tuple[float, ...]
    gt_counts: tuple[int, ...]
    cells: Mapping[str, float]
    rare_set: frozenset[int]

    def to_dict(self) -> dict:
        return {
            "cells": dict(self.cells),
            "rare_set": sorted(self.rare_set),
            "per_category_ap": list(self.per_category_ap),
            "known_object_ap": list(self.known_object_ap),
            "gt_counts": list(self.gt_counts),
        }

    def render(self) -> str:
        """Aligned plain-text table of the six cells."""
        headers = ("Full", "Rare", "Non-Rare")
        rows = [
            ("Default", [self.cells["default_full"], self.cells["default_rare"], self.cells["default_non_rare"]]),
            (
                "Known Object",
                [
                    self.cells["known_object_full"],
                    self.cells["known_object_rare"],
                    self.cells["known_object_non_rare"],
                ],
            ),
        ]
        label_width = max(len(r[0]) for r in rows)
        lines = [" " * label_width + "  " + "  ".join(f"{h:>8}" for h in headers)]
        for label, values in rows:
            lines.append(f"{label:<{label_width}}  " + "  ".join(f"{v:8.2f}" for v in values))
        return "\n".join(lines)


def expand_triplets(
    parsed: ParsedCompletion,
    image_id: str,
    vocab: Vocabulary,
    score_mode: str = SCORE_RANK,
) -> list[PredictionTriplet]:
    """Turn parsed instances into per-category prediction triplets.

    An instance needs both boxes and a resolvable object label to emit
    anything; each in-vocabulary verb forming a valid (verb, object)
    combination yields one triplet. Repeated categories within one instance
    are collapsed. Scores fall by 1e-4 per output position.
    """
    if score_mode not in (SCORE_RANK, SCORE_CONSTANT):
        raise ValueError(f"unknown score_mode {score_mode!r}")
    triplets: list[PredictionTriplet] = []
    for rank, inst in enumerate(parsed.instances):
        if not inst.has_both_boxes or inst.object_class is None:
            continue
        oid = vocab.object_id(inst.object_class)
        if oid == NOT_FOUND:
            continue
        score = 1.0 if score_mode == SCORE_CONSTANT else 1.0 - rank * SCORE_STEP
        seen: set[int] = set()
        for verb in inst.verb_classes:
            vid = vocab.verb_id(verb)
            if vid == NOT_FOUND:
                continue
            category = vocab.hoi_category(vid, oid)
            if category == NOT_FOUND or category in seen:
                continue
            seen.add(category)
            triplets.append(PredictionTriplet(image_id, inst.human, inst.object, category, score))
    return triplets


def match_image(
    preds: Sequence[PredictionTriplet],
    gt_boxes: Sequence[tuple[BBox, BBox]],
) -> list[bool]:
    """Greedy TP/FP flags for one image's predictions of one category.

    Predictions must be pre-sorted by descending score. A prediction is a
    true positive when an unmatched ground-truth pair overlaps at IoU >= 0.5
    on both boxes; among several candidates the one with the highest pair
    similarity wins. Each ground-truth pair is matched at most once.
    """
    matched = [False] * len(gt_boxes)
    flags: list[bool] = []
    for pred in preds:
        best = -1
        best_sim = -1.0
        for j, (gh, go) in enumerate(gt_boxes):
            if matched[j]:
                continue
            if iou(pred.human, gh) < IOU_THRESHOLD or iou(pred.object, go) < IOU_THRESHOLD:
                continue
            sim = pair_similarity((pred.human, pred.object), (gh, go))
            if sim > best_sim:
                best_sim = sim
                best = j
        if best >= 0:
            matched[best] = True
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(flags: Sequence[bool], n_gt: int) -> float:
    """All-point interpolated AP for score-ranked TP/FP flags."""
    if n_gt < 1:
        raise ValueError("average_precision requires n_gt >= 1")
    if not flags:
        return 0.0
    recalls = [0.0]
    precisions = [0.0]
    tp = 0
    for k, flag in enumerate(flags, start=1):
        if flag:
            tp += 1
        recalls.append(tp / n_gt)
        precisions.append(tp / k)
    recalls.append(recalls[-1])
    precisions.append(0.0)
    # Precision envelope from the right, then area under it over recall.
    for i in range(len(precisions) - 2, -1, -1):
        precisions[i] = max(precisions[i], precisions[i + 1])
    ap = 0.0
    for i in range(1, len(recalls)):
        ap += (recalls[i] - recalls[i - 1]) * precisions[i]
    return ap


def _gt_categories(pair_verbs: Iterable[int], object_class: int, vocab: Vocabulary) -> list[int]:
    cats = []
    for vid in pair_verbs:
        cat = vocab.hoi_category(vid, object_class)
        if cat != NOT_FOUND:
            cats.append(cat)
    return cats


def evaluate(
    predictions: Sequence[PredictionTriplet],
    images: Sequence[GtImage],
    rare_set: Iterable[int],
    vocab: Vocabulary,
) -> EvalTable:
    """Score predictions against a test split and aggregate the six cells.

    Default mode evaluates each category over every image; Known Object
    restricts a category to images whose ground truth contains that
    category's object class. Categories without ground truth are excluded
    from the means. Cells are percentages.
    """
    n_categories = len(vocab.hoi_triples)
    image_index = {img.image_id: img for img in images}
    if len(image_index) != len(images):
        raise ValueError("duplicate image ids in evaluation dataset")
    unknown = [p.image_id for p in predictions if p.image_id not in image_index]
    if unknown:
        raise UnknownImageError(unknown)

    # Ground truth per (image, category), object classes present per image.
    gt_boxes: dict[tuple[str, int], list[tuple[BBox, BBox]]] = defaultdict(list)
    gt_counts = [0] * n_categories
    image_objects: dict[str, set[int]] = {}
    for img in images:
        present: set[int] = set()
        for pair in img.pairs:
            present.add(pair.object_class)
            for cat in _gt_categories(pair.verb_classes, pair.object_class, vocab):
                gt_boxes[(img.image_id, cat)].append((pair.human, pair.object))
                gt_counts[cat] += 1
        image_objects[img.image_id] = present

    # Per-image greedy matching, then global ranking per category.
    by_image_category: dict[tuple[str, int], list[tuple[int, PredictionTriplet]]] = defaultdict(list)
    for order, pred in enumerate(predictions):
        if not 0 <= pred.hoi_category < n_categories:
            raise ValueError(f"hoi_category {pred.hoi_category} out of range")
        by_image_category[(pred.image_id, pred.hoi_category)].append((order, pred))

    scored: dict[int, list[tuple[float, str, int, bool]]] = defaultdict(list)
    for (image_id, category), entries in by_image_category.items():
        entries.sort(key=lambda e: (-e[1].score, e[0]))
        ordered = [pred for _, pred in entries]
        flags = match_image(ordered, gt_boxes.get((image_id, category), []))
        for (order, pred), flag in zip(entries, flags):
            scored[category].append((pred.score, image_id, order, flag))

    default_ap = [0.0] * n_categories
    known_ap = [0.0] * n_categories
    for category, rows in scored.items():
        if gt_counts[category] < 1:
            continue
        rows.sort(key=lambda r: (-r[0], r[1], r[2]))
        flags = [flag for _, _, _, flag in rows]
        default_ap[category] = average_precision(flags, gt_counts[category])
        object_class = vocab.hoi_triples[category][1]
        known_flags = [
            flag
            for _, image_id, _, flag in rows
            if object_class in image_objects[image_id]
        ]
        known_ap[category] = average_precision(known_flags, gt_counts[category]) if known_flags else 0.0

    rare = frozenset(int(c) for c in rare_set)
    valid = [c for c in range(n_categories) if gt_counts[c] >= 1]
    rare_valid = [c for c in valid if c in rare]
    non_rare_valid = [c for c in valid if c not in rare]

    def mean_pct(ap: list[float], cats: list[int]) -> float:
        if not cats:
            return 0.0
        return 100.0 * sum(ap[c] for c in cats) / len(cats)

    cells = {
        "default_full": mean_pct(default_ap, valid),
        "default_rare": mean_pct(default_ap, rare_valid),
        "default_non_rare": mean_pct(default_ap, non_rare_valid),
        "known_object_full": mean_pct(known_ap, valid),
        "known_object_rare": mean_pct(known_ap, rare_valid),
        "known_object_non_rare": mean_pct(known_ap, non_rare_valid),
    }
    return EvalTable(
        per_category_ap=tuple(default_ap),
        known_object_ap=tuple(known_ap),
        gt_counts=tuple(gt_counts),
        cells=cells,
        rare_set=rare,
    )
