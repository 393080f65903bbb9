"""Reward computation for HOI completions scored against ground truth.

Four reward families are computed from one parsed completion and one
annotated image: a format reward (tag presence, box validity, label-key
validity, weighted and key-penalty scaled), two label rewards (object and
verb, drop-on-match against ground-truth multisets), and an IoU reward
(Hungarian-matched mean pair similarity). The completion must contain the
"<answer>" tag; otherwise every component is zero.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .domain import GtImage, NOT_FOUND, Vocabulary, pair_similarity, iou
from .matching import hungarian_match
from .parsing import (
    KEY_OBJECT_CLASS,
    KEY_VERB_CLASS,
    HoiInstance,
    ParsedCompletion,
    parse_completion,
)

EXPECTED_KEY_COUNT = 4

DEDUP_PAIR_BOTH = "pair-both"
DEDUP_EITHER_BOX = "either-box"
DEDUP_MODES = (DEDUP_PAIR_BOTH, DEDUP_EITHER_BOX)


@dataclass(frozen=True)
class RewardWeights:
    """Weights for the format reward terms plus dedup configuration."""

    w_tag: float = 0.2
    w_b: float = 0.2
    w_ko: float = 0.2
    w_kv: float = 0.2
    dedup_iou_threshold: float = 0.5
    dedup_mode: str = DEDUP_PAIR_BOTH

    def __post_init__(self) -> None:
        for name in ("w_tag", "w_b", "w_ko", "w_kv"):
            value = getattr(self, name)
            if not value >= 0.0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")
        if self.dedup_mode not in DEDUP_MODES:
            raise ValueError(f"unknown dedup_mode {self.dedup_mode!r}, expected one of {DEDUP_MODES}")


DEFAULT_WEIGHTS = RewardWeights()


@dataclass(frozen=True)
class InstanceScore:
    alpha: float
    r_b: float
    r_ko: float
    r_kv: float
    dup_flag: bool

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "r_b": self.r_b,
            "r_ko": self.r_ko,
            "r_kv": self.r_kv,
            "dup_flag": self.dup_flag,
        }


@dataclass(frozen=True)
class MatchedPair:
    pred_index: int
    gt_index: int
    similarity: float

    def to_dict(self) -> dict:
        return {
            "pred_index": self.pred_index,
            "gt_index": self.gt_index,
            "similarity": self.similarity,
        }


@dataclass(frozen=True)
class RewardBreakdown:
    r_tag: float = 0.0
    r_format: float = 0.0
    r_lo: float = 0.0
    r_lv: float = 0.0
    r_iou: float = 0.0
    total: float = 0.0
    per_instance: tuple[InstanceScore, ...] = field(default_factory=tuple)
    matching: tuple[MatchedPair, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "r_tag": self.r_tag,
            "r_format": self.r_format,
            "r_lo": self.r_lo,
            "r_lv": self.r_lv,
            "r_iou": self.r_iou,
            "total": self.total,
            "per_instance": [s.to_dict() for s in self.per_instance],
            "matching": [m.to_dict() for m in self.matching],
        }


ZERO_BREAKDOWN = RewardBreakdown()


def key_penalty(key_count: int) -> float:
    """Penalty factor for entries whose key count strays from the expected 4."""
    if key_count < 0:
        raise ValueError(f"key_count must be >= 0, got {key_count}")
    return EXPECTED_KEY_COUNT / (EXPECTED_KEY_COUNT + abs(key_count - EXPECTED_KEY_COUNT))


def dedup_scan(
    instances: Sequence[HoiInstance],
    *,
    iou_threshold: float = 0.5,
    mode: str = DEDUP_PAIR_BOTH,
) -> list[bool]:
    """Flag instances whose box pair duplicates an earlier kept instance.

    An instance missing either box is flagged outright: it cannot establish a
    unique pair. Collision against a kept pair is strict (> threshold) on
    both boxes in pair-both mode, on either box in either-box mode.
    """
    if mode not in DEDUP_MODES:
        raise ValueError(f"unknown dedup mode {mode!r}")
    flags: list[bool] = []
    kept: list[HoiInstance] = []
    for inst in instances:
        if not inst.has_both_boxes:
            flags.append(True)
            continue
        collided = False
        for prior in kept:
            human_hit = iou(inst.human, prior.human) > iou_threshold
            object_hit = iou(inst.object, prior.object) > iou_threshold
            if mode == DEDUP_PAIR_BOTH:
                collided = human_hit and object_hit
            else:
                collided = human_hit or object_hit
            if collided:
                break
        flags.append(collided)
        if not collided:
            kept.append(inst)
    return flags


def _denominator(n_gt: int, n_pred: int) -> float:
    d = max(n_gt, n_pred)
    return float(d) if d > 0 else 1.0


def _verb_ratio(inst: HoiInstance, vocab: Vocabulary) -> float:
    """Distinct in-vocabulary verbs over total predicted verbs."""
    if KEY_VERB_CLASS not in inst.present_keys or not inst.verb_classes:
        return 0.0
    resolved = {vocab.verb_id(v) for v in inst.verb_classes if vocab.verb_id(v) != NOT_FOUND}
    return len(resolved) / len(inst.verb_classes)


def format_reward(
    parsed: ParsedCompletion,
    gt: GtImage,
    vocab: Vocabulary,
    weights: RewardWeights = DEFAULT_WEIGHTS,
    dup_flags: Optional[Sequence[bool]] = None,
) -> tuple[float, float, list[InstanceScore]]:
    """Tag and per-instance format rewards combined into r_format.

    Returns (r_tag, r_format, per_instance). Everything is zero without the
    answer tag. Duplicate-flagged instances score zero on all three instance
    terms but still inflate the denominator.
    """
    if not parsed.has_answer_tag:
        return 0.0, 0.0, []
    if dup_flags is None:
        dup_flags = dedup_scan(
            parsed.instances,
            iou_threshold=weights.dedup_iou_threshold,
            mode=weights.dedup_mode,
        )
    r_tag = 1.0 if parsed.has_think_tag else 0.0
    scores: list[InstanceScore] = []
    summed = 0.0
    for inst, dup in zip(parsed.instances, dup_flags):
        alpha = key_penalty(inst.key_count)
        if dup:
            scores.append(InstanceScore(alpha, 0.0, 0.0, 0.0, True))
            continue
        r_b = 1.0 if inst.has_both_boxes else 0.0
        r_ko = 0.0
        if (
            KEY_OBJECT_CLASS in inst.present_keys
            and inst.object_class is not None
            and vocab.object_id(inst.object_class) != NOT_FOUND
        ):
            r_ko = 1.0
        r_kv = _verb_ratio(inst, vocab)
        summed += alpha * (weights.w_b * r_b + weights.w_ko * r_ko + weights.w_kv * r_kv)
        scores.append(InstanceScore(alpha, r_b, r_ko, r_kv, False))
    denom = _denominator(len(gt.pairs), len(parsed.instances))
    r_format = weights.w_tag * r_tag + summed / denom
    return r_tag, r_format, scores


def object_label_reward(
    parsed: ParsedCompletion,
    gt: GtImage,
    vocab: Vocabulary,
    dup_flags: Optional[Sequence[bool]] = None,
) -> float:
    """Key-penalty-weighted credit for object labels, drop-on-match.

    Instances are visited in output order; a label matching a still-available
    ground-truth object consumes it. Duplicate-flagged instances contribute
    nothing and consume nothing.
    """
    if not parsed.has_answer_tag:
        return 0.0
    if dup_flags is None:
        dup_flags = dedup_scan(parsed.instances)
    remaining = Counter(pair.object_class for pair in gt.pairs)
    summed = 0.0
    for inst, dup in zip(parsed.instances, dup_flags):
        if dup or inst.object_class is None:
            continue
        oid = vocab.object_id(inst.object_class)
        if oid != NOT_FOUND and remaining[oid] > 0:
            remaining[oid] -= 1
            summed += key_penalty(inst.key_count)
    return summed / _denominator(len(gt.pairs), len(parsed.instances))


def verb_label_reward(
    parsed: ParsedCompletion,
    gt: GtImage,
    vocab: Vocabulary,
    dup_flags: Optional[Sequence[bool]] = None,
) -> float:
    """Key-penalty-weighted credit for verb labels, drop-on-match.

    Each predicted verb of an instance is tested against the multiset state
    left by earlier instances; the instance contributes alpha * hits / total
    predicted verbs. Afterwards one occurrence of each distinct matched verb
    is dropped. Duplicate-flagged and verbless instances contribute nothing.
    """
    if not parsed.has_answer_tag:
        return 0.0
    if dup_flags is None:
        dup_flags = dedup_scan(parsed.instances)
    remaining: Counter = Counter()
    for pair in gt.pairs:
        remaining.update(pair.verb_classes)
    summed = 0.0
    for inst, dup in zip(parsed.instances, dup_flags):
        if dup or not inst.verb_classes:
            continue
        hits = 0
        matched: set[int] = set()
        for verb in inst.verb_classes:
            vid = vocab.verb_id(verb)
            if vid != NOT_FOUND and remaining[vid] > 0:
                hits += 1
                matched.add(vid)
        if hits:
            summed += key_penalty(inst.key_count) * hits / len(inst.verb_classes)
            for vid in matched:
                remaining[vid] -= 1
    return summed / _denominator(len(gt.pairs), len(parsed.instances))


def hoi_iou_reward(
    parsed: ParsedCompletion,
    gt: GtImage,
    dup_flags: Optional[Sequence[bool]] = None,
) -> tuple[float, list[MatchedPair]]:
    """Mean matched pair similarity against ground truth.

    Non-duplicate instances with both boxes are Hungarian-matched to ground
    truth pairs on cost 1 - similarity; the summed similarity is normalized
    by the ground-truth pair count.
    """
    if not parsed.has_answer_tag or not gt.pairs:
        return 0.0, []
    if dup_flags is None:
        dup_flags = dedup_scan(parsed.instances)
    candidates = [
        (index, inst)
        for index, (inst, dup) in enumerate(zip(parsed.instances, dup_flags))
        if not dup and inst.has_both_boxes
    ]
    if not candidates:
        return 0.0, []
    similarity = [
        [pair_similarity((inst.human, inst.object), (pair.human, pair.object)) for pair in gt.pairs]
        for _, inst in candidates
    ]
    cost = [[1.0 - s for s in row] for row in similarity]
    matches: list[MatchedPair] = []
    total = 0.0
    for row, col in hungarian_match(cost):
        s = similarity[row][col]
        total += s
        matches.append(MatchedPair(candidates[row][0], col, s))
    return total / len(gt.pairs), matches


def score_sample(
    text: str,
    gt: GtImage,
    vocab: Vocabulary,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> RewardBreakdown:
    """Full reward breakdown for one raw completion."""
    parsed = parse_completion(text)
    return score_parsed(parsed, gt, vocab, weights)


def score_parsed(
    parsed: ParsedCompletion,
    gt: GtImage,
    vocab: Vocabulary,
    weights: RewardWeights = DEFAULT_WEIGHTS,
) -> RewardBreakdown:
    """Reward breakdown for an already-parsed completion."""
    if not parsed.has_answer_tag:
        return ZERO_BREAKDOWN
    dup_flags = dedup_scan(
        parsed.instances,
        iou_threshold=weights.dedup_iou_threshold,
        mode=weights.dedup_mode,
    )
    r_tag, r_format, per_instance = format_reward(parsed, gt, vocab, weights, dup_flags)
    r_lo = object_label_reward(parsed, gt, vocab, dup_flags)
    r_lv = verb_label_reward(parsed, gt, vocab, dup_flags)
    r_iou, matching = hoi_iou_reward(parsed, gt, dup_flags)
    return RewardBreakdown(
        r_tag=r_tag,
        r_format=r_format,
        r_lo=r_lo,
        r_lv=r_lv,
        r_iou=r_iou,
        total=r_format + r_lo + r_lv + r_iou,
        per_instance=tuple(per_instance),
        matching=tuple(matching),
    )
