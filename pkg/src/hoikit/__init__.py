"""Tooling for MLLM-based human-object interaction detection: prompt
construction, completion parsing, reward computation, policy-gradient math,
and HICO-DET style mAP evaluation."""

__version__ = "0.1.0"

from .domain import (
    BBox,
    GtImage,
    GtPair,
    NOT_FOUND,
    Vocabulary,
    box_from_values,
    iou,
    load_vocabulary,
    normalize_name,
    pair_similarity,
)
from .parsing import (
    HoiInstance,
    ParsedCompletion,
    extract_tags,
    parse_answer,
    parse_completion,
)
from .matching import hungarian_match
from .rewards import (
    DEDUP_EITHER_BOX,
    DEDUP_PAIR_BOTH,
    InstanceScore,
    MatchedPair,
    RewardBreakdown,
    RewardWeights,
    dedup_scan,
    format_reward,
    hoi_iou_reward,
    key_penalty,
    object_label_reward,
    score_parsed,
    score_sample,
    verb_label_reward,
)
from .training import (
    TokenLogProbs,
    group_advantages,
    grpo_objective,
    sft_loss,
)
from .evaluation import (
    EvalTable,
    PredictionTriplet,
    UnknownImageError,
    average_precision,
    evaluate,
    expand_triplets,
    match_image,
)
from .datasets import (
    Dataset,
    SftRecord,
    assemble_sft,
    derive_rare_categories,
    gt_to_answer,
    load_annotations,
    save_annotations,
    wrap_completion,
)
from .prompts import PromptConfig, build_prompt
from .simulate import NoiseProfile, simulate_corpus, simulate_policy
from .config import Config, apply_overrides, load_config

__all__ = [
    "BBox",
    "Config",
    "Dataset",
    "DEDUP_EITHER_BOX",
    "DEDUP_PAIR_BOTH",
    "EvalTable",
    "GtImage",
    "GtPair",
    "HoiInstance",
    "InstanceScore",
    "MatchedPair",
    "NOT_FOUND",
    "NoiseProfile",
    "ParsedCompletion",
    "PredictionTriplet",
    "PromptConfig",
    "RewardBreakdown",
    "RewardWeights",
    "SftRecord",
    "TokenLogProbs",
    "UnknownImageError",
    "Vocabulary",
    "apply_overrides",
    "assemble_sft",
    "average_precision",
    "box_from_values",
    "build_prompt",
    "dedup_scan",
    "derive_rare_categories",
    "evaluate",
    "expand_triplets",
    "extract_tags",
    "format_reward",
    "group_advantages",
    "grpo_objective",
    "gt_to_answer",
    "hoi_iou_reward",
    "hungarian_match",
    "iou",
    "key_penalty",
    "load_annotations",
    "load_config",
    "load_vocabulary",
    "match_image",
    "normalize_name",
    "object_label_reward",
    "pair_similarity",
    "parse_answer",
    "parse_completion",
    "save_annotations",
    "score_parsed",
    "score_sample",
    "sft_loss",
    "simulate_corpus",
    "simulate_policy",
    "verb_label_reward",
    "wrap_completion",
]
