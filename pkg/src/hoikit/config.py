"""Run configuration: reward weights, training constants, evaluation modes.

Defaults follow the published training setup where it states one (all format
weights 0.2, group size 4). The clip range and KL coefficient have no
published value; their defaults are conventional and should be overridden
deliberately, not trusted.
"""

from __future__ import annotations

import json

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

from .rewards import DEDUP_MODES, RewardWeights
from .training import DEFAULT_EPSILON_CLIP, DEFAULT_GROUP_SIZE, DEFAULT_KL_BETA, RATIO_SEQUENCE, RATIO_TOKEN
from .evaluation import SCORE_CONSTANT, SCORE_RANK
from .traces import EndpointConfig

WEIGHT_FIELDS = ("w_tag", "w_b", "w_ko", "w_kv")


@dataclass(frozen=True)
class Config:
    weights: RewardWeights = field(default_factory=RewardWeights)
    epsilon_clip: float = DEFAULT_EPSILON_CLIP
    beta: float = DEFAULT_KL_BETA
    group_size: int = DEFAULT_GROUP_SIZE
    ratio_mode: str = RATIO_SEQUENCE
    score_mode: str = SCORE_RANK
    sft_normalize: bool = True
    endpoint: Optional[EndpointConfig] = None

    def __post_init__(self) -> None:
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")
        if self.ratio_mode not in (RATIO_SEQUENCE, RATIO_TOKEN):
            raise ValueError(f"unknown ratio_mode {self.ratio_mode!r}")
        if self.score_mode not in (SCORE_RANK, SCORE_CONSTANT):
            raise ValueError(f"unknown score_mode {self.score_mode!r}")

    def echo(self) -> dict:
        """Stable dict of the effective settings, for output file headers."""
        return {
            "weights": {name: getattr(self.weights, name) for name in WEIGHT_FIELDS},
            "dedup_mode": self.weights.dedup_mode,
            "dedup_iou_threshold": self.weights.dedup_iou_threshold,
            "epsilon_clip": self.epsilon_clip,
            "beta": self.beta,
            "group_size": self.group_size,
            "ratio_mode": self.ratio_mode,
            "score_mode": self.score_mode,
            "sft_normalize": self.sft_normalize,
        }


DEFAULT_CONFIG = Config()


def _build(payload: dict) -> Config:
    weight_args = {}
    for name in WEIGHT_FIELDS:
        if name in payload.get("weights", {}):
            weight_args[name] = float(payload["weights"][name])
    if "dedup_mode" in payload:
        weight_args["dedup_mode"] = str(payload["dedup_mode"])
    if "dedup_iou_threshold" in payload:
        weight_args["dedup_iou_threshold"] = float(payload["dedup_iou_threshold"])

    endpoint = None
    if "endpoint" in payload:
        section = payload["endpoint"]
        args = {"url": str(section["url"]), "model": str(section["model"])}
        for key in ("auth_env", "prompt_template"):
            if key in section:
                args[key] = str(section[key])
        for key in ("backoff_base", "timeout", "min_request_interval"):
            if key in section:
                args[key] = float(section[key])
        if "max_attempts" in section:
            args["max_attempts"] = int(section["max_attempts"])
        endpoint = EndpointConfig(**args)

    kwargs = {}
    for name in ("epsilon_clip", "beta"):
        if name in payload:
            kwargs[name] = float(payload[name])
    if "group_size" in payload:
        kwargs["group_size"] = int(payload["group_size"])
    for name in ("ratio_mode", "score_mode"):
        if name in payload:
            kwargs[name] = str(payload[name])
    if "sft_normalize" in payload:
        kwargs["sft_normalize"] = bool(payload["sft_normalize"])
    return Config(weights=RewardWeights(**weight_args), endpoint=endpoint, **kwargs)


def load_config(path: Union[str, Path]) -> Config:
    """Read a TOML or JSON config file (decided by extension)."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            payload = tomllib.load(fh)
    else:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    if not isinstance(payload, dict):
        raise ValueError(f"config root must be a table/object, got {type(payload).__name__}")
    return _build(payload)


def apply_overrides(
    config: Config,
    weight_overrides: Sequence[str] = (),
    dedup_mode: Optional[str] = None,
    score_mode: Optional[str] = None,
) -> Config:
    """Apply CLI-style overrides ("w_tag=0.3") on top of a config."""
    weight_args = {}
    for item in weight_overrides:
        name, _, raw = item.partition("=")
        name = name.strip()
        if name not in WEIGHT_FIELDS:
            raise ValueError(f"unknown weight {name!r}, expected one of {WEIGHT_FIELDS}")
        try:
            weight_args[name] = float(raw)
        except ValueError:
            raise ValueError(f"invalid weight value in {item!r}") from None
    if dedup_mode is not None:
        if dedup_mode not in DEDUP_MODES:
            raise ValueError(f"unknown dedup mode {dedup_mode!r}")
        weight_args["dedup_mode"] = dedup_mode
    if weight_args:
        config = replace(config, weights=replace(config.weights, **weight_args))
    if score_mode is not None:
        config = replace(config, score_mode=score_mode)
    return config
