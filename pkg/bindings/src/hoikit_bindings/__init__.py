"""In-process bindings for driving hoikit from an RL fine-tuning loop.

A trainer that shells out to the CLI once per rollout sample pays process
startup, dataset reload, and JSON round-trips on its hot path. These
bindings load everything once into a session and score whole batches with
plain function calls, producing numbers identical to the CLI.

The interface is deliberately batch-oriented: prefer one `score_batch` call
over many single-sample calls, since crossing the boundary dominates cost at
rollout scale. Nothing here calls back into host code during scoring, and a
session may be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from hoikit import (
    Config,
    Dataset,
    EvalTable,
    PredictionTriplet,
    RewardBreakdown,
    UnknownImageError,
    Vocabulary,
    derive_rare_categories,
    evaluate,
    expand_triplets,
    load_annotations,
    load_config,
    parse_completion,
    score_sample,
)
from hoikit import group_advantages as _group_advantages

__version__ = "0.1.0"

__all__ = [
    "BoundSession",
    "UnknownImageError",
    "evaluate_map",
    "group_advantages",
    "load_session",
    "score_batch",
]

Sample = Tuple[str, str]
Prediction = Union[Sample, PredictionTriplet]


@dataclass(frozen=True)
class BoundSession:
    """Config, ground-truth dataset, and vocabulary loaded once.

    Immutable after construction; every operation below is a pure function
    of the session and its arguments, so one session can serve concurrent
    host threads.
    """

    config: Config
    dataset: Dataset

    @property
    def vocab(self) -> Vocabulary:
        return self.dataset.vocab


def _read_payload(path: Path) -> dict:
    if path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def load_session(config_path: Union[str, Path]) -> BoundSession:
    """Build a session from a config file with a [dataset] section.

    The section requires "path" (resolved against the config file's
    directory when relative) and accepts "format" ("canonical", the
    default, or "hico_json"). The rest of the file is the ordinary core
    config: weights, dedup settings, score mode, and so on.
    """
    path = Path(config_path)
    payload = _read_payload(path)
    section = payload.get("dataset")
    if not isinstance(section, dict) or "path" not in section:
        raise ValueError(f"{path}: expected a [dataset] section with a \"path\" key")
    data_path = Path(str(section["path"]))
    if not data_path.is_absolute():
        data_path = path.parent / data_path
    dataset = load_annotations(data_path, fmt=str(section.get("format", "canonical")))
    return BoundSession(config=load_config(path), dataset=dataset)


def score_batch(
    session: BoundSession,
    samples: Iterable[Sample],
) -> list[RewardBreakdown]:
    """Score (image_id, completion) pairs against the session ground truth.

    Results line up with the input order and match the CLI `reward score`
    numbers exactly. Ids absent from the dataset raise UnknownImageError
    carrying the offending ids before anything is scored.
    """
    batch = [(str(image_id), completion) for image_id, completion in samples]
    unknown = sorted({image_id for image_id, _ in batch if image_id not in session.dataset})
    if unknown:
        raise UnknownImageError(unknown)
    weights = session.config.weights
    return [
        score_sample(completion, session.dataset.image(image_id), session.vocab, weights)
        for image_id, completion in batch
    ]


def group_advantages(session: BoundSession, rewards: Sequence[float]) -> list[float]:
    """Group-normalized advantages for one rollout group.

    The session carries no state this needs; it is part of the signature so
    hosts hold exactly one handle for every call into the core.
    """
    return _group_advantages([float(r) for r in rewards])


def evaluate_map(
    session: BoundSession,
    predictions: Iterable[Prediction],
    rare_set: Optional[Iterable[int]] = None,
) -> EvalTable:
    """HICO-style mAP table over raw completions or prebuilt triplets.

    Accepts (image_id, completion) pairs and PredictionTriplet instances,
    mixed freely; completions are expanded under the session's score mode.
    With rare_set=None the rare split is derived from the session's own
    dataset, mirroring the CLI fallback.
    """
    preds: list[PredictionTriplet] = []
    for item in predictions:
        if isinstance(item, PredictionTriplet):
            preds.append(item)
            continue
        image_id, completion = item
        parsed = parse_completion(completion)
        preds.extend(
            expand_triplets(parsed, str(image_id), session.vocab, session.config.score_mode)
        )
    if rare_set is None:
        rare = derive_rare_categories(session.dataset)
    else:
        rare = frozenset(int(c) for c in rare_set)
    return evaluate(preds, session.dataset.images, rare, session.vocab)
