"""Dataset ingestion and serialization.

Two on-disk formats are supported: the canonical JSON schema owned by this
repo (schema_version, images, integer class ids) and an importer for the
widely distributed hico_json list format (per image: file_name, annotations,
hoi_annotation with index joins). Verbs for one (human, object) pair are
merged at ingestion, so downstream code always sees one pair with a verb set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

from .domain import (
    BBox,
    GtImage,
    GtPair,
    NOT_FOUND,
    Vocabulary,
    box_from_values,
    load_vocabulary,
)

SCHEMA_VERSION = 1
RARE_THRESHOLD = 10

FORMAT_CANONICAL = "canonical"
FORMAT_HICO_JSON = "hico_json"

# COCO detection ids are sparse in 1..90; position in this tuple is the
# contiguous id used everywhere else in this package.
_COCO91_IDS = (
    1, 2, 3, 4, 5, 6, 7, 8, 9, 10,
    11, 13, 14, 15, 16, 17, 18, 19, 20, 21,
    22, 23, 24, 25, 27, 28, 31, 32, 33, 34,
    35, 36, 37, 38, 39, 40, 41, 42, 43, 44,
    46, 47, 48, 49, 50, 51, 52, 53, 54, 55,
    56, 57, 58, 59, 60, 61, 62, 63, 64, 65,
    67, 70, 72, 73, 74, 75, 76, 77, 78, 79,
    80, 81, 82, 84, 85, 86, 87, 88, 89, 90,
)
_COCO91_TO_CONTIGUOUS = {cid: i for i, cid in enumerate(_COCO91_IDS)}

DEFAULT_THINK_TEXT = (
    "First I identify every person in the image, then examine what each one "
    "is doing, and finally determine which object each action involves."
)


@dataclass(frozen=True)
class Dataset:
    split: str
    images: tuple[GtImage, ...]
    vocab: Vocabulary

    def __post_init__(self) -> None:
        ids = [img.image_id for img in self.images]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image ids: {dupes[:10]}")
        object.__setattr__(self, "_by_id", {img.image_id: img for img in self.images})

    def image(self, image_id: str) -> GtImage:
        return self._by_id[image_id]

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def __len__(self) -> int:
        return len(self.images)

    def validate(self) -> list[str]:
        """Check every pair's (verb, object) combination; returns problems."""
        problems = []
        for img in self.images:
            for k, pair in enumerate(img.pairs):
                for v in pair.verb_classes:
                    if not self.vocab.is_valid_combination(v, pair.object_class):
                        problems.append(
                            f"image {img.image_id} pair {k}: invalid combination "
                            f"(verb={v}, object={pair.object_class})"
                        )
        return problems


@dataclass(frozen=True)
class SftRecord:
    image_id: str
    prompt: str
    think: str
    answer: str

    def to_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "prompt": self.prompt,
            "think": self.think,
            "answer": self.answer,
        }


def load_annotations(
    path: Union[str, Path],
    fmt: str = FORMAT_CANONICAL,
    vocab: Optional[Vocabulary] = None,
    diagnostics: Optional[list[str]] = None,
) -> Dataset:
    """Load a dataset file in the canonical or hico_json format.

    Malformed pairs are skipped and reported into `diagnostics` (with image
    index); images left with zero pairs are retained and flagged there too.
    """
    vocab = vocab or load_vocabulary()
    sink = diagnostics if diagnostics is not None else []
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if fmt == FORMAT_CANONICAL:
        return _load_canonical(payload, vocab, sink)
    if fmt == FORMAT_HICO_JSON:
        return _load_hico_json(payload, vocab, sink)
    raise ValueError(f"unknown dataset format {fmt!r}")


def _load_canonical(payload: dict, vocab: Vocabulary, diagnostics: list[str]) -> Dataset:
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION}")
    images = []
    for index, record in enumerate(payload["images"]):
        image_id = str(record["image_id"])
        pairs = []
        for k, raw in enumerate(record.get("pairs", [])):
            try:
                pair = GtPair(
                    human=box_from_values(raw["human"]),
                    object=box_from_values(raw["object"]),
                    object_class=int(raw["object_class"]),
                    verb_classes=frozenset(int(v) for v in raw["verb_classes"]),
                )
                bad = [
                    v for v in pair.verb_classes
                    if not vocab.is_valid_combination(v, pair.object_class)
                ]
                if bad:
                    diagnostics.append(
                        f"image {index} ({image_id}) pair {k}: invalid combination "
                        f"verbs {sorted(bad)} with object {pair.object_class}; skipped"
                    )
                    continue
            except (KeyError, TypeError, ValueError) as exc:
                diagnostics.append(f"image {index} ({image_id}) pair {k}: {exc}; skipped")
                continue
            pairs.append(pair)
        if not pairs:
            diagnostics.append(f"image {index} ({image_id}): no valid pairs")
        images.append(
            GtImage(
                image_id=image_id,
                width=float(record["width"]),
                height=float(record["height"]),
                pairs=tuple(pairs),
            )
        )
    return Dataset(split=str(payload.get("split", "train")), images=tuple(images), vocab=vocab)


def _load_hico_json(payload: list, vocab: Vocabulary, diagnostics: list[str]) -> Dataset:
    images = []
    seen_ids = set()
    for index, record in enumerate(payload):
        try:
            file_name = str(record["file_name"])
        except (KeyError, TypeError):
            diagnostics.append(f"record {index}: missing file_name; skipped")
            continue
        image_id = Path(file_name).stem
        if image_id in seen_ids:
            diagnostics.append(f"record {index}: duplicate file_name {file_name}; skipped")
            continue
        seen_ids.add(image_id)

        boxes: list[Optional[BBox]] = []
        classes: list[int] = []
        for k, ann in enumerate(record.get("annotations", [])):
            try:
                box = box_from_values(ann["bbox"])
                cid = int(ann["category_id"])
                contiguous = _COCO91_TO_CONTIGUOUS.get(cid, NOT_FOUND)
                if contiguous == NOT_FOUND:
                    raise ValueError(f"unknown category_id {cid}")
            except (KeyError, TypeError, ValueError) as exc:
                diagnostics.append(f"record {index} ({image_id}) annotation {k}: {exc}")
                boxes.append(None)
                classes.append(NOT_FOUND)
                continue
            boxes.append(box)
            classes.append(contiguous)

        merged: dict[tuple[int, int], set[int]] = {}
        order: list[tuple[int, int]] = []
        for k, hoi in enumerate(record.get("hoi_annotation", [])):
            try:
                s = int(hoi["subject_id"])
                o = int(hoi["object_id"])
                verb = int(hoi["category_id"]) - 1
            except (KeyError, TypeError, ValueError) as exc:
                diagnostics.append(f"record {index} ({image_id}) hoi {k}: {exc}; skipped")
                continue
            if not (0 <= s < len(boxes) and 0 <= o < len(boxes)):
                diagnostics.append(f"record {index} ({image_id}) hoi {k}: box index out of range; skipped")
                continue
            if boxes[s] is None or boxes[o] is None or classes[o] == NOT_FOUND:
                diagnostics.append(f"record {index} ({image_id}) hoi {k}: references bad annotation; skipped")
                continue
            if not vocab.is_valid_combination(verb, classes[o]):
                diagnostics.append(
                    f"record {index} ({image_id}) hoi {k}: invalid combination "
                    f"(verb={verb}, object={classes[o]}); skipped"
                )
                continue
            key = (s, o)
            if key not in merged:
                merged[key] = set()
                order.append(key)
            merged[key].add(verb)

        pairs = tuple(
            GtPair(
                human=boxes[s],
                object=boxes[o],
                object_class=classes[o],
                verb_classes=frozenset(merged[(s, o)]),
            )
            for s, o in order
        )
        if not pairs:
            diagnostics.append(f"record {index} ({image_id}): no valid pairs")

        # The list format often lacks image dimensions; fall back to the
        # tightest bounds containing every annotated box so clamping no-ops.
        width = record.get("width")
        height = record.get("height")
        if width is None or height is None:
            real = [b for b in boxes if b is not None]
            width = max((b.x2 for b in real), default=1.0)
            height = max((b.y2 for b in real), default=1.0)
        images.append(
            GtImage(image_id=image_id, width=float(width), height=float(height), pairs=pairs)
        )
    split = "train" if images and "train" in images[0].image_id.lower() else "test"
    return Dataset(split=split, images=tuple(images), vocab=vocab)


def save_annotations(dataset: Dataset, path: Union[str, Path]) -> None:
    """Write the canonical JSON form (load_annotations round-trips it)."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "split": dataset.split,
        "images": [
            {
                "image_id": img.image_id,
                "width": img.width,
                "height": img.height,
                "pairs": [
                    {
                        "human": pair.human.as_list(),
                        "object": pair.object.as_list(),
                        "object_class": pair.object_class,
                        "verb_classes": sorted(pair.verb_classes),
                    }
                    for pair in img.pairs
                ],
            }
            for img in dataset.images
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def derive_rare_categories(train: Dataset) -> frozenset[int]:
    """Categories with fewer than 10 training instances (absent counts as 0)."""
    counts = [0] * len(train.vocab.hoi_triples)
    for img in train.images:
        for pair in img.pairs:
            for v in pair.verb_classes:
                cat = train.vocab.hoi_category(v, pair.object_class)
                if cat != NOT_FOUND:
                    counts[cat] += 1
    return frozenset(c for c, n in enumerate(counts) if n < RARE_THRESHOLD)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def gt_to_answer(g: GtImage, vocab: Vocabulary) -> str:
    """Serialize ground truth into the answer JSON the model is trained to emit.

    One entry per pair in annotation order; a pair's verbs are merged into a
    single array (sorted by id); boxes are integers, rounded half-up.
    """
    entries = []
    for pair in g.pairs:
        entries.append(
            {
                "human": [_round_half_up(v) for v in pair.human.as_list()],
                "object": [_round_half_up(v) for v in pair.object.as_list()],
                "object class": vocab.objects[pair.object_class],
                "verb class": [vocab.verbs[v] for v in sorted(pair.verb_classes)],
            }
        )
    return json.dumps(entries)


def wrap_completion(think: str, answer: str) -> str:
    """Assemble the full completion text around a think and an answer body."""
    return f"<think>{think}</think>\n<answer>{answer}</answer>"


def assemble_sft(
    dataset: Dataset,
    traces: Mapping[str, str],
    prompt: Optional[str] = None,
) -> tuple[list[SftRecord], int]:
    """Join prompts, teacher thinking traces, and serialized answers.

    Returns (records, skipped) where skipped counts images without a trace.
    """
    if prompt is None:
        from .prompts import build_prompt

        prompt = build_prompt(dataset.vocab)
    records = []
    skipped = 0
    for img in dataset.images:
        think = traces.get(img.image_id)
        if think is None:
            skipped += 1
            continue
        records.append(
            SftRecord(
                image_id=img.image_id,
                prompt=prompt,
                think=think,
                answer=gt_to_answer(img, dataset.vocab),
            )
        )
    return records, skipped
