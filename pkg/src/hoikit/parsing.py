"""Lenient parsing of model completions into structured HOI instances.

The reward side needs more than values: the key penalty depends on how many
keys (including duplicates) each instance dict carried, and standard JSON
parsing silently collapses duplicates. Parsing therefore goes through
``object_pairs_hook`` on the strict path and a bracket-balanced scanner on
the tolerant path, keeping the first occurrence of every canonical key while
counting all of them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional

from .domain import BBox

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
ANSWER_OPEN = "<answer>"
ANSWER_CLOSE = "</answer>"

KEY_HUMAN = "human"
KEY_OBJECT = "object"
KEY_OBJECT_CLASS = "object class"
KEY_VERB_CLASS = "verb class"
CANONICAL_KEYS = (KEY_HUMAN, KEY_OBJECT, KEY_OBJECT_CLASS, KEY_VERB_CLASS)

# Bound worst-case work per sample on the RL hot path.
DEFAULT_LENGTH_CAP = 65_536


@dataclass
class HoiInstance:
    """One parsed prediction record, including raw key accounting."""

    human: Optional[BBox] = None
    object: Optional[BBox] = None
    object_class: Optional[str] = None
    verb_classes: list[str] = field(default_factory=list)
    key_count: int = 0
    present_keys: frozenset[str] = frozenset()

    @property
    def has_both_boxes(self) -> bool:
        return self.human is not None and self.object is not None


@dataclass
class ParsedCompletion:
    has_think_tag: bool
    has_answer_tag: bool
    think_text: Optional[str]
    instances: list[HoiInstance]
    parse_diagnostics: list[tuple[int, str]] = field(default_factory=list)


def extract_tags(text: str) -> tuple[Optional[str], Optional[str]]:
    """Contents between the first think and answer tag pairs.

    An opening tag without its closing tag yields content to end-of-text;
    an absent opening tag yields None.
    """

    def section(open_tag: str, close_tag: str) -> Optional[str]:
        start = text.find(open_tag)
        if start < 0:
            return None
        start += len(open_tag)
        end = text.find(close_tag, start)
        return text[start:] if end < 0 else text[start:end]

    return section(THINK_OPEN, THINK_CLOSE), section(ANSWER_OPEN, ANSWER_CLOSE)


def _coerce_box(value: Any) -> Optional[BBox]:
    if not isinstance(value, (list, tuple)) or len(value) != 4:
        return None
    coords = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return None
        coords.append(float(v))
    return BBox(*coords)


def _coerce_verbs(value: Any, diagnostics: list[tuple[int, str]], pos: int) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, (list, tuple)):
        verbs = []
        for v in value:
            if isinstance(v, str):
                verbs.append(v)
            else:
                diagnostics.append((pos, f"non-string verb entry skipped: {v!r}"))
        return verbs
    diagnostics.append((pos, f"unusable verb value: {type(value).__name__}"))
    return []


def _instance_from_pairs(
    pairs: list[tuple[str, Any]],
    diagnostics: list[tuple[int, str]],
    pos: int,
) -> HoiInstance:
    inst = HoiInstance(key_count=len(pairs))
    seen: set[str] = set()
    present: set[str] = set()
    for raw_key, value in pairs:
        key = raw_key.strip().lower() if isinstance(raw_key, str) else ""
        if key not in CANONICAL_KEYS:
            continue
        present.add(key)
        if key in seen:  # first occurrence wins
            continue
        seen.add(key)
        if key == KEY_HUMAN:
            inst.human = _coerce_box(value)
            if inst.human is None:
                diagnostics.append((pos, "invalid human box value"))
        elif key == KEY_OBJECT:
            inst.object = _coerce_box(value)
            if inst.object is None:
                diagnostics.append((pos, "invalid object box value"))
        elif key == KEY_OBJECT_CLASS:
            if isinstance(value, str):
                inst.object_class = value
            else:
                diagnostics.append((pos, "non-string object class value"))
        elif key == KEY_VERB_CLASS:
            inst.verb_classes = _coerce_verbs(value, diagnostics, pos)
    inst.present_keys = frozenset(present)
    return inst


def _scan_objects(text: str) -> list[tuple[int, list[tuple[str, Any]]]]:
    """Recover well-formed JSON objects from arbitrary text.

    Walks the text for brace-balanced chunks (string- and escape-aware) and
    keeps each chunk that parses as a JSON object, skipping garbage between
    them. Returns (position, raw key/value pairs) per recovered object.
    """
    out = []
    i = 0
    n = len(text)
    while i < n:
        start = text.find("{", i)
        if start < 0:
            break
        depth = 0
        in_string = False
        escaped = False
        end = -1
        for j in range(start, n):
            c = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
            elif c == '"':
                in_string = True
            elif c == "{":
                depth += 1
            elif c == "}":
                depth -= 1
                if depth == 0:
                    end = j
                    break
        if end < 0:
            # Unterminated (typically truncated) trailing object.
            i = start + 1
            continue
        chunk = text[start : end + 1]
        try:
            pairs = json.loads(chunk, object_pairs_hook=list)
        except json.JSONDecodeError:
            i = start + 1
            continue
        out.append((start, pairs))
        i = end + 1
    return out


def parse_answer(answer_text: str) -> tuple[list[HoiInstance], list[tuple[int, str]]]:
    """Parse answer text into instances, strict JSON first, then recovery."""
    diagnostics: list[tuple[int, str]] = []
    try:
        parsed = json.loads(answer_text, object_pairs_hook=list)
    except (json.JSONDecodeError, RecursionError):
        parsed = None

    # With object_pairs_hook both "[]" and "{}" decode to []; the leading
    # character tells an empty array apart from an empty object.
    first = answer_text.lstrip()[:1]
    entries: list[tuple[int, list[tuple[str, Any]]]] = []
    if parsed is not None and first == "{" and _looks_like_pairs(parsed):
        entries = [(0, parsed)]
    elif parsed is not None and isinstance(parsed, list) and first == "[":
        for k, item in enumerate(parsed):
            if _looks_like_pairs(item):
                entries.append((k, item))
            else:
                diagnostics.append((k, f"non-object array entry skipped: {item!r}"))
    else:
        if parsed is not None:
            diagnostics.append((0, "top-level JSON is neither array nor object"))
        else:
            diagnostics.append((0, "strict JSON parse failed; scanning for objects"))
        entries = _scan_objects(answer_text)
        if not entries and answer_text.strip():
            diagnostics.append((0, "no recoverable instance objects"))

    instances = [_instance_from_pairs(pairs, diagnostics, pos) for pos, pairs in entries]
    return instances, diagnostics


def _looks_like_pairs(value: Any) -> bool:
    """True for the object_pairs_hook representation of a JSON object."""
    return isinstance(value, list) and all(
        isinstance(p, tuple) and len(p) == 2 and isinstance(p[0], str) for p in value
    )


def parse_completion(text: str, length_cap: int = DEFAULT_LENGTH_CAP) -> ParsedCompletion:
    """Total parse of one completion; never raises on any input text."""
    if length_cap and len(text) > length_cap:
        text = text[:length_cap]
    has_think = THINK_OPEN in text
    has_answer = ANSWER_OPEN in text
    think_text, answer_text = extract_tags(text)
    instances: list[HoiInstance] = []
    diagnostics: list[tuple[int, str]] = []
    if has_answer and answer_text is not None:
        instances, diagnostics = parse_answer(answer_text)
    return ParsedCompletion(
        has_think_tag=has_think,
        has_answer_tag=has_answer,
        think_text=think_text,
        instances=instances,
        parse_diagnostics=diagnostics,
    )
