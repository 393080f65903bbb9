"""Client for fetching teacher reasoning traces from a chat-completions API.

Each image gets one request carrying the image reference and the reasoning
prompt; returned text becomes the think field of the SFT record. Runs are
resumable (already-fetched ids are skipped), requests back off exponentially
on transient failures, and ids that never succeed are listed in a sidecar
file next to the output.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import requests

from .datasets import Dataset
from .prompts import DEFAULT_REASONING_STEPS

logger = logging.getLogger(__name__)

DEFAULT_TRACE_PROMPT = (
    "Look at image {image_id}. Reason step by step about the human-object "
    "interactions it contains: " + " ".join(DEFAULT_REASONING_STEPS)
)

TRANSIENT_STATUS = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class EndpointConfig:
    url: str
    model: str
    auth_env: str = "HOIKIT_API_TOKEN"
    prompt_template: str = DEFAULT_TRACE_PROMPT
    max_attempts: int = 4
    backoff_base: float = 0.5
    timeout: float = 60.0
    min_request_interval: float = 0.0

    def token(self) -> Optional[str]:
        return os.environ.get(self.auth_env)


def _read_completed(path: Path) -> set[str]:
    done = set()
    if not path.exists():
        return done
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                continue
            if isinstance(record, dict) and "image_id" in record and "think" in record:
                done.add(str(record["image_id"]))
    return done


def read_traces(path: Union[str, Path]) -> dict[str, str]:
    """Load a trace file into an image_id -> think mapping."""
    traces = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if isinstance(record, dict) and "image_id" in record and "think" in record:
                traces[str(record["image_id"])] = str(record["think"])
    return traces


def _request_once(
    config: EndpointConfig,
    image_id: str,
    session: requests.Session,
) -> str:
    headers = {"Content-Type": "application/json"}
    token = config.token()
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": config.model,
        "messages": [
            {"role": "user", "content": config.prompt_template.format(image_id=image_id)}
        ],
    }
    response = session.post(config.url, json=body, headers=headers, timeout=config.timeout)
    if response.status_code in TRANSIENT_STATUS:
        raise TransientFetchError(f"HTTP {response.status_code}")
    response.raise_for_status()
    payload = response.json()
    return payload["choices"][0]["message"]["content"]


class TransientFetchError(RuntimeError):
    """Retriable transport or rate-limit failure."""


def fetch_traces(
    dataset: Dataset,
    config: EndpointConfig,
    out_path: Union[str, Path],
    sleep: Callable[[float], None] = time.sleep,
) -> tuple[int, int, int]:
    """Fetch think traces for every image missing from the output file.

    Appends JSON-lines {"image_id", "think"} records in image_id order and
    writes permanently failed ids to "<out>.failed". Returns
    (fetched, skipped_existing, failed) counts.
    """
    out_path = Path(out_path)
    done = _read_completed(out_path)
    todo = sorted(img.image_id for img in dataset.images if img.image_id not in done)
    skipped = len(dataset.images) - len(todo)

    failed: list[tuple[str, str]] = []
    fetched = 0
    session = requests.Session()
    last_request = 0.0
    with open(out_path, "a", encoding="utf-8") as out:
        for image_id in todo:
            attempt = 0
            while True:
                if config.min_request_interval > 0:
                    wait = last_request + config.min_request_interval - time.monotonic()
                    if wait > 0:
                        sleep(wait)
                last_request = time.monotonic()
                attempt += 1
                try:
                    think = _request_once(config, image_id, session)
                except (TransientFetchError, requests.ConnectionError, requests.Timeout) as exc:
                    logger.warning("image %s attempt %d failed: %s", image_id, attempt, exc)
                    if attempt >= config.max_attempts:
                        failed.append((image_id, str(exc)))
                        break
                    sleep(config.backoff_base * (2 ** (attempt - 1)))
                    continue
                except requests.RequestException as exc:
                    logger.error("image %s permanent failure: %s", image_id, exc)
                    failed.append((image_id, str(exc)))
                    break
                out.write(json.dumps({"image_id": image_id, "think": think}) + "\n")
                out.flush()
                fetched += 1
                break

    if failed:
        sidecar = out_path.with_name(out_path.name + ".failed")
        with open(sidecar, "w", encoding="utf-8") as fh:
            for image_id, reason in failed:
                fh.write(json.dumps({"image_id": image_id, "error": reason}) + "\n")
    return fetched, skipped, len(failed)
