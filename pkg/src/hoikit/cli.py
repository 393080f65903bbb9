"""Command-line interface exposing the pipeline as subcommands.

Subcommands: prompts build, reward score, eval map, simulate, grpo
advantages, sft assemble, sft fetch. All file outputs are JSON-lines with a
leading header record carrying the tool version and the effective config, so
any artifact can be traced to the settings that produced it. Exit codes:
0 success, 1 validation failures present in the output, 2 environmental or
I/O failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence

from . import __version__
from .config import Config, DEFAULT_CONFIG, apply_overrides, load_config
from .datasets import (
    Dataset,
    FORMAT_CANONICAL,
    FORMAT_HICO_JSON,
    assemble_sft,
    derive_rare_categories,
    load_annotations,
)
from .domain import box_from_values
from .evaluation import (
    PredictionTriplet,
    SCORE_CONSTANT,
    SCORE_RANK,
    UnknownImageError,
    evaluate,
    expand_triplets,
)
from .parsing import parse_completion
from .prompts import build_prompt
from .rewards import score_sample
from .simulate import NoiseProfile, simulate_corpus
from .traces import fetch_traces, read_traces
from .training import group_advantages

_BATCH = 1024


def _header(command: str, config: Config, **extras) -> str:
    payload = {"header": {"tool": "hoikit", "version": __version__, "command": command, "config": config.echo()}}
    if extras:
        payload["header"].update(extras)
    return json.dumps(payload)


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict]]:
    """Yield (line_number, record) for data lines, skipping header records."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if isinstance(record, dict) and "header" in record:
                continue
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: expected a JSON object")
            yield lineno, record


def _load_dataset(args, attr: str = "dataset") -> Dataset:
    path = Path(getattr(args, attr))
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    diagnostics: list[str] = []
    dataset = load_annotations(path, fmt=args.dataset_format, diagnostics=diagnostics)
    for message in diagnostics:
        print(f"warning: {message}", file=sys.stderr)
    return dataset


def _config_from_args(args) -> Config:
    config = load_config(args.config) if getattr(args, "config", None) else DEFAULT_CONFIG
    return apply_overrides(
        config,
        weight_overrides=getattr(args, "weights", None) or (),
        dedup_mode=getattr(args, "dedup_mode", None),
        score_mode=getattr(args, "score_mode", None),
    )


def _map_ordered(fn: Callable, items: Iterable, workers: int) -> Iterator:
    """Apply fn preserving input order, optionally across a thread pool."""
    if workers <= 1:
        yield from map(fn, items)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        batch: list = []
        for item in items:
            batch.append(item)
            if len(batch) >= _BATCH:
                yield from pool.map(fn, batch)
                batch = []
        if batch:
            yield from pool.map(fn, batch)


def _percentile(sorted_values: Sequence[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    index = min(int(q * len(sorted_values)), len(sorted_values) - 1)
    return sorted_values[index]


def cmd_prompts_build(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    prompt = build_prompt(dataset.vocab)
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(_header("prompts build", config) + "\n")
        for img in dataset.images:
            out.write(json.dumps({"image_id": img.image_id, "prompt": prompt}) + "\n")
    return 0


def cmd_reward_score(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    completions = Path(args.completions)
    if not completions.exists():
        raise FileNotFoundError(f"completions file not found: {completions}")

    def score_one(record: dict):
        image_id = str(record.get("image_id", ""))
        if image_id not in dataset:
            return image_id, None
        breakdown = score_sample(record["completion"], dataset.image(image_id), dataset.vocab, config.weights)
        return image_id, breakdown

    errors = 0
    totals: list[float] = []
    rows = (record for _, record in _iter_jsonl(completions))
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(_header("reward score", config) + "\n")
        for image_id, breakdown in _map_ordered(score_one, rows, args.workers):
            if breakdown is None:
                errors += 1
                out.write(json.dumps({"image_id": image_id, "error": "unknown image_id"}) + "\n")
                continue
            totals.append(breakdown.total)
            out.write(json.dumps({"image_id": image_id, **breakdown.to_dict()}) + "\n")

    if totals:
        ordered = sorted(totals)
        print(
            f"scored {len(totals)} samples: mean total {sum(totals) / len(totals):.4f}, "
            f"p10 {_percentile(ordered, 0.10):.4f}, p50 {_percentile(ordered, 0.50):.4f}, "
            f"p90 {_percentile(ordered, 0.90):.4f}",
            file=sys.stderr,
        )
    if errors:
        print(f"{errors} samples referenced unknown image ids", file=sys.stderr)
        return 1
    return 0


def _predictions_from_file(path: Path, dataset: Dataset, score_mode: str) -> list[PredictionTriplet]:
    preds: list[PredictionTriplet] = []
    for lineno, record in _iter_jsonl(path):
        if "completion" in record:
            parsed = parse_completion(record["completion"])
            preds.extend(expand_triplets(parsed, str(record["image_id"]), dataset.vocab, score_mode))
        else:
            try:
                preds.append(
                    PredictionTriplet(
                        image_id=str(record["image_id"]),
                        human=box_from_values(record["human"]),
                        object=box_from_values(record["object"]),
                        hoi_category=int(record["hoi_category"]),
                        score=float(record["score"]),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from None
    return preds


def cmd_eval_map(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    predictions_path = Path(args.predictions)
    if not predictions_path.exists():
        raise FileNotFoundError(f"predictions file not found: {predictions_path}")

    if args.rare_set:
        with open(args.rare_set, "r", encoding="utf-8") as fh:
            rare = frozenset(int(c) for c in json.load(fh))
    else:
        source = dataset
        if args.train_dataset:
            diagnostics: list[str] = []
            source = load_annotations(args.train_dataset, fmt=args.dataset_format, diagnostics=diagnostics)
        rare = derive_rare_categories(source)

    preds = _predictions_from_file(predictions_path, dataset, config.score_mode)
    table = evaluate(preds, dataset.images, rare, dataset.vocab)

    with open(args.out, "w", encoding="utf-8") as out:
        out.write(_header("eval map", config) + "\n")
        if args.format == "table":
            out.write(table.render() + "\n")
        else:
            out.write(json.dumps(table.to_dict()) + "\n")
    print(table.render(), file=sys.stderr)
    return 0


def cmd_simulate(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    if args.profile:
        with open(args.profile, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        payload.setdefault("seed", args.seed)
        profile = NoiseProfile(**payload)
    else:
        profile = NoiseProfile.uniform(args.noise_level, seed=args.seed)
    rows = simulate_corpus(dataset.images, profile, dataset.vocab, samples_per_image=args.samples_per_image)
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(
            _header(
                "simulate",
                config,
                noise={
                    "box_jitter_sigma": profile.box_jitter_sigma,
                    "label_swap_prob": profile.label_swap_prob,
                    "verb_drop_prob": profile.verb_drop_prob,
                    "instance_drop_prob": profile.instance_drop_prob,
                    "instance_dup_prob": profile.instance_dup_prob,
                    "format_break_prob": profile.format_break_prob,
                    "seed": profile.seed,
                },
                samples_per_image=args.samples_per_image,
            )
            + "\n"
        )
        for image_id, completion in rows:
            out.write(json.dumps({"image_id": image_id, "completion": completion}) + "\n")
    return 0


def cmd_grpo_advantages(args) -> int:
    config = _config_from_args(args)
    in_path = Path(args.in_path)
    if not in_path.exists():
        raise FileNotFoundError(f"input file not found: {in_path}")
    errors = 0
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(_header("grpo advantages", config) + "\n")
        for lineno, record in _iter_jsonl(in_path):
            try:
                advantages = group_advantages([float(r) for r in record["rewards"]])
            except (KeyError, TypeError, ValueError) as exc:
                errors += 1
                out.write(json.dumps({"group_id": record.get("group_id"), "error": str(exc)}) + "\n")
                continue
            out.write(json.dumps({"group_id": record.get("group_id"), "advantages": advantages}) + "\n")
    return 1 if errors else 0


def cmd_sft_assemble(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    traces = read_traces(args.traces)
    records, skipped = assemble_sft(dataset, traces)
    with open(args.out, "w", encoding="utf-8") as out:
        out.write(_header("sft assemble", config) + "\n")
        for record in records:
            out.write(json.dumps(record.to_dict()) + "\n")
    print(f"assembled {len(records)} records, skipped {skipped} without traces", file=sys.stderr)
    return 0


def cmd_sft_fetch(args) -> int:
    dataset = _load_dataset(args)
    config = _config_from_args(args)
    if config.endpoint is None:
        print("error: config has no [endpoint] section", file=sys.stderr)
        return 2
    fetched, skipped, failed = fetch_traces(dataset, config.endpoint, args.out)
    print(f"fetched {fetched}, skipped {skipped} existing, {failed} failed", file=sys.stderr)
    return 1 if failed else 0


def _add_common(parser: argparse.ArgumentParser, dataset: bool = True) -> None:
    parser.add_argument("--config", help="TOML or JSON config file")
    parser.add_argument(
        "--weights",
        nargs="*",
        metavar="NAME=VALUE",
        help="format weight overrides, e.g. w_tag=0.2 (defaults 0.2 each)",
    )
    parser.add_argument("--dedup-mode", choices=["pair-both", "either-box"], help="box dedup rule")
    if dataset:
        parser.add_argument("--dataset", required=True, help="dataset file")
        parser.add_argument(
            "--dataset-format",
            choices=[FORMAT_CANONICAL, FORMAT_HICO_JSON],
            default=FORMAT_CANONICAL,
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hoikit",
        description=(
            "HOI detection tooling: prompts, rewards, policy-gradient math, and mAP "
            "evaluation. Published-setup defaults: format weights 0.2, group size 4. "
            "epsilon_clip and beta have no published value (defaults 0.2 / 0.04)."
        ),
    )
    parser.add_argument("--version", action="version", version=f"hoikit {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    prompts = commands.add_parser("prompts", help="prompt construction").add_subparsers(
        dest="subcommand", required=True
    )
    build = prompts.add_parser("build", help="emit one prompt per image")
    _add_common(build)
    build.add_argument("--out", required=True)
    build.set_defaults(func=cmd_prompts_build)

    reward = commands.add_parser("reward", help="reward scoring").add_subparsers(
        dest="subcommand", required=True
    )
    score = reward.add_parser("score", help="score completions against ground truth")
    _add_common(score)
    score.add_argument("--completions", required=True, help="JSONL {image_id, completion}")
    score.add_argument("--out", required=True)
    score.add_argument("--workers", type=int, default=1)
    score.set_defaults(func=cmd_reward_score)

    evalp = commands.add_parser("eval", help="mAP evaluation").add_subparsers(
        dest="subcommand", required=True
    )
    emap = evalp.add_parser("map", help="HICO-DET style mAP over predictions")
    _add_common(emap)
    emap.add_argument("--predictions", required=True, help="JSONL completions or expanded triplets")
    emap.add_argument("--out", required=True)
    emap.add_argument("--train-dataset", help="training annotations for the rare split")
    emap.add_argument("--rare-set", help="JSON list of rare category ids (overrides --train-dataset)")
    emap.add_argument("--score-mode", choices=[SCORE_RANK, SCORE_CONSTANT])
    emap.add_argument("--format", choices=["jsonl", "table"], default="jsonl")
    emap.set_defaults(func=cmd_eval_map)

    sim = commands.add_parser("simulate", help="generate noisy completions from ground truth")
    _add_common(sim)
    sim.add_argument("--noise-level", type=float, default=0.0, help="uniform corruption rate")
    sim.add_argument("--profile", help="JSON NoiseProfile file (overrides --noise-level)")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--samples-per-image", type=int, default=1)
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    grpo = commands.add_parser("grpo", help="policy-gradient math").add_subparsers(
        dest="subcommand", required=True
    )
    adv = grpo.add_parser("advantages", help="group-normalized advantages")
    _add_common(adv, dataset=False)
    adv.add_argument("--in", dest="in_path", required=True, help="JSONL {group_id, rewards}")
    adv.add_argument("--out", required=True)
    adv.set_defaults(func=cmd_grpo_advantages)

    sft = commands.add_parser("sft", help="distillation data assembly").add_subparsers(
        dest="subcommand", required=True
    )
    assemble = sft.add_parser("assemble", help="join prompts, traces, and answers")
    _add_common(assemble)
    assemble.add_argument("--traces", required=True, help="JSONL {image_id, think}")
    assemble.add_argument("--out", required=True)
    assemble.set_defaults(func=cmd_sft_assemble)

    fetch = sft.add_parser("fetch", help="fetch teacher traces over HTTP")
    _add_common(fetch)
    fetch.add_argument("--out", required=True)
    fetch.set_defaults(func=cmd_sft_fetch)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UnknownImageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
