import json
import os

import pytest

from hoikit.cli import main
from hoikit.datasets import gt_to_answer, wrap_completion

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
MINI = os.path.join(FIXTURES, "mini_dataset.json")


def read_jsonl(path):
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            record = json.loads(line)
            if "header" in record:
                header = record["header"]
            else:
                rows.append(record)
    return header, rows


def echo_completions(mini_dataset, path):
    with open(path, "w") as fh:
        for img in mini_dataset.images:
            text = wrap_completion("t", gt_to_answer(img, mini_dataset.vocab))
            fh.write(json.dumps({"image_id": img.image_id, "completion": text}) + "\n")


def test_prompts_build_outputs_header_and_rows(tmp_path, capsys):
    out = tmp_path / "prompts.jsonl"
    assert main(["prompts", "build", "--dataset", MINI, "--out", str(out)]) == 0
    header, rows = read_jsonl(out)
    assert header["tool"] == "hoikit"
    assert header["command"] == "prompts build"
    assert "weights" in header["config"]
    assert len(rows) == 20
    assert all("<VALID OBJECT CLASSES>" in r["prompt"] for r in rows)


def test_reward_score_echo_and_rerun_determinism(tmp_path, mini_dataset):
    comps = tmp_path / "comps.jsonl"
    echo_completions(mini_dataset, comps)
    out1 = tmp_path / "scores1.jsonl"
    out2 = tmp_path / "scores2.jsonl"
    argv = ["reward", "score", "--dataset", MINI, "--completions", str(comps)]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2), "--workers", "4"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    _, rows = read_jsonl(out1)
    assert len(rows) == 20
    assert all(r["total"] == pytest.approx(3.8) for r in rows)


def test_reward_score_unknown_image_exits_one(tmp_path, mini_dataset):
    comps = tmp_path / "comps.jsonl"
    comps.write_text(json.dumps({"image_id": "ghost", "completion": "x"}) + "\n")
    out = tmp_path / "scores.jsonl"
    code = main(
        ["reward", "score", "--dataset", MINI, "--completions", str(comps), "--out", str(out)]
    )
    assert code == 1
    _, rows = read_jsonl(out)
    assert rows[0]["error"] == "unknown image_id"


def test_missing_dataset_exits_two_and_names_path(tmp_path, capsys):
    code = main(
        ["prompts", "build", "--dataset", "/nope/missing.json", "--out", str(tmp_path / "o")]
    )
    assert code == 2
    assert "/nope/missing.json" in capsys.readouterr().err


def test_weight_override_changes_scores(tmp_path, mini_dataset):
    comps = tmp_path / "comps.jsonl"
    echo_completions(mini_dataset, comps)
    out = tmp_path / "scores.jsonl"
    argv = [
        "reward", "score", "--dataset", MINI, "--completions", str(comps),
        "--out", str(out), "--weights", "w_tag=0.0",
    ]
    assert main(argv) == 0
    header, rows = read_jsonl(out)
    assert header["config"]["weights"]["w_tag"] == 0.0
    assert all(r["total"] == pytest.approx(3.6) for r in rows)


def test_eval_map_full_pipeline_scores_echo_at_hundred(tmp_path, mini_dataset):
    comps = tmp_path / "comps.jsonl"
    echo_completions(mini_dataset, comps)
    out = tmp_path / "map.jsonl"
    code = main(
        [
            "eval", "map", "--dataset", MINI, "--predictions", str(comps),
            "--train-dataset", MINI, "--out", str(out),
        ]
    )
    assert code == 0
    _, rows = read_jsonl(out)
    cells = rows[0]["cells"]
    assert all(v == pytest.approx(100.0) for v in cells.values())


def test_eval_map_table_format(tmp_path, mini_dataset):
    comps = tmp_path / "comps.jsonl"
    echo_completions(mini_dataset, comps)
    out = tmp_path / "map.txt"
    code = main(
        [
            "eval", "map", "--dataset", MINI, "--predictions", str(comps),
            "--train-dataset", MINI, "--out", str(out), "--format", "table",
        ]
    )
    assert code == 0
    text = out.read_text()
    assert "Default" in text and "Known Object" in text


def test_simulate_then_score_round_trip(tmp_path):
    sims = tmp_path / "sims.jsonl"
    argv = [
        "simulate", "--dataset", MINI, "--noise-level", "0.2", "--seed", "9",
        "--samples-per-image", "2", "--out", str(sims),
    ]
    assert main(argv) == 0
    header, rows = read_jsonl(sims)
    assert header["noise"]["seed"] == 9
    assert len(rows) == 40

    again = tmp_path / "sims2.jsonl"
    assert main(argv[:-1] + [str(again)]) == 0
    assert sims.read_bytes() == again.read_bytes()

    scores = tmp_path / "scores.jsonl"
    code = main(
        ["reward", "score", "--dataset", MINI, "--completions", str(sims), "--out", str(scores)]
    )
    assert code == 0
    _, srows = read_jsonl(scores)
    assert len(srows) == 40
    assert all(0.0 <= r["total"] <= 3.8 for r in srows)


def test_grpo_advantages_known_values(tmp_path):
    inp = tmp_path / "groups.jsonl"
    inp.write_text(
        json.dumps({"group_id": "g1", "rewards": [0.0, 1.0]}) + "\n"
        + json.dumps({"group_id": "g2", "rewards": [2.0, 2.0, 2.0]}) + "\n"
    )
    out = tmp_path / "adv.jsonl"
    assert main(["grpo", "advantages", "--in", str(inp), "--out", str(out)]) == 0
    _, rows = read_jsonl(out)
    assert rows[0]["advantages"] == pytest.approx([-1.0, 1.0])
    assert rows[1]["advantages"] == [0.0, 0.0, 0.0]


def test_grpo_advantages_bad_group_exits_one(tmp_path):
    inp = tmp_path / "groups.jsonl"
    inp.write_text(json.dumps({"group_id": "tiny", "rewards": [1.0]}) + "\n")
    out = tmp_path / "adv.jsonl"
    assert main(["grpo", "advantages", "--in", str(inp), "--out", str(out)]) == 1
    _, rows = read_jsonl(out)
    assert "error" in rows[0]


def test_sft_assemble(tmp_path, mini_dataset):
    traces = tmp_path / "traces.jsonl"
    with open(traces, "w") as fh:
        for img in mini_dataset.images[:15]:
            fh.write(json.dumps({"image_id": img.image_id, "think": "because"}) + "\n")
    out = tmp_path / "sft.jsonl"
    code = main(["sft", "assemble", "--dataset", MINI, "--traces", str(traces), "--out", str(out)])
    assert code == 0
    _, rows = read_jsonl(out)
    assert len(rows) == 15
    assert all(row["think"] == "because" for row in rows)
    assert all("<VALID INTERACTIONS>" in row["prompt"] for row in rows)


def test_sft_fetch_without_endpoint_exits_two(tmp_path, capsys):
    code = main(["sft", "fetch", "--dataset", MINI, "--out", str(tmp_path / "t.jsonl")])
    assert code == 2
    assert "endpoint" in capsys.readouterr().err
