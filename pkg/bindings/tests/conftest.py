from pathlib import Path

import pytest

from hoikit_bindings import load_session

FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"
MINI = FIXTURES / "mini_dataset.json"

# The parity guarantee holds only if every one of these passes.
PARITY_TESTS = (
    "test_score_batch_matches_cli_bytes",
    "test_group_advantages_values_and_cli_parity",
    "test_evaluate_map_echo_and_cli_parity",
    "test_explicit_rare_set_matches_cli_flag",
    "test_rl_loop_stub_runs_without_subprocesses",
)
PARITY_LABEL = (
    "Bindings parity: score_batch / group_advantages / evaluate_map bit-identical "
    "to the CLI; 64-sample RL stub runs in-process"
)


@pytest.fixture(scope="session")
def config_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "session.toml"
    path.write_text(f'[dataset]\npath = "{MINI}"\n')
    return path


@pytest.fixture(scope="session")
def session(config_path):
    return load_session(config_path)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            if getattr(report, "when", "call") != "call" and status != "error":
                continue
            name = report.location[2].split("[")[0]
            if name in PARITY_TESTS:
                outcomes[name] = status == "passed"
    if not outcomes:
        return
    verdict = "PASS" if all(outcomes.values()) and len(outcomes) == len(PARITY_TESTS) else "FAIL"
    terminalreporter.section("bindings criteria")
    terminalreporter.write_line(f"[{verdict}] {PARITY_LABEL}")
