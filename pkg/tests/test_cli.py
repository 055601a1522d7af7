"""End-to-end checks of the click command group."""

import csv
import io
import json
from fractions import Fraction
from pathlib import Path

import pytest
from click.testing import CliRunner

from app import __version__
from app.cli import main

DEMO_LEVEL = Path(__file__).resolve().parent.parent / "configs" / "demo_level.txt"
CSV_HEADER = "depth,prefix,lower,upper,predicted,lower_decimal,upper_decimal,predicted_decimal,status"


@pytest.fixture
def runner():
    return CliRunner()


def invoke(runner, config_file, *args):
    return runner.invoke(main, ["--config", str(config_file), *args])


def rows(output):
    return list(csv.DictReader(io.StringIO(output)))


def leading_json(output):
    """The JSON document a command printed, ignoring an error line that may follow it"""
    value, _ = json.JSONDecoder().raw_decode(output)
    return value


def test_eval_p(runner, config_file):
    result = invoke(runner, config_file, "eval-p", "0/1", "1/4", "00")
    assert result.exit_code == 0
    assert result.output.splitlines() == ["1/4", "0.250000000000"]


def test_eval_p_whole_space(runner, config_file):
    result = invoke(runner, config_file, "eval-p", "0/1 1/1")
    assert result.exit_code == 0
    assert result.output.splitlines()[0] == "1"


def test_eval_p_non_dyadic(runner, config_file):
    result = invoke(runner, config_file, "eval-p", "1/3 1/2 0")
    assert result.exit_code == 2
    assert "non-dyadic endpoint" in result.output


def test_eval_p_past_the_last_alpha_is_a_usage_error(runner, config_file):
    # the configured list has five terms, a cylinder of length 6 needs alpha_6
    result = invoke(runner, config_file, "eval-p", "0", "1", "000000")
    assert result.exit_code == 2
    assert "GeneratorExhausted" in result.output


def test_version(runner):
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert result.output.strip() == f"Cantorlab, version {__version__}"


def test_eval_phat(runner, config_file):
    result = invoke(runner, config_file, "eval-phat", "2")
    assert result.exit_code == 0
    assert result.output.splitlines()[0].startswith("raw 1/4 ")
    assert result.output.splitlines()[1].startswith("normalized 1/8 ")


def test_converge_vlf_identity(runner, config_file):
    result = invoke(runner, config_file, "converge", "--prefix", "1", "--tail", "none", "--depths", "1")
    assert result.exit_code == 0
    (row,) = rows(result.output)
    assert row["lower"] == row["upper"] == row["predicted"] == "2/3"

    result = invoke(runner, config_file, "converge", "--prefix", "1", "--depths", "1,2,3,4")
    assert result.exit_code == 0
    assert all(r["lower"] == r["predicted"] for r in rows(result.output))


def test_converge_empty_depths(runner, config_file):
    result = invoke(runner, config_file, "converge", "--depths", "")
    assert result.exit_code == 0
    assert result.output == CSV_HEADER + "\n"


def test_converge_rejects_decreasing_depths(runner, config_file):
    result = invoke(runner, config_file, "converge", "--depths", "3,2")
    assert result.exit_code == 2


def test_converge_ce(runner, config_file):
    depths = ",".join(str(d) for d in range(1, 33))
    result = invoke(runner, config_file, "converge", "--mode", "ce", "--index", "2", "--prefix", "-", "--depths", depths)
    assert result.exit_code == 0
    table = rows(result.output)
    assert len(table) == 32
    assert all(r["predicted"] == "4/19" for r in table)
    widths = [Fraction(r["upper"]) - Fraction(r["lower"]) for r in table]
    assert all(a > b for a, b in zip(widths[4:], widths[5:]))
    assert widths[-1] < Fraction(1, 1 << 20)


def test_converge_is_deterministic(runner, config_file, tmp_path):
    args = ["converge", "--mode", "ce", "--sample-seed", "4", "--depths", "2,4,8,16"]
    first = invoke(runner, config_file, *args)
    second = invoke(runner, config_file, *args)
    assert first.exit_code == second.exit_code == 0
    assert first.output == second.output

    target = tmp_path / "trace.csv"
    written = invoke(runner, config_file, *args, "--csv", str(target))
    assert written.exit_code == 0
    assert target.read_text() == first.output


def test_trim_demo(runner, config_file):
    result = invoke(runner, config_file, "trim-demo", str(DEMO_LEVEL))
    assert result.exit_code == 0
    assert result.output.splitlines()[-1] == "ALL CHECKS PASS"


def test_trim_demo_with_probes(runner, config_file):
    result = invoke(runner, config_file, "trim-demo", str(DEMO_LEVEL), "--probe", "1/2", "--probe", "1/8")
    assert result.exit_code == 0
    assert "left of breakpoint" in result.output


def test_trim_demo_corrupted_file(runner, config_file, tmp_path):
    level = tmp_path / "bad.txt"
    level.write_text("0 1/2 1\n0 1/2 1x\n")
    result = invoke(runner, config_file, "trim-demo", str(level))
    assert result.exit_code == 2
    assert "line 2" in result.output


def test_decode(runner, config_file):
    result = invoke(runner, config_file, "decode")
    assert result.exit_code == 0
    lines = result.output.splitlines()
    assert len(lines) == 6
    decoded = [line.split()[1] for line in lines[1:]]
    truth = [line.split()[2] for line in lines[1:]]
    assert decoded == truth == ["false", "true", "false", "false", "false"]


def test_decode_empty_instance(runner, tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("ce:\n  members: []\n  nonmember: 0\n  horizon: 3\n")
    result = invoke(runner, path, "decode", "--prefix", "0110")
    assert result.exit_code == 0
    assert [line.split()[1] for line in result.output.splitlines()[1:]] == ["false"] * 4


def test_decode_batch(runner, config_file):
    result = invoke(runner, config_file, "decode", "--batch", "3", "--prefixes", "2", "--seed", "5")
    assert result.exit_code == 0
    summary = leading_json(result.output)
    assert summary["instances"] == 3
    assert summary["mismatches"] == 0 and summary["exhausted"] == 0


def test_sample(runner, config_file):
    first = invoke(runner, config_file, "sample", "--seed", "10", "--count", "3", "--depth", "12")
    second = invoke(runner, config_file, "sample", "--seed", "10", "--count", "3", "--depth", "12")
    assert first.exit_code == 0
    assert first.output == second.output
    lines = first.output.splitlines()
    assert [line.split()[0] for line in lines] == ["10", "11", "12"]
    assert all(len(line.split()[1]) == 12 for line in lines)


def test_selftest_passes(runner, config_file):
    result = invoke(runner, config_file, "selftest", "--workers", "2")
    assert result.exit_code == 0, result.output
    summary = leading_json(result.output)
    assert summary["passed"]
    assert [s["name"] for s in summary["suites"]] == [
        "dyadic-core", "alpha-gen", "vlf-measure", "test-trimmer", "ce-density",
        "continuity", "differentiation", "sampler", "certification", "decoder",
    ]


def test_selftest_reports_non_monotone_alpha(runner, tmp_path):
    path = tmp_path / "bad_alpha.yaml"
    path.write_text('alpha:\n  kind: explicit-list\n  values: ["1/2", "1/4"]\nexperiment:\n  trials: 5\n  samples: 200\n  decode_batch: 0\n')
    result = invoke(runner, path, "selftest")
    assert result.exit_code == 1
    assert "CheckFailure: suites failed: alpha-gen" in result.output
    summary = leading_json(result.output)
    suite = next(s for s in summary["suites"] if s["name"] == "alpha-gen")
    assert suite["status"] == "FAIL"
    assert "MonotonicityViolation" in suite["error"]


def test_selftest_rejects_invalid_config(runner, tmp_path):
    path = tmp_path / "bad_ce.yaml"
    path.write_text("ce:\n  members:\n    - {n: 0, t: 1}\n  nonmember: 0\n")
    result = invoke(runner, path, "selftest")
    assert result.exit_code == 2
    assert "ConfigError" in result.output


def test_missing_config_file(runner, tmp_path):
    result = invoke(runner, tmp_path / "nope.yaml", "eval-p", "0 1")
    assert result.exit_code == 2
