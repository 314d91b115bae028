import json
import math

import pytest

from microgrid_auction.cli import TRACE_HEADER, main


def run_cli(capsys, argv):
    code = main(argv)
    return code, capsys.readouterr().out


def test_clear_json_golden(capsys):
    code, out = run_cli(
        capsys, ["clear", "--bids", "1,2", "--asks", "0.3,0.5", "--avails", "2,3"]
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["mu"] == pytest.approx(0.6)
    assert doc["d"] == pytest.approx([5 / 3, 10 / 3])
    assert doc["s"] == pytest.approx([2.0, 3.0])
    assert doc["no_trade"] is False
    assert doc["kkt_residual"] <= 1e-7


def test_clear_csv_format(capsys):
    code, out = run_cli(
        capsys,
        [
            "clear",
            "--bids",
            "1,2",
            "--asks",
            "0.3,0.5",
            "--avails",
            "2,3",
            "--format",
            "csv",
        ],
    )
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "agent_kind,agent_id,quote,alloc"
    assert len(lines) == 5
    assert lines[1].startswith("buyer,0,")
    assert lines[3].startswith("seller,0,")


def test_clear_strict_no_trade_exit(capsys):
    argv = ["clear", "--bids", "0", "--asks", "0.2", "--avails", "1"]
    code, _ = run_cli(capsys, argv)
    assert code == 0
    code, _ = run_cli(capsys, argv + ["--strict"])
    assert code == 3


def test_clear_bad_inputs_exit_4(capsys):
    code, _ = run_cli(
        capsys, ["clear", "--bids", "1,abc", "--asks", "0.2", "--avails", "1"]
    )
    assert code == 4
    code, _ = run_cli(
        capsys, ["clear", "--bids", "1", "--asks", "0.2,0.3", "--avails", "1"]
    )
    assert code == 4


def test_auction_json_payload(capsys):
    code, out = run_cli(capsys, ["auction", "--seed", "1", "--buyers", "4", "--sellers", "3"])
    assert code == 0
    doc = json.loads(out)
    assert doc["converged"] is True
    for key in (
        "mu",
        "p",
        "bids",
        "asks",
        "avails",
        "d",
        "s",
        "budget_active",
        "kkt_residual",
        "unit_prices",
        "payoffs",
        "iterations",
    ):
        assert key in doc
    assert "redistribution" not in doc
    assert math.fsum(doc["d"]) == pytest.approx(math.fsum(doc["s"]), abs=1e-8)
    assert doc["payoffs"]["mc_revenue"] >= -1e-9


def test_auction_exit_codes(capsys):
    code, _ = run_cli(
        capsys,
        ["auction", "--seed", "1", "--buyers", "4", "--sellers", "3", "--max-iters", "1"],
    )
    assert code == 2
    code, _ = run_cli(capsys, ["auction", "--buyers", "0", "--sellers", "2", "--strict"])
    assert code == 3
    code, _ = run_cli(capsys, ["auction", "--buyers", "0", "--sellers", "2"])
    assert code == 0


def test_auction_trace_csv(capsys, tmp_path):
    trace_path = tmp_path / "trace.csv"
    code, out = run_cli(
        capsys,
        [
            "auction",
            "--seed",
            "2",
            "--buyers",
            "3",
            "--sellers",
            "2",
            "--trace-out",
            str(trace_path),
        ],
    )
    assert code == 0
    doc = json.loads(out)
    lines = trace_path.read_text().strip().split("\n")
    assert lines[0] == ",".join(TRACE_HEADER)
    assert len(lines) == 1 + doc["iterations"] * (3 + 2)
    first = lines[1].split(",")
    assert first[0] == "1"
    assert first[1] in ("buyer", "seller")


def test_scenario_gen_and_reuse_are_identical(capsys, tmp_path):
    scenario_path = tmp_path / "market.json"
    code, _ = run_cli(
        capsys,
        ["scenario", "gen", "--seed", "3", "--buyers", "4", "--sellers", "3", "--out", str(scenario_path)],
    )
    assert code == 0
    parsed = json.loads(scenario_path.read_text())
    assert len(parsed["buyers"]) == 4
    assert len(parsed["sellers"]) == 3

    code, from_file = run_cli(capsys, ["auction", "--scenario", str(scenario_path)])
    assert code == 0
    code, from_draw = run_cli(
        capsys, ["auction", "--seed", "3", "--buyers", "4", "--sellers", "3"]
    )
    assert code == 0
    assert from_file == from_draw


def test_redistribute_inline(capsys):
    code, out = run_cli(
        capsys, ["redistribute", "--seed", "4", "--buyers", "5", "--sellers", "4"]
    )
    assert code == 0
    doc = json.loads(out)
    red = doc["redistribution"]
    assert math.fsum(red["s_r"]) == pytest.approx(math.fsum(doc["s"]), abs=1e-9)
    assert red["kappa_F"] >= -1e-12
    for s_r_j, a_j in zip(red["s_r"], doc["avails"]):
        assert s_r_j <= a_j + 1e-9
        assert s_r_j == pytest.approx(min(a_j, red["K"]), abs=1e-9)


def test_redistribute_saved_outcome_chain(capsys, tmp_path):
    scenario_path = tmp_path / "market.json"
    outcome_path = tmp_path / "outcome.json"
    run_cli(
        capsys,
        ["scenario", "gen", "--seed", "5", "--buyers", "4", "--sellers", "3", "--out", str(scenario_path)],
    )
    code, _ = run_cli(
        capsys,
        ["auction", "--scenario", str(scenario_path), "--out", str(outcome_path)],
    )
    assert code == 0
    code, out = run_cli(
        capsys,
        [
            "redistribute",
            "--scenario",
            str(scenario_path),
            "--outcome",
            str(outcome_path),
        ],
    )
    assert code == 0
    saved = json.loads(outcome_path.read_text())
    doc = json.loads(out)
    assert doc["bids"] == saved["bids"]
    assert "redistribution" in doc

    # outcome paired with the wrong market size is a usage error
    code, _ = run_cli(capsys, ["redistribute", "--outcome", str(outcome_path)])
    assert code == 4
    outcome_path.write_text("{not json")
    code, _ = run_cli(
        capsys,
        ["redistribute", "--scenario", str(scenario_path), "--outcome", str(outcome_path)],
    )
    assert code == 4


def test_experiment_command(capsys):
    code, out = run_cli(capsys, ["experiment", "case"])
    assert code == 0
    doc = json.loads(out)
    assert doc["name"] == "case-study"
    assert len(doc["records"]) > 0
    code, _ = run_cli(capsys, ["experiment", "unknown-study"])
    assert code == 4


def test_help_and_usage_errors(capsys):
    assert main(["--help"]) == 0
    capsys.readouterr()
    assert main([]) == 4
    capsys.readouterr()
    assert main(["no-such-command"]) == 4
    capsys.readouterr()


def test_output_to_file(capsys, tmp_path):
    out_path = tmp_path / "result.json"
    code, stdout = run_cli(
        capsys,
        ["clear", "--bids", "1", "--asks", "0.2", "--avails", "2", "--out", str(out_path)],
    )
    assert code == 0
    assert stdout == ""
    doc = json.loads(out_path.read_text())
    assert doc["mu"] == pytest.approx(0.5)
