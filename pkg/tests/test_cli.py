import csv
import json
from fractions import Fraction

import pytest
import yaml

from autolab.cli import ExperimentConfig, build_parser, config_from_args, main, run_experiment
from autolab.errors import ConfigError
from autolab.report import CSV_COLUMNS, CheckRecord, ExperimentReport, decode_value, encode_value


def run(tmp_path, *argv, fmt="json"):
    out = tmp_path / f"out.{fmt}"
    code = main([*argv, "--out", str(out), "--format", fmt])
    return code, out


def test_certify_exit_zero_and_json(tmp_path):
    code, out = run(tmp_path, "certify", "--trials", "100", "--T", "4")
    assert code == 0
    data = json.loads(out.read_text())
    assert data["passed"] and data["kind"] == "certify"
    assert {"checks", "config", "tables", "runtime"} <= set(data)


def test_failed_check_gives_exit_one(tmp_path):
    # always-one is not polynomially bounded by the zero polynomial
    code, out = run(tmp_path, "timetable", "--candidate", "always-one", "--lengths", "4",
                    "--ds", "1", "--trials", "3", "--bound", "0")
    assert code == 1
    assert not json.loads(out.read_text())["passed"]


@pytest.mark.parametrize("argv", [
    ["certify", "--problem", "sat"],
    ["certify", "--trials", "0"],
    ["certify", "--candidate", "oracle"],
    ["certify", "--scale", "q=2"],
    ["verify-bounds", "--checks", "chernoff,bogus"],
])
def test_config_errors_exit_two(tmp_path, argv, capsys):
    code, _ = run(tmp_path, *argv)
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_config_error_lists_every_field():
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"n": 0, "d": -1, "bogus": 1})
    assert [f for f, _ in info.value.problems] == ["bogus"]
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict({"n": 0, "d": -1})
    assert {f for f, _ in info.value.problems} == {"n", "d"}


def test_yaml_config_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text(yaml.safe_dump({"trials": 7, "n": 6, "params": {"k": 12}}))
    args = build_parser().parse_args(["certify", "--config", str(cfg), "--n", "8", "--l", "20"])
    c = config_from_args(args)
    assert (c.trials, c.n) == (7, 8)
    assert c.params == {"k": 12, "l": 20}
    par = c.rule().resolve(8, 1)
    assert (par.d_prime, par.f, par.k, par.l) == (8, 9, 12, 20)


def test_parameter_modes():
    assert ExperimentConfig(exact_params=True).rule().resolve(65536, 1).k == 17035
    scaled = ExperimentConfig(scale={"k": "1/100"}).rule().resolve(65536, 1)
    assert scaled.k == 171 and scaled.l == 125999252


def test_amplify_m_flag_sets_copies():
    args = build_parser().parse_args(["amplify", "--m", "24"])
    c = config_from_args(args)
    assert c.m == 24 and "m" not in c.params


def test_report_deterministic_without_runtime():
    cfg = dict(kind="certify", trials=60, T=3, seed=11)
    a = run_experiment(ExperimentConfig.from_dict(cfg)).to_json(runtime=False)
    b = run_experiment(ExperimentConfig.from_dict(cfg)).to_json(runtime=False)
    assert a == b
    c = run_experiment(ExperimentConfig.from_dict({**cfg, "seed": 12})).to_json(runtime=False)
    assert c != a


def test_json_round_trip_and_report_subcommand(tmp_path):
    code, out = run(tmp_path, "verify-bounds", "--checks", "chain,amplify")
    assert code == 0
    rep = ExperimentReport.from_json(out.read_text())
    assert rep.passed and ExperimentReport.from_json(rep.to_json()).to_dict() == rep.to_dict()
    code2 = main(["report", str(out), "--out", str(tmp_path / "again.json")])
    assert code2 == 0
    again = json.loads((tmp_path / "again.json").read_text())
    assert again["checks"] == json.loads(out.read_text())["checks"]


def test_csv_output_headers(tmp_path):
    code, out = run(tmp_path, "amplify", "--x", "0111", "--candidate", "coin-liar:eps=1/4",
                    "--m", "8", "--trials", "50", fmt="csv")
    assert code == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == CSV_COLUMNS and len(rows) > 1
    curve = tmp_path / "out.error_curve.csv"
    assert next(csv.reader(curve.open())) == ["m", "eps_x", "exact_error", "bound"]


def test_empty_report_csv():
    rep = ExperimentReport("certify", {})
    assert rep.passed
    assert rep.checks_csv().strip() == ",".join(CSV_COLUMNS)
    rep.tables["empty"] = []
    assert rep.table_csv("empty").strip() == ""


def test_value_encoding():
    for v in (Fraction(3, 7), Fraction(-1, 2), float("inf"), 5, "x"):
        assert decode_value(encode_value(v)) == v
    rec = CheckRecord("big", True, exact=Fraction(1, 3**3000))
    assert isinstance(rec.exact, float)
