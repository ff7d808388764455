import os

import pandas as pd
import pytest

from offpolicy.main import EXIT_ERROR, EXIT_OK, EXIT_SETTINGS_ERROR, build_parser, load_settings, main

RUN_FLAGS = ["--problem", "collision", "--runs", "2", "--steps", "200", "--eval-every", "20", "--workers", "1"]


def test_parser_accepts_aliases():
    args = build_parser().parse_args(["run", "--algo", "td", "--seed", "4", "--debug"])
    settings = load_settings(args)
    assert settings["algorithm"] == "td"
    assert settings["base-seed"] == 4
    assert settings["debug-logs"] is True


def test_flags_override_the_settings_file(tmp_path):
    path = tmp_path / "settings.yaml"
    path.write_text("problem: fourrooms\nalgorithm: gtd\nruns: 7\n")
    args = build_parser().parse_args(["sweep", "--config", str(path), "--runs", "3"])
    settings = load_settings(args)
    assert settings["problem"] == "fourrooms"
    assert settings.runs == 3


def test_run_report_and_plotdata(tmp_path):
    out = str(tmp_path)
    assert main(["run", "--algorithm", "td", "--alpha", "2^-6", "--output", out] + RUN_FLAGS) == EXIT_OK
    series = pd.read_csv(os.path.join(out, "results.csv"))
    assert len(series) == 20
    assert set(series["run"]) == {0, 1}

    assert main(["report", "--results", out, "--criterion", "auc"]) == EXIT_OK
    ranking = pd.read_csv(os.path.join(out, "ranking-auc.csv"))
    assert ranking["rank"].tolist() == [1]
    assert os.path.exists(os.path.join(out, "sensitivity.csv"))

    for kind in ("learning_curve", "stepsize", "sensitivity"):
        assert main(["plotdata", "--results", out, "--kind", kind]) == EXIT_OK
        assert os.path.exists(os.path.join(out, f"{kind}.csv"))
    curve = pd.read_csv(os.path.join(out, "learning_curve.csv"))
    assert curve["step"].tolist() == list(range(20, 201, 20))


def test_sweep(tmp_path):
    out = str(tmp_path)
    flags = ["--algorithms", "td,etd,lstd", "--alphas", "0.1,0.01", "--lambdas", "0.9", "--output", out]
    assert main(["sweep"] + flags + RUN_FLAGS) == EXIT_OK
    summary = pd.read_json(os.path.join(out, "summary.json"))
    assert len(summary) == 5
    assert os.path.exists(os.path.join(out, "settings.yaml"))


def test_oracle(tmp_path):
    out = str(tmp_path)
    flags = ["--problem", "collision", "--features", "tabular", "--lambdas", "0,0.9", "--output", out]
    assert main(["oracle", "--objectives"] + flags) == EXIT_OK
    truth = pd.read_csv(os.path.join(out, "truth-collision.csv"))
    assert truth["v_true"].tolist() == pytest.approx([0.9 ** (7 - s) for s in range(8)])
    objectives = pd.read_csv(os.path.join(out, "objectives-collision.csv"))
    assert len(objectives) == 4
    fixed = objectives[objectives["weights"] == "fixed-point"]
    assert (fixed["mspbe"] < 1e-10).all()
    assert (objectives[objectives["weights"] == "zero"]["neu"] > 0).all()


@pytest.mark.parametrize("argv", [
    ["run", "--problem", "nowhere"],
    ["run", "--problem", "collision", "--alpha", "fast"],
    ["run", "--problem", "collision"],
    ["sweep", "--colour", "blue"],
])
def test_settings_errors(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as e:
        code = e.code
    assert code == EXIT_SETTINGS_ERROR


def test_runtime_errors(tmp_path, capsys):
    assert main(["report", "--results", str(tmp_path / "missing")]) == EXIT_ERROR
    assert "missing results file" in capsys.readouterr().err
    assert main(["run", "--problem", "fourrooms", "--algorithm", "altlife", "--alpha", "0.1",
                 "--output", str(tmp_path)]) == EXIT_ERROR


def test_a_command_is_required():
    with pytest.raises(SystemExit):
        main([])
