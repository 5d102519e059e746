import re

import numpy as np
import pytest

from pwppe.cli import build_parser, main
from pwppe.fileio import load_phase, load_selftest, read_meta
from pwppe.nn import load_weights

SMALL = """\
scene.width=64
scene.height=32
scene.period=16
scene.phase_plane=0.39269908169872414,0.01,0.2
scene.defocus_sigma=1.0,3.0
dataset.sample_fraction=0.2
train.iterations=40
variation.dim.background=0.25
variation.dim.modulation=0.2
"""

SUBCOMMANDS = ["synth", "truth", "build", "train", "solve", "eval", "repro", "config"]


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_documents_every_flag(name, capsys):
    with pytest.raises(SystemExit) as info:
        main([name, "--help"])
    assert info.value.code == 0
    text = capsys.readouterr().out
    sub = next(a for a in build_parser()._actions if a.dest == "command").choices[name]
    for action in sub._actions:
        for flag in action.option_strings:
            assert flag in text
        if action.option_strings and action.dest != "help":
            assert action.help, f"{name} {action.option_strings} lacks help text"


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as info:
        main(["synth", "--out", "x", "--bogus"])
    assert info.value.code == 2
    assert "unrecognized arguments" in capsys.readouterr().err


def test_config_overrides(tmp_path, capsys):
    cfg = tmp_path / "small.cfg"
    cfg.write_text(SMALL)
    assert main(["config", "--config", str(cfg), "--set", "scene.period=20"]) == 0
    out = capsys.readouterr().out
    assert "scene.width=64\n" in out and "scene.period=20.0\n" in out
    assert "variation.dim.background=0.25" in out


@pytest.mark.parametrize("text", ["scene.period=2\n", "train.optimizer=lbfgs\n", "nonsense\n",
                                  "scene.nope=1\n"])
def test_bad_config_exits_2(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    assert main(["config", "--config", str(cfg)]) == 2


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.cfg").write_text(SMALL)
    cfg = str(root / "small.cfg")
    assert main(["synth", "--config", cfg, "--out", str(root / "stack")]) == 0
    assert main(["truth", "--stack", str(root / "stack"), "--out", str(root / "truth.pmap")]) == 0
    assert main(["build", "--stack", str(root / "stack"), "--truth", str(root / "truth.pmap"),
                 "--fraction", "0.2", "--out", str(root / "data")]) == 0
    assert main(["train", "--config", cfg, "--dataset", str(root / "data" / "train.ds"),
                 "--no-figures", "--out", str(root / "model")]) == 0
    return root


def test_pipeline_artifacts(workdir):
    assert read_meta(workdir / "stack" / "stack.meta")["n_steps"] == "6"
    assert load_phase(workdir / "truth.pmap").shape == (32, 64)
    assert {p.name for p in (workdir / "data").iterdir()} >= {"train.ds", "test.ds", "holdout.mask.pgm"}
    net = load_weights(workdir / "model" / "weights.pwnn")
    assert net.layer_dims == (6, 12, 12, 12, 2)
    lines = (workdir / "model" / "loss.csv").read_text().splitlines()
    assert lines[0] == "iteration,mse" and len(lines) == 41


def test_solve_both_methods(workdir):
    out = workdir / "solved"
    assert main(["solve", "--stack", str(workdir / "stack"), "--weights",
                 str(workdir / "model" / "weights.pwnn"), "--out", str(out)]) == 0
    phase = load_phase(out / "phase.pmap")
    selftest = load_selftest(out / "selftest.pmap")
    assert phase.shape == selftest.values.shape == (32, 64)
    assert main(["solve", "--method", "pwls", "--stack", str(workdir / "stack"),
                 "--out", str(workdir / "solved_ls")]) == 0
    assert np.all(np.abs(load_phase(workdir / "solved_ls" / "phase.pmap").values) <= np.pi)


def test_solve_pwppe_needs_weights(workdir):
    assert main(["solve", "--stack", str(workdir / "stack"), "--out", str(workdir / "x")]) == 2


def test_solve_mismatched_steps_exits_3(workdir, tmp_path):
    cfg = tmp_path / "four.cfg"
    cfg.write_text(SMALL + "scene.n_steps=4\n")
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "four")]) == 0
    code = main(["solve", "--stack", str(tmp_path / "four"), "--weights",
                 str(workdir / "model" / "weights.pwnn"), "--out", str(tmp_path / "o")])
    assert code == 3


def test_missing_input_exits_5(tmp_path):
    assert main(["truth", "--stack", str(tmp_path / "absent"), "--out", str(tmp_path / "t.pmap")]) == 5


def test_eval_writes_report(workdir):
    out = workdir / "report"
    assert main(["eval", "--config", str(workdir / "small.cfg"), "--stack", str(workdir / "stack"),
                 "--truth", str(workdir / "truth.pmap"), "--weights",
                 str(workdir / "model" / "weights.pwnn"), "--holdout",
                 str(workdir / "data" / "holdout.mask.pgm"), "--sweep", "--no-figures",
                 "--out", str(out)]) == 0
    table = (out / "table1.csv").read_text().splitlines()
    assert [re.split(",", r)[0] for r in table[1:]] == ["trained", "trained", "dim", "dim"]
    for name in ("table2.csv", "row_profile.csv", "error_map_pwls.pgm", "error_map_pwppe.pgm"):
        assert (out / name).exists()
