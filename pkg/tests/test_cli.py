import csv

import pytest

from hosnn.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from hosnn.config import RunConfig, load_config, parse_config
from hosnn.errors import ConfigError


def test_config_parse_and_reject_unknown(tmp_path):
    path = tmp_path / "run.conf"
    path.write_text("# comment\nseed = 3\ntrain.lr=1e-3  # inline\nnet.hidden = 8, 4\n\n")
    cfg = load_config(path, {"attack.eps_255": "16"})
    assert cfg["seed"] == 3 and cfg["train.lr"] == 1e-3 and cfg["net.hidden"] == (8, 4) and cfg["attack.eps_255"] == 16
    with pytest.raises(ConfigError):
        parse_config("bogus = 1")
    with pytest.raises(ConfigError):
        parse_config("seed 1")
    with pytest.raises(ConfigError):
        load_config(None, {"seed": "one"})
    with pytest.raises(ConfigError):
        RunConfig()["nope"]


def test_resolved_config_round_trip(tmp_path):
    cfg = load_config(None, {"train.epochs": "7", "attack.random_start": "false", "eval.eps_grid": "0,4"})
    cfg.write(tmp_path / "r.txt")
    back = load_config(tmp_path / "r.txt")
    assert back.as_dict() == cfg.as_dict()


def test_out_dir_env(monkeypatch):
    monkeypatch.setenv("HOSNN_OUT_DIR", "/somewhere")
    assert RunConfig()["out_dir"] == "/somewhere"


def test_help_and_errors(tmp_path, capsys):
    assert main(["--help"]) == EXIT_OK
    assert "usage" in capsys.readouterr().out
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["train", "--out-dir", str(tmp_path), "--set", "bogus=1"]) == EXIT_CONFIG
    assert main(["attack", "--out-dir", str(tmp_path), "--checkpoint", str(tmp_path / "missing.json")]) == EXIT_IO
    assert main(["extract-nds", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numeric_failure_exit_code(tmp_path):
    argv = ["stability-sim", "--out-dir", str(tmp_path), "--set", "stability.sigma=1e308",
            "--set", "stability.n_trials=5", "--set", "stability.band_trials=5", "--set", "stability.dt_sim=1e-2"]
    assert main(argv) == EXIT_NUMERIC


def run_pipeline(root):
    common = ["--set", "blobs.n_per_class=60", "--set", "net.hidden=16", "--set", "train.lr=2e-2"]
    steps = [
        ["train", "--out-dir", f"{root}/lif", "--epochs", "20", *common],
        ["extract-nds", "--out-dir", f"{root}/nds", "--checkpoint", f"{root}/lif/model.json", *common],
        ["train", "--out-dir", f"{root}/ho", "--epochs", "20", "--mode", "frozen", "--nds", f"{root}/nds/nds.json",
         "--set", "net.theta0=0.5", "--set", "train.adv_eps_255=8", *common],
        ["train", "--out-dir", f"{root}/sur", "--epochs", "20", "--seed", "5", *common],
        ["attack", "--out-dir", f"{root}/att", "--checkpoint", f"{root}/ho/model.json", "--nds", f"{root}/nds/nds.json", "--eps", "16", *common],
        ["evaluate", "--out-dir", f"{root}/ev", "--checkpoint", f"{root}/ho/model.json", "--nds", f"{root}/nds/nds.json",
         "--surrogate", f"{root}/sur/model.json", "--set", "eval.boxes=white,black", "--set", "eval.eps_grid=0,8,32", *common],
        ["obfuscation-check", "--out-dir", f"{root}/ob", "--checkpoint", f"{root}/ho/model.json", "--nds", f"{root}/nds/nds.json",
         "--surrogate", f"{root}/sur/model.json", "--set", "eval.eps_grid=0,8,64", *common],
        ["stability-sim", "--out-dir", f"{root}/st", "--theta", "1", "--set", "stability.n_trials=50",
         "--set", "stability.band_trials=50", "--set", "stability.dt_sim=1e-2", *common],
    ]
    for argv in steps:
        assert main(argv) == EXIT_OK, argv


ARTIFACTS = [
    "lif/model.json", "lif/metrics.csv", "nds/nds.json", "ho/model.json", "ho/metrics.csv", "att/attack.csv",
    "ev/sweep.csv", "ev/psc_error.csv", "ob/checklist.csv", "ob/sweep.csv", "st/stability.csv", "st/bands.csv",
]


def test_end_to_end_pipeline_is_reproducible(tmp_path):
    run_pipeline(tmp_path / "a")
    run_pipeline(tmp_path / "b")
    for rel in ARTIFACTS:
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel
    for d in ("lif", "nds", "ho", "att", "ev", "ob", "st"):
        assert (tmp_path / "a" / d / "resolved_config.txt").exists()
    resolved = load_config(tmp_path / "a" / "ho" / "resolved_config.txt")
    assert resolved["train.mode"] == "frozen" and resolved["train.adv_eps_255"] == 8
    with open(tmp_path / "a" / "att" / "attack.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 120 and all(float(r["linf"]) <= 16 / 255 + 1e-9 for r in rows)
