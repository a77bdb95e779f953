import json

import numpy as np
import pytest

from reconstab import data as datamod
from reconstab.cli import main


SWEEP_CONFIG = {
    "model": "rf",
    "k": 60,
    "d_x": 8,
    "d_y": 8,
    "activation": "h1+h2",
    "n_grid": [6, 12],
    "trials": 2,
    "master_seed": 3,
    "test_size": 40,
    "gamma_trials": 3,
}


def test_hermite_table(capsys):
    assert main(["hermite", "--activation", "relu", "--order", "6"]) == 0
    out = capsys.readouterr().out
    lines = out.strip().splitlines()
    assert lines[1] == "l mu_l"
    assert len(lines) == 2 + 7
    first = lines[2].split()
    assert first[0] == "0"
    assert abs(float(first[1]) - 1.0 / np.sqrt(2 * np.pi)) < 1e-6


def test_gamma_row(capsys):
    code = main([
        "gamma", "--model", "ntk", "--activation", "h0+h1",
        "--k", "16", "--dx", "24", "--dy", "24", "--n", "60",
        "--trials", "5", "--seed", "1",
    ])
    assert code == 0
    out = capsys.readouterr().out
    assert "model=ntk" in out and "alpha=0.5" in out and "verdict=" in out


def test_fit_and_attack(capsys):
    args = ["--k", "60", "--dx", "8", "--dy", "8", "--n", "12",
            "--activation", "h1+h2", "--seed", "2", "--test-size", "40"]
    assert main(["fit", *args]) == 0
    assert "test_acc=" in capsys.readouterr().out
    assert main(["attack", *args, "--mask", "zero"]) == 0
    out = capsys.readouterr().out
    assert "attack_acc=" in out and "readout=sign" in out


def test_sweep_writes_csv(tmp_path, capsys):
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(SWEEP_CONFIG))
    out_path = tmp_path / "rows.csv"
    assert main(["sweep", "--config", str(config_path), "--out", str(out_path)]) == 0
    text = out_path.read_text()
    assert text.startswith("model,n,alpha,activation,trial,seed,")
    assert text.count("\r\n") == 1 + 4


def test_sweep_bad_config_exits_2(tmp_path):
    config_path = tmp_path / "bad.json"
    config_path.write_text(json.dumps(dict(SWEEP_CONFIG, bogus=1)))
    assert main(["sweep", "--config", str(config_path)]) == 2


def test_unknown_activation_exits_1():
    assert main(["hermite", "--activation", "not-a-thing"]) == 1


def test_gen_data_round_trip(tmp_path):
    out = tmp_path / "ds"
    assert main(["gen-data", "--n", "9", "--dx", "4", "--dy", "3",
                 "--seed", "5", "--out", str(out)]) == 0
    z = datamod.load_matrix(str(out) + ".z.glma")
    g = datamod.load_matrix(str(out) + ".g.glma")
    meta = datamod.read_metadata(str(out) + ".meta")
    assert z.shape == (9, 7)
    assert set(np.unique(g)) <= {-1.0, 1.0}
    assert meta["n"] == "9" and meta["d_x"] == "4" and meta["label_mode"] == "sign"


def test_eigs_reports_scaled_eigenvalue(capsys):
    assert main(["eigs", "--model", "rf", "--k", "60", "--dx", "8", "--dy", "8",
                 "--n", "10", "--activation", "h1+h2", "--seed", "4"]) == 0
    out = capsys.readouterr().out
    assert "lambda_min_over_scale=" in out
    value = float(out.split("lambda_min=")[1].split()[0])
    assert value > 0


def test_verify_quick_exits_zero(capsys):
    assert main(["verify", "--level", "quick"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out and "FAIL" not in out
