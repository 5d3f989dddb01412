from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from povar.cli import git_blob_hash, main
from povar.config import ConfigError, configs_equal, dump_config, load_config, parse_config
from povar.covariance import estimate_pair
from povar.estimator import tune_lambda
from povar.simulate import simulate

BASE = """# demo configuration
[model]
seed = 4
D = 3
T = 400
s = 2
omega2 = 0.01   ; noise variance
p = 0.6
a = 0.3
b = 0.2
"""


def write(tmp_path, text, name="cfg.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_round_trip_identity():
    text = BASE + """
[estimate]
method = dantzig
target_s = 2

[sweep]
parameter = p_b_heatmap
grid = 0.5:0.2, 0.6:0.4
replications = 3
series_h0 = 0
"""
    rc = parse_config(text)
    again = parse_config(dump_config(rc))
    assert configs_equal(rc, again)
    assert dump_config(again) == dump_config(rc)


def test_explicit_theta_and_sigma():
    rc = parse_config("[model]\nseed=1\nD=2\nT=10\n[theta]\nrow0 = 0.5, 0\nrow1 = 0.1, 0.2\n"
                      "[Sigma]\nrow0 = 2, 0.5\nrow1 = 0.5, 1\n")
    np.testing.assert_array_equal(rc.model.theta.entries, [[0.5, 0], [0.1, 0.2]])
    np.testing.assert_array_equal(rc.model.Sigma, [[2, 0.5], [0.5, 1]])


@pytest.mark.parametrize("text,line,needle", [
    ("[model]\nD = 3\n", 1, "seed"),
    ("[model]\nseed = 1\nT = abc\n", 3, "T"),
    ("[model]\nseed = 1\nbogus = 2\n", 3, "unknown key"),
    ("[model]\nseed = 1\np = 0.6\na = 0.3\nb = 0.3\n", 1, "chain not stationary"),
    ("[model]\nseed = 1\nD = 2\n[theta]\nrow0 = 1, 2, 3\nrow1 = 0, 0\n", 5, "expected 2"),
    ("[model]\nseed = 1\n[estimate]\nlambda = 0.1\ntarget_s = 2\n", 5, "not both"),
    ("[model]\nseed = 1\nseed = 2\n", 3, "seed"),
])
def test_line_anchored_errors(text, line, needle):
    with pytest.raises(ConfigError) as info:
        parse_config(text, "c.ini")
    msg = str(info.value)
    assert msg.startswith(f"c.ini:{line}:") and needle in msg


def test_simulate_command(tmp_path, capsys):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 400 * 3
    man = json.loads((tmp_path / "t.csv.manifest.json").read_text())
    assert man["outputs"] == [str(out)] and man["seed"] == 4
    assert man["inputs"][str(cfg)] == git_blob_hash(cfg.read_bytes())
    first = out.read_bytes()
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_bytes() == first


def test_noiseless_full_sampling_y_equals_x(tmp_path):
    cfg = write(tmp_path, "[model]\nseed = 2\nD = 2\nT = 50\nomega2 = 0\np = 1\n")
    out = tmp_path / "t.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert all(r["x"] == r["y"] for r in csv.DictReader(open(out)))


def test_estimate_command(tmp_path, capsys):
    cfg = write(tmp_path, BASE.replace("T = 400", "T = 5000"))
    out = tmp_path / "est"
    assert main(["estimate", "--config", str(cfg), "--out", str(out), "--method", "both",
                 "--target-s", "2"]) == 0
    text = capsys.readouterr().out
    kv = dict(line.split(" = ") for line in text.strip().splitlines())
    rc = load_config(cfg)
    g0, g1 = estimate_pair(simulate(rc.model), rc.model)
    lam, _ = tune_lambda(g0.gamma_hat, g1.gamma_hat, 2)
    assert float(kv["dantzig.lambda"]) == lam
    assert float(kv["dense.error_linf_op"]) < 0.5
    assert (out / "theta_hat_dense.csv").exists() and (out / "manifest.json").exists()


def test_estimate_large_lambda_zero(tmp_path, capsys):
    cfg = write(tmp_path, BASE)
    out = tmp_path / "est"
    assert main(["estimate", "--config", str(cfg), "--out", str(out), "--method", "dantzig",
                 "--lambda", "1e6"]) == 0
    M = np.loadtxt(out / "theta_hat_dantzig.csv", delimiter=",")
    assert np.all(M == 0)


def test_sweep_bounds_klcheck(tmp_path, capsys):
    cfg = write(tmp_path, BASE + "[sweep]\nparameter = T\ngrid = 300, 600\nreplications = 2\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "sw"), "--plot"]) == 0
    err = capsys.readouterr().err
    assert "slope[dense]" in err
    assert (tmp_path / "sw" / "panel_a.svg").exists()
    man = json.loads((tmp_path / "sw" / "manifest.json").read_text())
    assert len(man["outputs"]) == len(set(man["outputs"])) == 4

    assert main(["bounds", "--config", str(cfg), "--out", str(tmp_path / "b.csv")]) == 0
    assert "gamma_u = " in capsys.readouterr().out

    kl = write(tmp_path, "[model]\nseed = 1\nD = 2\nT = 5\n[theta]\nrow0 = 0, 0\nrow1 = 0, 0\n", "k.ini")
    assert main(["klcheck", "--config", str(kl)]) == 0
    assert "exact ≤ bound: PASS" in capsys.readouterr().out
    assert main(["klcheck", "--config", str(cfg)]) == 1
    assert "verification cap" in capsys.readouterr().err
    small = write(tmp_path, BASE.replace("T = 400", "T = 8"), "small.ini")
    assert main(["klcheck", "--config", str(small)]) == 0


def test_bad_inputs_exit_nonzero(tmp_path, capsys):
    bad = write(tmp_path, "[model]\nD = 2\n")
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "cfg.ini:1" in capsys.readouterr().err
    assert main(["simulate", "--config", str(tmp_path / "missing.ini")]) == 2
    with pytest.raises(SystemExit):
        main(["estimate", "--config", str(bad), "--lambda", "1", "--target-s", "2"])


def test_seed_override(tmp_path):
    cfg = write(tmp_path, BASE)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["simulate", "--config", str(cfg), "--out", str(a), "--seed", "9"])
    main(["simulate", "--config", str(cfg), "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()
