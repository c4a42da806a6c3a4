import json
import subprocess
import sys
import time

import numpy as np
import pytest

from cgshrink.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, config_hash, main, resolve_run_config
from cgshrink.data import synthetic_linear, synthetic_logistic, write_dataset_csv
from cgshrink.diagnostics import ChainTrace
from cgshrink.errors import ConfigError


@pytest.fixture
def dataset(tmp_path):
    ds, _ = synthetic_linear(60, 5, 2, seed=3)
    path = tmp_path / "data.csv"
    write_dataset_csv(path, ds)
    return path


def fit_args(data, out, *extra):
    return ["fit", "--data", str(data), "--out", str(out), "--warmup", "20", "--samples", "60",
            *extra]


def test_fit_writes_outputs(dataset, tmp_path, capsys):
    out = tmp_path / "run"
    assert main(fit_args(dataset, out, "--chains", "2", "--seed", "5", "--sampler", "cg")) == EXIT_OK
    assert "min ESS" in capsys.readouterr().out
    man = json.loads((out / "manifest.json").read_text())
    assert list(man) == sorted(man)
    assert man["config_hash"] == config_hash(man["config"])
    assert [c["stream"]["spawn_key"] for c in man["chains"]] == [[0], [1]]
    assert len(man["chains"][0]["cg_iterations_per_sweep"]) == 60
    tr = ChainTrace.from_csv(out / "chain_1.csv", out / "chain_1_timing.csv")
    assert tr.n_draws == 60 and "tau" in tr.names
    rep = json.loads((out / "ess_report.json").read_text())
    assert rep["n_draws"] == 120


def test_manifest_replay_identical(dataset, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(fit_args(dataset, a, "--chains", "2", "--seed", "9")) == EXIT_OK
    assert main(["fit", "--config", str(a / "manifest.json"), "--out", str(b)]) == EXIT_OK
    for i in range(2):
        assert (a / f"chain_{i}.csv").read_bytes() == (b / f"chain_{i}.csv").read_bytes()
    ma = json.loads((a / "manifest.json").read_text())
    mb = json.loads((b / "manifest.json").read_text())
    assert [c["trace_sha256"] for c in ma["chains"]] == [c["trace_sha256"] for c in mb["chains"]]


def test_config_file_and_flag_precedence(dataset, tmp_path):
    cfg = {"data": str(dataset), "out": str(tmp_path / "o"), "seed": 1, "chains": 3,
           "gibbs": {"samples": 10, "warmup": 5, "sampler": "direct"}}
    merged = resolve_run_config(cfg, {"seed": 4, "gibbs.sampler": "cg", "chains": None})
    assert merged["seed"] == 4 and merged["chains"] == 3
    assert merged["gibbs"] == {"samples": 10, "warmup": 5, "sampler": "cg"}
    with pytest.raises(ConfigError, match="unknown config keys: bogus"):
        resolve_run_config({**cfg, "bogus": 1}, {})
    with pytest.raises(ConfigError, match="unknown Gibbs settings"):
        resolve_run_config({**cfg, "gibbs": {"nope": 1}}, {})


def test_hmc_fit(dataset, tmp_path):
    out = tmp_path / "h"
    assert main(fit_args(dataset, out, "--algorithm", "hmc", "--step-size", "0.05", "--n-steps",
                         "10", "--mass", "adaptive")) == EXIT_OK
    entry = json.loads((out / "manifest.json").read_text())["chains"][0]
    assert 0 <= entry["acceptance_rate"] <= 1 and "divergences" in entry


def test_binomial_fit(tmp_path):
    ds, _ = synthetic_logistic(50, 3, 1, seed=1)
    write_dataset_csv(tmp_path / "b.csv", ds)
    assert main(fit_args(tmp_path / "b.csv", tmp_path / "o", "--family", "binomial")) == EXIT_OK


@pytest.mark.parametrize("argv, message", [
    (["fit", "--out", "x"], "no dataset"),
    (["fit", "--data", "nowhere.csv", "--out", "x"], "dataset not found"),
    (["fit", "--config", "missing.json"], "config file not found"),
])
def test_config_errors_exit_2(argv, message, capsys):
    assert main(argv) == EXIT_CONFIG
    assert message in capsys.readouterr().err


def test_missing_response_exit_2(dataset, tmp_path, capsys):
    assert main(fit_args(dataset, tmp_path / "o", "--response", "target")) == EXIT_CONFIG
    assert "available columns: x1, x2, x3, x4, x5, y" in capsys.readouterr().err


def test_bad_json_reports_position(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"seed": 1,\n "chains": }')
    assert main(["fit", "--config", str(tmp_path / "c.json")]) == EXIT_CONFIG
    assert "line 2" in capsys.readouterr().err


def test_numerical_failure_exit_3(tmp_path, capsys):
    (tmp_path / "info.csv").write_text("1,2\n2,1\n")
    (tmp_path / "u.csv").write_text("1\n1\n")
    argv = ["oracle", "score", "--information", str(tmp_path / "info.csv"), "--score",
            str(tmp_path / "u.csv")]
    assert main(argv) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_oracle_commands(dataset, tmp_path, capsys):
    assert main(["oracle", "ridge", "--data", str(dataset), "--penalty", "2"]) == EXIT_OK
    ridge = json.loads(capsys.readouterr().out)
    assert len(ridge["coef"]) == 5 and ridge["names"][0] == "x1"
    out = tmp_path / "bs.json"
    assert main(["oracle", "best-subset", "--data", str(dataset), "--k", "2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["support"] == [0, 1]
    capsys.readouterr()
    assert main(["oracle", "spike-slab", "--data", str(dataset)]) == EXIT_OK
    ss = json.loads(capsys.readouterr().out)
    assert ss["n_configs"] == 32 and ss["map_config"][:2] == [1, 1]
    (tmp_path / "info.csv").write_text("2,0\n0,4\n")
    (tmp_path / "u.csv").write_text("2\n2\n")
    assert main(["oracle", "score", "--information", str(tmp_path / "info.csv"), "--score",
                 str(tmp_path / "u.csv")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["statistic"] == pytest.approx(3.0)


def test_oracle_size_guard(tmp_path, capsys):
    ds, _ = synthetic_linear(30, 21, 2, seed=1)
    write_dataset_csv(tmp_path / "wide.csv", ds)
    assert main(["oracle", "best-subset", "--data", str(tmp_path / "wide.csv"), "--k", "1"]) == 2
    assert "--allow-large" in capsys.readouterr().err


def test_sample_gaussian(tmp_path):
    rng = np.random.default_rng(0)
    np.savetxt(tmp_path / "X.csv", rng.standard_normal((20, 4)), delimiter=",")
    args = ["sample-gaussian", "--design", str(tmp_path / "X.csv"), "--tau", "0.5", "--draws", "30",
            "--out", str(tmp_path / "g")]
    assert main(args) == EXIT_OK
    summary = json.loads((tmp_path / "g" / "summary.json").read_text())
    assert summary["method"] == "cg" and len(summary["cg_iterations"]) == 30
    assert ChainTrace.from_csv(tmp_path / "g" / "draws.csv").draws.shape == (30, 4)
    assert main(args[:-2] + ["--lam", "0.0", "--out", str(tmp_path / "h")]) == EXIT_CONFIG


def test_diagnose(dataset, tmp_path, capsys):
    run = tmp_path / "r"
    main(fit_args(dataset, run, "--chains", "2"))
    capsys.readouterr()
    traces = [str(run / "chain_0.csv"), str(run / "chain_1.csv")]
    timings = [str(run / "chain_0_timing.csv"), str(run / "chain_1_timing.csv")]
    assert main(["diagnose", *traces, "--timings", *timings, "--params", "tau,theta_1",
                 "--csv", str(tmp_path / "e.csv")]) == EXIT_OK
    rep = json.loads(capsys.readouterr().out)
    assert set(rep["ess"]) == {"tau", "theta_1"} and rep["n_draws"] == 120
    assert rep["min_ess_per_second"] > 0
    assert main(["diagnose", traces[0], "--timings", *timings]) == EXIT_CONFIG


def test_bench_command(tmp_path, capsys):
    assert main(["bench", "--grid", "30x40x3", "--draws", "2", "--out", str(tmp_path)]) == EXIT_OK
    rows = json.loads((tmp_path / "bench.json").read_text())
    assert {r["sampler"] for r in rows} == {"direct", "bhattacharya", "cg"}
    assert "direct/cg" in capsys.readouterr().out
    assert main(["bench", "--grid", "30x40", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["bench", "--grid", "10x10x20", "--out", str(tmp_path)]) == EXIT_CONFIG


def test_module_entry_point(dataset, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cgshrink", "fit", "--data", str(dataset),
                           "--out", str(tmp_path / "m"), "--response", "nope"],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "available columns" in proc.stderr
    proc = subprocess.run([sys.executable, "-m", "cgshrink", "--version"], capture_output=True,
                          text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("cgshrink ")


def test_reference_synthetic_fit_within_budget(tmp_path):
    ds, _ = synthetic_linear(200, 50, 5, seed=0)
    write_dataset_csv(tmp_path / "ref.csv", ds)
    t0 = time.perf_counter()
    assert main(["fit", "--data", str(tmp_path / "ref.csv"), "--out", str(tmp_path / "o"),
                 "--threads", "4", "--seed", "1"]) == EXIT_OK
    assert time.perf_counter() - t0 < 60
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["gibbs"] == {} and man["chains"][0]["cg_nonconverged"] == 0
