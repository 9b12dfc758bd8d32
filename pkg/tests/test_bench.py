import csv
import json
import math

import numpy as np
import pytest

from rbmh.bench import ConfigError, ExperimentConfig, load_config, preset, run_experiment
from rbmh.bench.cli import main
from rbmh.bench.config import parse_k
from rbmh.bench.output import emit_figure_data, table_rows, write_report, write_tables


def small(name="table4", **kw):
    base = dict(seed=11, R=12, N=60)
    base.update(kw)
    return preset(name, **base)


def test_parse_k():
    assert parse_k("inf") == math.inf
    assert parse_k("3") == 3 and parse_k(0) == 0
    for bad in ("-1", "2.5", "x"):
        with pytest.raises(ConfigError):
            parse_k(bad)


def test_config_validation():
    with pytest.raises(ConfigError, match="seed"):
        ExperimentConfig().validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=1, R=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig(seed=1, k=()).validate()
    with pytest.raises(ConfigError, match="not defined"):
        ExperimentConfig(seed=1, h=("beta1",)).validate()
    with pytest.raises(ConfigError, match="exact p"):
        ExperimentConfig(seed=1, oracle=True).validate()
    with pytest.raises(ConfigError, match="unknown config keys"):
        ExperimentConfig.from_dict({"seed": 1, "tau": 2})


def test_load_config(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"model": "gaussian_rw", "scales": [2.0], "k": ["inf", 3], "seed": 4}))
    cfg = load_config(f)
    assert cfg.k == (math.inf, 3) and cfg.scales == (2.0,)
    with pytest.raises(ConfigError, match=str(tmp_path / "nope.json")):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError, match="bad.json"):
        load_config(bad)


def test_model_errors_name_parameter():
    cfg = preset("table4", seed=1, scales=(1.5,), R=1, N=5)
    with pytest.raises(ValueError, match="1.5"):
        run_experiment(cfg)


def test_degenerate_run_has_absent_cells():
    rep = run_experiment(preset("table1", seed=3, R=1, N=1))
    for s in rep.scales:
        for c in s["cells"]:
            assert c["ratio"] is None and c["se"] is None
    rep = run_experiment(preset("table1", seed=3, R=1, N=50, scales=(2.0,)))
    assert all(c["se"] is None for c in rep.scales[0]["cells"])


def test_report_deterministic_and_worker_independent(tmp_path):
    cfg = small(R=8)
    a = write_report(run_experiment(cfg), tmp_path / "a").read_bytes()
    b = write_report(run_experiment(cfg), tmp_path / "b").read_bytes()
    cfg.workers = 2
    c = write_report(run_experiment(cfg), tmp_path / "c").read_bytes()
    assert a == b == c
    cfg2 = small(R=8, seed=12)
    d = write_report(run_experiment(cfg2), tmp_path / "d").read_bytes()
    assert d != a


def test_accounting_ledger_is_exact():
    cfg = small(k=(0, 3, "inf"), control_variate=True)
    rep = run_experiment(cfg)
    for s in rep.scales:
        acc = s["accounting"]
        blocks = sum(r["M_N"] for r in s["replications"])
        assert acc["path_proposals"] == cfg.R * cfg.N
        assert acc["cv_proposals"] == blocks == acc["complete_blocks"]
        assert acc["total_proposals"] == (acc["path_proposals"] + sum(acc["weight_proposals"].values())
                                          + acc["cv_proposals"])


def test_cost_of_truncated_weights():
    from rbmh.weights import expected_proposals
    rep = run_experiment(preset("geometric", seed=2, R=5, N=400, scales=(0.5,), k=(3,), h=("x",)))
    acc = rep.scales[0]["accounting"]
    per_block = acc["weight_proposals_per_block"]["3"]
    # every state has P(alpha = 1) = 1/2 and p = 3/4; draws per weight are bounded by 3 + Geometric(3/4)
    expected = expected_proposals(0.75, 0.5, 3)
    assert abs(per_block - expected) <= 3 * 1.5 / math.sqrt(acc["complete_blocks"])
    assert per_block <= 3 + 1 / 0.75 + 1


def test_table_layout_row_per_scale_with_oracle_rows():
    rep = run_experiment(small())
    header, rows = table_rows(rep)
    assert header[:3] == ["scale", "estimator", "baseline"]
    assert [h for h in header[3:] if not h.endswith("_se")] == ["x", "x^2", "1{x>1}", "p"]
    assert [(r[0], r[1]) for r in rows] == [(s, e) for s in (0.9, 0.5, 0.3, 0.1) for e in ("xi_inf", "oracle")]


def test_write_tables(tmp_path):
    rep = run_experiment(small())
    paths = write_tables(rep, tmp_path)
    with open(paths[0]) as f:
        rows = list(csv.reader(f))
    assert len(rows) == 9 and len(rows[0]) == 3 + 2 * 4
    assert "oracle" in paths[1].read_text()


def test_figure_envelopes(tmp_path):
    cfg = preset("figure1", seed=5, R=6, N=80)
    rep = run_experiment(cfg)
    files = emit_figure_data(rep, tmp_path)
    assert sorted(p.name for p in files) == ["envelope_delta.csv", "envelope_delta_k.csv"]
    for p in files:
        rows = list(csv.reader(open(p)))
        assert rows[0] == ["iteration", "min", "q05", "q95", "max"]
        assert len(rows) == cfg.N + 1
    tr = rep.traces["10"]
    assert tr["delta"].shape == (6, 80)
    env = rep.scales[0]["envelopes"]["delta"]
    np.testing.assert_allclose(env["max"], tr["delta"].max(axis=0))


def test_single_replication_envelope_equals_trace():
    rep = run_experiment(preset("figure1", seed=5, R=1, N=50))
    env = rep.scales[0]["envelopes"]["delta"]
    tr = rep.traces["10"]["delta"][0]
    for key in ("min", "q05", "q95", "max"):
        np.testing.assert_allclose(env[key], tr, rtol=0, atol=1e-15)


def test_cli_run_tables_figures(tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["run", "--preset", "figure1", "--seed", "3", "--R", "4", "--N", "30", "-o", str(out),
               "--tables", "--figures"])
    assert rc == 0
    assert (out / "report.json").exists() and (out / "timings.json").exists()
    assert (out / "envelope_delta.csv").exists() and (out / "table_figure1.csv").exists()
    assert main(["tables", str(out / "report.json"), "--name", "again"]) == 0
    assert (out / "table_again.txt").exists()
    assert main(["figures", str(out)]) == 0


def test_cli_errors(tmp_path, capsys):
    rc = main(["run", "--config", str(tmp_path / "missing.file"), "--seed", "1"])
    assert rc != 0
    assert "missing.file" in capsys.readouterr().err
    assert main(["run", "--preset", "table1"]) != 0  # --seed is mandatory
    assert main(["run", "--preset", "table1", "--seed", "1", "--bogus"]) != 0
    assert main(["tables", str(tmp_path / "none.json")]) != 0


def test_cli_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("RBMH_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--preset", "table4", "--seed", "1", "--R", "2", "--N", "20"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_cli_selftest():
    assert main(["selftest"]) == 0
