import csv
import dataclasses
import json

import numpy as np
import pytest

from capri import cli, harness
from capri.config import dumps, load, loads, parse
from capri.errors import ConfigError

BASE = {
    "horizon": 64,
    "kernel": {"family": "se", "lengthscale": 0.3},
    "grid": {"n_contexts": 3, "n_actions": 6, "context_dim": 1, "action_dim": 1, "layout": "linspace"},
    "contexts": {"probabilities": None},
    "reward": {"B": 1.0, "n_centers": 4, "noise_scale": 1.0},
    "tau": 1.0,
    "privacy": {"mode": "jdp", "epsilon": 1.0, "delta": 0.1},
    "delta_err": 0.05,
    "width_scale": 1e-3,
    "seeds": [0, 1],
    "output": "unused",
}


def make_cfg(tmp_path, **over):
    d = json.loads(json.dumps(BASE))
    for k, v in over.items():
        if isinstance(v, dict):
            d[k].update(v)
        else:
            d[k] = v
    d["output"] = str(tmp_path / "out")
    return parse(d)


def write_cfg(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(dumps(cfg))
    return str(p)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_config_roundtrip(tmp_path):
    cfg = make_cfg(tmp_path)
    assert loads(dumps(cfg)) == cfg
    assert load(write_cfg(tmp_path, cfg)) == cfg


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d.pop("tau"), "tau"),
    (lambda d: d.update(extra=1), "extra"),
    (lambda d: d["kernel"].update(family="rbf"), "kernel.family"),
    (lambda d: d["grid"].update(n_actions=0), "grid.n_actions"),
    (lambda d: d.update(seeds=[]), "seeds"),
    (lambda d: d.update(horizon=3), "horizon"),
    (lambda d: d["privacy"].update(delta=1.5), "privacy.delta"),
    (lambda d: d["reward"].pop("B"), "reward.B"),
])
def test_config_errors_name_field(mutate, field):
    d = json.loads(json.dumps(BASE))
    mutate(d)
    with pytest.raises(ConfigError) as exc:
        parse(d)
    assert exc.value.field == field


def test_step_csv_rows(tmp_path):
    cfg = make_cfg(tmp_path, horizon=8, seeds=[3])
    report = harness.run_experiment(cfg)
    rows = read_rows(tmp_path / "out" / "steps.csv")
    assert len(rows) == 8
    assert list(rows[0]) == harness.STEP_COLUMNS
    epochs = read_rows(tmp_path / "out" / "epochs.csv")
    assert list(epochs[0]) == harness.EPOCH_COLUMNS
    assert len(report.mean_curve) == 8


def test_cumulative_consistent(tmp_path):
    cfg = make_cfg(tmp_path)
    harness.run_experiment(cfg)
    rows = read_rows(tmp_path / "out" / "steps.csv")
    for s in cfg.seeds:
        r = [x for x in rows if int(x["seed"]) == s]
        inst = np.array([float(x["inst_regret"]) for x in r])
        cum = np.array([float(x["cum_regret"]) for x in r])
        assert np.all(np.diff(cum) >= 0)
        assert np.max(np.abs(np.cumsum(inst) - cum)) < 1e-9


def test_byte_identical_outputs(tmp_path):
    cfg = make_cfg(tmp_path)
    harness.run_experiment(cfg, str(tmp_path / "a"))
    harness.run_experiment(cfg, str(tmp_path / "b"))
    for name in ("steps.csv", "epochs.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_workers_do_not_change_results(tmp_path):
    cfg = make_cfg(tmp_path)
    harness.run_experiment(cfg, str(tmp_path / "serial"))
    harness.run_experiment(dataclasses.replace(cfg, workers=2), str(tmp_path / "pool"))
    assert (tmp_path / "serial" / "steps.csv").read_bytes() == (tmp_path / "pool" / "steps.csv").read_bytes()


def test_nonprivate_vs_huge_epsilon(tmp_path):
    np_cfg = make_cfg(tmp_path, horizon=512, privacy={"mode": "nonprivate"})
    jdp_cfg = make_cfg(tmp_path, horizon=512, privacy={"mode": "jdp", "epsilon": 1e9})
    a = harness.run_experiment(np_cfg, str(tmp_path / "np"))
    b = harness.run_experiment(jdp_cfg, str(tmp_path / "jdp"))
    for s in np_cfg.seeds:
        assert np.max(np.abs(a.curves[s] - b.curves[s])) <= 1e-6


def test_audit(tmp_path):
    cfg = make_cfg(tmp_path, horizon=512)
    rep = harness.privacy_audit(cfg)
    assert rep.ok and rep.max_ratio <= 1 + 1e-9 and rep.sigma0_mismatches == 0
    assert len(read_rows(tmp_path / "out" / "audit.csv")) == len(rep.rows)

    quiet = harness.privacy_audit(make_cfg(tmp_path, privacy={"mode": "nonprivate"}), str(tmp_path / "np"))
    assert all(r["sigma0_used"] == 0.0 == r["sigma0_recomputed"] for r in quiet.rows)

    big = harness.privacy_audit(make_cfg(tmp_path, reward={"B": 2.0}), str(tmp_path / "b2"))
    small = harness.privacy_audit(make_cfg(tmp_path), str(tmp_path / "b1"))
    for x, y in zip(big.rows, small.rows):
        if x["epoch"] == 1:
            assert x["sensitivity_bound"] == 2 * y["sensitivity_bound"]


def test_compare_rows(tmp_path):
    cfg = make_cfg(tmp_path, seeds=[0, 1, 2])
    reports = harness.compare_baselines(cfg)
    rows = read_rows(tmp_path / "out" / "comparison.csv")
    assert len(rows) == 4 * len(cfg.seeds)
    assert set(reports) == set(harness.VARIANTS)
    assert len(read_rows(tmp_path / "out" / "comparison_curves.csv")) == cfg.horizon


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    cfg = make_cfg(tmp_path)
    path = write_cfg(tmp_path, cfg)
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "r"), "--seed-override", "5"]) == 0
    assert {r["seed"] for r in read_rows(tmp_path / "r" / "steps.csv")} == {"5"}
    assert cli.main(["audit", "--config", path]) == 0
    assert cli.main(["compare", "--config", path]) == 0

    bad = tmp_path / "bad.json"
    bad.write_text('{"horizon": 2}')
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert "config error" in capsys.readouterr().err

    monkeypatch.setattr(harness, "RATIO_TOL", -1.0)
    assert cli.main(["audit", "--config", path]) == 3
