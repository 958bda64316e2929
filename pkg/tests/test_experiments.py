import csv
import json

import pytest

from unhap import ConfigError
from unhap.cli import main
from unhap.experiments import SCALES, _horizons, derive_seed, run_experiment

FAST = {"n_iter": 100, "b": 50}


def _read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(0, "fig2", 1) == derive_seed(0, "fig2", 1)
    assert derive_seed(0, "fig2", 1) != derive_seed(0, "fig2", 2)
    assert derive_seed(0, "fig2", 1) != derive_seed(1, "fig2", 1)
    assert 0 <= derive_seed(3, "x") < 2 ** 32


def test_horizons_capped_by_scale():
    assert _horizons(None, SCALES["desk"]) == (1000.0,)
    assert _horizons(None, SCALES["paper"]) == (100.0, 1000.0, 10000.0)
    assert _horizons((500, 5000), SCALES["desk"]) == (500.0,)
    with pytest.raises(ConfigError):
        _horizons((5000,), SCALES["desk"])


def test_fig2_schema(tmp_path):
    run_experiment("fig2", "desk", tmp_path, solver=FAST, mu_tildes=(0.1, 1.0), Ts=(200,), reps=2)
    rows = _read(tmp_path / "fig2.csv")
    # one row per (setting, mu_tilde, T, method)
    assert len(rows) == 2 * 2 * 2
    assert {(r["setting"], float(r["mu_tilde"]), r["method"]) for r in rows} == {
        (s, mt, m) for s in ("identity-linear", "identity-uniform") for mt in (0.1, 1.0)
        for m in ("unhap", "jointfadin")}
    assert {"median_error", "q25_error", "q75_error", "n_runs"} <= set(rows[0])
    assert len(_read(tmp_path / "fig2_runs.csv")) == 2 * 2 * 2 * 2
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert set(manifest["artifacts"]) == {"fig2.csv", "fig2_runs.csv"}
    assert manifest["experiment"] == "fig2" and len(manifest["config_sha256"]) == 64


def test_table1_desk_has_every_horizon_for_both_methods(tmp_path):
    run_experiment("table1-marked", "desk", tmp_path, solver=FAST, reps=1)
    rows = _read(tmp_path / "table1-marked.csv")
    assert {(r["T"], r["method"]) for r in rows} == {
        (T, m) for T in ("100", "500", "1000") for m in ("unhap", "fadin")}
    assert {r["nll_policy"] for r in rows} == {"mixture", "hawkes-only"}
    assert all(float(r["median_time_s"]) > 0 for r in rows)


def test_b_sensitivity_flags_recommended_b(tmp_path):
    run_experiment("b-sensitivity", "desk", tmp_path, solver={"n_iter": 200}, bs=(10, 200), reps=1)
    rows = _read(tmp_path / "b-sensitivity.csv")
    assert {(r["setting"], r["b"], r["recommended"]) for r in rows} == {
        (s, b, flag) for s in ("non-noisy", "noisy") for b, flag in (("10", "0"), ("200", "1"))}
    assert {r["n_refresh"] for r in rows if r["b"] == "10"} == {"20"}


def test_other_sweeps_run(tmp_path):
    run_experiment("fig3", "desk", tmp_path / "f3", solver=FAST, alphas=(0.5,), mu_tildes=(0.1,),
                   Ts=(200,), reps=1)
    assert {"median_precision", "median_recall"} <= set(_read(tmp_path / "f3" / "fig3.csv")[0])
    run_experiment("init-study", "desk", tmp_path / "init", solver=FAST, Ts=(200,), reps=1)
    rows = _read(tmp_path / "init" / "init-study.csv")
    assert {(r["kernel"], r["init"]) for r in rows} == {
        (k, i) for k in ("raised_cosine", "truncated_gaussian") for i in ("moments-max", "random")}
    run_experiment("table-unmarked", "desk", tmp_path / "tu", solver=FAST, Ts=(100,), reps=1)
    assert {r["setting"] for r in _read(tmp_path / "tu" / "table-unmarked.csv")} == {"non-noisy", "noisy"}


def test_tables_do_not_depend_on_worker_count(tmp_path):
    kw = dict(solver=FAST, alphas=(0.3, 0.7), mu_tildes=(0.5,), Ts=(200,), reps=2)
    run_experiment("fig3", "desk", tmp_path / "serial", **kw)
    run_experiment("fig3", "desk", tmp_path / "pool", jobs=2, **kw)
    assert (tmp_path / "serial" / "fig3.csv").read_text() == (tmp_path / "pool" / "fig3.csv").read_text()


def test_unknown_names_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run_experiment("fig9", "desk", tmp_path)
    with pytest.raises(ConfigError):
        run_experiment("fig2", "huge", tmp_path)
    with pytest.raises(ConfigError):
        run_experiment("fig2", "desk", tmp_path, solver={"b": 0})


def test_cli_experiment_uses_config_solver(tmp_path, capsys, monkeypatch):
    import unhap.cli as cli

    seen = {}

    def fake(name, scale, out, seed, jobs, solver):
        seen.update(name=name, scale=scale, seed=seed, jobs=jobs, solver=solver)
        return {"fig2.csv": []}

    monkeypatch.setattr(cli, "run_experiment", fake)
    cfg = tmp_path / "c.toml"
    cfg.write_text("[solver]\nn_iter = 300\nb = 30\n")
    assert main(["experiment", "fig2", "--config", str(cfg), "--out", str(tmp_path), "--seed", "4",
                 "--jobs", "2"]) == 0
    assert seen["solver"]["n_iter"] == 300 and seen["solver"]["b"] == 30
    assert "mode" not in seen["solver"] and (seen["seed"], seen["jobs"]) == (4, 2)
