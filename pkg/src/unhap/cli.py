"""Command line: ``unhap simulate|fit|score|experiment``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config, resolve_marks
from .errors import ConfigError, DataError, DivergenceError, UnhapError
from .estimator import ModelParams
from .evaluation import MetricsReport, confusion, param_error, test_nll
from .experiments import EXPERIMENTS, SCALES, derive_seed, run_experiment
from .io import (check_marks, fmt_float, read_events, read_json, sha256_file, write_events,
                 write_json, write_manifest)
from .simulator import simulate_mixture
from .solver import fit, predict_labels

log = logging.getLogger("unhap")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _stamp(cfg: RunConfig) -> dict:
    return {"config_sha256": cfg.config_hash(), "seed": cfg.seed}


# --- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args.out)
    sim = cfg.sim_config()
    seq = simulate_mixture(sim)
    stamp = _stamp(cfg)
    write_events(out / "events.csv", seq, stamp)
    artifacts = ["events.csv", "truth.json"]
    truth = ModelParams([sim.mu], [sim.mu_tilde], [[sim.true_kernel]], sim.mark_model)
    n_noise = int(np.sum(seq.labels[0] == 0))
    doc = {**stamp, "config": cfg.resolved(), "params": truth.as_dict(),
           "branching_ratio": sim.branching_ratio, "omega_integral": sim.omega_integral,
           "n_events": seq.n_events(), "n_noise": n_noise}
    if cfg.simulation.test_T > 0:
        test = simulate_mixture(cfg.sim_config(seed=derive_seed(cfg.seed, "test"),
                                               T=cfg.simulation.test_T))
        write_events(out / "test_events.csv", test, stamp)
        artifacts.append("test_events.csv")
        doc["n_test_events"] = test.n_events()
    write_json(out / "truth.json", doc)
    write_manifest(out, artifacts, stamp)
    print(f"simulated {seq.n_events()} events ({n_noise} noise) -> {out}")
    return 0


# --- fit --------------------------------------------------------------------

def write_rho(path, result, seq) -> None:
    rows = []
    labels = predict_labels(result)
    for i, rho in enumerate(result.event_rho()):
        for n in range(len(rho)):
            rows.append((float(seq.times[i][n]), i, float(seq.marks[i][n]), float(rho[n]),
                         int(labels[i][n])))
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("type_id", "time", "mark", "rho", "label_hat"))
        for t, i, k, r, lab in rows:
            writer.writerow((i, fmt_float(t), fmt_float(k), fmt_float(r), lab))


def write_trace(path, result) -> None:
    b = result.config.b
    n_blocks = result.config.n_iter // b
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("iteration", "block", "loss"))
        for it, loss in enumerate(result.loss_trace):
            writer.writerow((it, min(it // b, n_blocks - 1), fmt_float(loss)))


def cmd_fit(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args.out)
    seq, _ = read_events(args.events)
    mm = cfg.mark_model()
    if cfg.solver.mode != "fadin-unmarked":
        check_marks(seq, mm)
    result = fit(seq, mm, cfg.solver)
    log.info("precomputation refreshes: %d", result.n_refresh)
    write_rho(out / "rho.csv", result, seq)
    write_trace(out / "trace.csv", result)
    stamp = _stamp(cfg)
    doc = {
        **stamp,
        "config": cfg.resolved(),
        "inputs": {"events": {"name": Path(args.events).name, "sha256": sha256_file(args.events)}},
        "params": result.params.as_dict(),
        "mode": cfg.solver.mode,
        "n_refresh": result.n_refresh,
        "n_halvings": result.n_halvings,
        "n_rejected": result.n_rejected,
        "descent_fraction": result.descent_fraction,
        "final_loss": float(result.loss_trace[-1]),
        "warnings": result.warnings,
    }
    write_json(out / "params.json", doc)
    write_manifest(out, ["params.json", "rho.csv", "trace.csv"], stamp)
    print(f"fit {cfg.solver.mode}: {seq.n_events()} events, {result.n_refresh} refreshes -> {out}")
    return 0


# --- score ------------------------------------------------------------------

def _read_rho(path) -> dict:
    per_type = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), start=2):
            try:
                i = int(row["type_id"])
                per_type.setdefault(i, []).append((float(row["time"]), int(row["label_hat"])))
            except (KeyError, ValueError, TypeError):
                raise DataError(f"{path}: row {lineno}: malformed") from None
    return per_type


def _aligned_labels(rho_rows: dict, seq) -> tuple:
    predicted, truth = [], []
    for i in range(seq.D):
        rows = sorted(rho_rows.get(i, []))
        times = np.asarray(seq.times[i], dtype=float)
        if len(rows) != len(times) or not np.array_equal(np.array([r[0] for r in rows]), times):
            raise DataError(f"type {i}: rho file and event file list different events")
        predicted.append(np.array([r[1] for r in rows], dtype=int))
        truth.append(np.asarray(seq.labels[i], dtype=int))
    return np.concatenate(predicted), np.concatenate(truth)


def cmd_score(args) -> int:
    fit_dir = Path(args.fit)
    fit_doc = read_json(fit_dir / "params.json")
    cfg = load_config(args.config) if args.config else None
    metrics_cfg = cfg.metrics if cfg else None
    mm = resolve_marks(fit_doc["config"]["model"]["marks"])
    params = ModelParams.from_dict(fit_doc["params"])
    mode = fit_doc["mode"]
    report = MetricsReport()

    if args.events:
        seq, _ = read_events(args.events)
        if seq.labels is None:
            report.notes.append("event file has no labels: precision/recall omitted")
        else:
            predicted, truth = _aligned_labels(_read_rho(fit_dir / "rho.csv"), seq)
            report.tp, report.fp, report.fn, report.tn = confusion(predicted, truth)
            report.precision = report.tp / (report.tp + report.fp) if report.tp + report.fp else 1.0
            report.recall = report.tp / (report.tp + report.fn) if report.tp + report.fn else 1.0
    else:
        report.notes.append("no event file with labels: precision/recall omitted")

    if args.truth:
        truth_doc = read_json(args.truth)
        true_params = ModelParams.from_dict(truth_doc["params"], mark_model=mm)
        coords = (metrics_cfg.param_coords or None) if metrics_cfg else None
        report.param_error_l2 = param_error(params, true_params, coords)
    else:
        report.notes.append("no truth file: param_error omitted")

    if args.test:
        test_seq, _ = read_events(args.test)
        policy = metrics_cfg.nll_policy if metrics_cfg else "auto"
        if policy == "auto":
            policy = "mixture" if mode == "unhap" else "hawkes-only"
        report.nll = test_nll(params, test_seq, fit_doc["config"]["solver"]["delta"], policy)
        report.nll_policy = policy
        report.nll_normalization = "per-event"
    else:
        report.notes.append("no test file: nll omitted")

    for note in report.notes:
        print(f"notice: {note}", file=sys.stderr)
    out = _out_dir(args.out)
    stamp = {"config_sha256": fit_doc["config_sha256"], "seed": fit_doc["seed"]}
    text = report.to_text() + "".join(f"{k}={v}\n" for k, v in stamp.items())
    (out / "metrics.txt").write_text(text)
    write_json(out / "metrics.json", {**stamp, "mode": mode, "metrics": report.as_dict()})
    write_manifest(out, ["metrics.txt", "metrics.json"], stamp)
    sys.stdout.write(report.to_text())
    return 0


# --- experiment -------------------------------------------------------------

def cmd_experiment(args) -> int:
    solver = {}
    if args.config:
        import dataclasses

        cfg = load_config(args.config)
        solver = {k: v for k, v in dataclasses.asdict(cfg.solver).items()
                  if k not in ("mode", "init", "kernel_family", "seed")}
    seed = args.seed if args.seed is not None else 0
    tables = run_experiment(args.name, args.scale, args.out, seed=seed, jobs=args.jobs, solver=solver)
    for fname in tables:
        print(Path(args.out) / fname)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unhap", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=False):
        p.add_argument("--config", required=config_required, help="TOML run configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")

    p = sub.add_parser("simulate", help="simulate a labelled event file and its truth")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit an event file")
    common(p)
    p.add_argument("--events", required=True, help="event CSV")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score fit artifacts")
    common(p)
    p.add_argument("--fit", required=True, help="directory written by `unhap fit`")
    p.add_argument("--truth", help="truth.json written by `unhap simulate`")
    p.add_argument("--events", help="event CSV with true labels")
    p.add_argument("--test", help="held-out event CSV for the NLL")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("experiment", help="run a named sweep")
    p.add_argument("name", choices=EXPERIMENTS)
    common(p)
    p.add_argument("--scale", choices=tuple(SCALES), default="desk")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_experiment)
    return parser


EXIT_CODES = {ConfigError: 2, DataError: 3, DivergenceError: 4}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UnhapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return next((code for cls, code in EXIT_CODES.items() if isinstance(exc, cls)), 1)


if __name__ == "__main__":
    sys.exit(main())
