"""Named simulation sweeps emitting tidy CSV tables.

Every sweep is a list of independent seeded runs. A run simulates one
sequence, fits it with one or more solver modes and returns one row per
mode. Runs may go through a process pool; rows are sorted by their sweep key
before aggregation, so tables do not depend on completion order.
"""
from __future__ import annotations

import csv
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .estimator import ModelParams
from .evaluation import param_error, rho_precision_recall, test_nll
from .init import InitConfig
from .io import canonical_json, fmt_float, plain, sha256_text, write_manifest
from .kernel import make_kernel
from .marks import builtin_mark_model
from .simulator import SimConfig, simulate_mixture
from .solver import SolverConfig, fit, predict_labels

log = logging.getLogger(__name__)

EXPERIMENTS = ("fig2", "fig3", "table1-marked", "table-unmarked", "init-study", "b-sensitivity")
METHOD_NAMES = {"unhap": "unhap", "jointfadin": "jointfadin", "fadin-unmarked": "fadin"}
RECOMMENDED_B = 200
UNMARKED_ALPHA = 0.9


@dataclass(frozen=True)
class Scale:
    name: str
    reps: int
    max_T: float


SCALES = {"desk": Scale("desk", 10, 1000.0), "paper": Scale("paper", 100, 10000.0)}


def derive_seed(base: int, *keys) -> int:
    """Independent 32-bit seed for a run identified by ``keys``."""
    words = [int(base)]
    for k in keys:
        words.append(zlib.crc32(str(k).encode()) if not isinstance(k, int) else k)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass(frozen=True)
class RunSpec:
    key: tuple
    mu: float
    alpha: float
    mu_tilde: float
    T: float
    marks: str
    kernel: tuple               # (family, shape parameters as sorted items)
    seed: int
    modes: tuple
    solver: dict = field(default_factory=dict)
    init_scheme: str = "moments-max"
    test_T: float = 0.0

    def kernel_dict(self) -> dict:
        family, items = self.kernel
        return {"family": family, **dict(items)}


def _kernel_spec(family: str, **shape) -> tuple:
    return family, tuple(sorted(shape.items()))


def _truth(spec: RunSpec, mm) -> ModelParams:
    k = spec.kernel_dict()
    kernel = make_kernel(k.pop("family"), alpha=spec.alpha, **k)
    return ModelParams([spec.mu], [spec.mu_tilde], [[kernel]], mm)


def run_one(spec: RunSpec) -> list:
    """Simulate, fit every mode and score; one row per mode."""
    mm = builtin_mark_model(spec.marks)
    k = spec.kernel_dict()
    shape = make_kernel(k.pop("family"), alpha=1.0, **k)
    seq = simulate_mixture(SimConfig(spec.mu, spec.alpha, shape, mm, spec.mu_tilde, spec.T, spec.seed))
    test_seq = None
    if spec.test_T > 0:
        test_seq = simulate_mixture(SimConfig(spec.mu, spec.alpha, shape, mm, spec.mu_tilde,
                                              spec.test_T, derive_seed(spec.seed, "test")))
    truth = _truth(spec, mm)
    rows = []
    for mode in spec.modes:
        solver = SolverConfig(mode=mode, kernel_family=shape.family,
                              init=InitConfig(scheme=spec.init_scheme, seed=spec.seed),
                              seed=spec.seed, **spec.solver)
        t0 = time.perf_counter()
        result = fit(seq, mm, solver)
        elapsed = time.perf_counter() - t0
        labels = np.concatenate(predict_labels(result))
        precision, recall = rho_precision_recall(labels, np.concatenate(seq.labels))
        row = {
            "key": spec.key,
            "method": METHOD_NAMES[mode],
            "seed": spec.seed,
            "n_events": seq.n_events(),
            "error": param_error(result.params, truth),
            "precision": precision,
            "recall": recall,
            "time_s": elapsed,
            "n_refresh": result.n_refresh,
        }
        if test_seq is not None and test_seq.n_events() > 0:
            policy = "mixture" if mode == "unhap" else "hawkes-only"
            row["nll"] = test_nll(result.params, test_seq, solver.delta, policy)
            row["nll_policy"] = policy
        rows.append(row)
    return rows


def execute(specs, jobs: int = 1) -> list:
    specs = sorted(specs, key=lambda s: s.key)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            nested = list(pool.map(run_one, specs))
    else:
        nested = []
        for n, spec in enumerate(specs, 1):
            nested.append(run_one(spec))
            log.info("run %d/%d done: %s", n, len(specs), spec.key)
    return [row for rows in nested for row in rows]


def _quantiles(values) -> tuple:
    v = np.asarray(values, dtype=float)
    return tuple(float(q) for q in np.quantile(v, [0.25, 0.5, 0.75]))


def _group(rows, key_fn):
    groups = {}
    for row in rows:
        groups.setdefault(key_fn(row), []).append(row)
    return dict(sorted(groups.items()))


def _horizons(Ts, scale: Scale, desk=(1000.0,), paper=(100.0, 1000.0, 10000.0)) -> tuple:
    """Requested horizons (or the scale default) capped at the scale's ``max_T``."""
    values = Ts or (desk if scale.name == "desk" else paper)
    kept = tuple(float(T) for T in values if T <= scale.max_T)
    if not kept:
        raise ConfigError(f"no horizon in {values} fits scale {scale.name} (T <= {scale.max_T})")
    return kept


# --- sweeps -----------------------------------------------------------------

def fig2(scale: Scale, seed: int, solver: dict, mu_tildes=None, settings=None, Ts=None,
         reps=None, jobs: int = 1) -> dict:
    """Parameter error of unhap and jointfadin against the noise level."""
    mu_tildes = mu_tildes or ((0.1, 0.5, 1.0, 1.5) if scale.name == "desk"
                              else tuple(np.round(np.linspace(0.1, 1.5, 8), 2)))
    settings = settings or ("identity-linear", "identity-uniform")
    Ts = _horizons(Ts, scale)
    reps = reps or scale.reps
    specs = [RunSpec(key=(s, float(mt), float(T), r), mu=0.8, alpha=1.45, mu_tilde=float(mt),
                     T=float(T), marks=s, kernel=_kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
                     seed=derive_seed(seed, "fig2", s, r, fmt_float(mt), fmt_float(T)),
                     modes=("unhap", "jointfadin"), solver=solver)
             for s in settings for mt in mu_tildes for T in Ts for r in range(reps)]
    runs = execute(specs, jobs)
    table = []
    for (s, mt, T, method), rows in _group(runs, lambda r: (*r["key"][:3], r["method"])).items():
        q25, med, q75 = _quantiles([r["error"] for r in rows])
        table.append({"setting": s, "mu_tilde": mt, "T": T, "method": method,
                      "median_error": med, "q25_error": q25, "q75_error": q75, "n_runs": len(rows)})
    return {"fig2.csv": table, "fig2_runs.csv": _flatten(runs, ("setting", "mu_tilde", "T", "rep"))}


def fig3(scale: Scale, seed: int, solver: dict, alphas=None, mu_tildes=None, settings=None,
         Ts=None, reps=None, jobs: int = 1) -> dict:
    """Precision and recall of the recovered labels against the excitation level."""
    alphas = alphas or ((0.1, 0.3, 0.5, 0.7, 0.9) if scale.name == "desk"
                        else tuple(np.round(np.linspace(0.0, 1.0, 11), 2)))
    mu_tildes = mu_tildes or (0.1, 0.5, 1.0)
    settings = settings or ("identity-linear", "identity-uniform")
    Ts = _horizons(Ts, scale, paper=(1000.0, 10000.0))
    reps = reps or min(scale.reps, 10)
    specs = [RunSpec(key=(s, float(a), float(mt), float(T), r), mu=0.4, alpha=float(a),
                     mu_tilde=float(mt), T=float(T), marks=s,
                     kernel=_kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
                     seed=derive_seed(seed, "fig3", s, r, fmt_float(a), fmt_float(mt), fmt_float(T)),
                     modes=("unhap",), solver=solver)
             for s in settings for a in alphas for mt in mu_tildes for T in Ts for r in range(reps)]
    runs = execute(specs, jobs)
    table = []
    for (s, a, mt, T), rows in _group(runs, lambda r: r["key"][:4]).items():
        table.append({"setting": s, "alpha": a, "mu_tilde": mt, "T": T,
                      "median_precision": float(np.median([r["precision"] for r in rows])),
                      "median_recall": float(np.median([r["recall"] for r in rows])),
                      "n_runs": len(rows)})
    return {"fig3.csv": table, "fig3_runs.csv": _flatten(runs, ("setting", "alpha", "mu_tilde", "T", "rep"))}


def _nll_table(runs, group_fn, head: tuple) -> list:
    table = []
    for key, rows in _group(runs, group_fn).items():
        nll = np.array([r["nll"] for r in rows], dtype=float)
        table.append({**dict(zip(head, key)),
                      "median_nll": float(np.median(nll)), "mean_nll": float(np.mean(nll)),
                      "std_nll": float(np.std(nll)),
                      "median_time_s": float(np.median([r["time_s"] for r in rows])),
                      "nll_policy": rows[0]["nll_policy"], "n_runs": len(rows)})
    return table


def table1_marked(scale: Scale, seed: int, solver: dict, Ts=None, reps=None, jobs: int = 1) -> dict:
    """Held-out NLL of unhap and unmarked fadin on marked noisy data."""
    Ts = _horizons(Ts, scale, desk=(100.0, 500.0, 1000.0), paper=(100.0, 500.0, 1000.0))
    reps = reps or min(scale.reps, 10)
    specs = [RunSpec(key=(float(T), r), mu=0.1, alpha=1.0, mu_tilde=1.0, T=float(T),
                     marks="identity-smallmark",
                     kernel=_kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
                     seed=derive_seed(seed, "table1-marked", r, fmt_float(T)),
                     modes=("unhap", "fadin-unmarked"), solver=solver, test_T=float(T))
             for T in Ts for r in range(reps)]
    runs = execute(specs, jobs)
    table = _nll_table(runs, lambda r: (r["key"][0], r["method"]), ("T", "method"))
    return {"table1-marked.csv": table, "table1-marked_runs.csv": _flatten(runs, ("T", "rep"))}


def table_unmarked(scale: Scale, seed: int, solver: dict, Ts=None, reps=None, jobs: int = 1) -> dict:
    """Held-out NLL on unmarked data with and without noise."""
    Ts = _horizons(Ts, scale, desk=(100.0, 500.0, 1000.0), paper=(100.0, 500.0, 1000.0))
    reps = reps or min(scale.reps, 10)
    noise = {"non-noisy": 0.1, "noisy": 1.0}
    # alpha = 1 with omega = 1 is a critical process; stay just below it
    specs = [RunSpec(key=(name, float(T), r), mu=0.1, alpha=UNMARKED_ALPHA, mu_tilde=mt, T=float(T),
                     marks="unmarked", kernel=_kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
                     seed=derive_seed(seed, "table-unmarked", name, r, fmt_float(T)),
                     modes=("unhap", "fadin-unmarked"), solver=solver, test_T=float(T))
             for name, mt in noise.items() for T in Ts for r in range(reps)]
    runs = execute(specs, jobs)
    table = _nll_table(runs, lambda r: (*r["key"][:2], r["method"]), ("setting", "T", "method"))
    return {"table-unmarked.csv": table, "table-unmarked_runs.csv": _flatten(runs, ("setting", "T", "rep"))}


INIT_KERNELS = {
    "raised_cosine": _kernel_spec("raised_cosine", u=0.4, s=0.1),
    "truncated_gaussian": _kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
}


def init_study(scale: Scale, seed: int, solver: dict, kernels=None, Ts=None, reps=None,
               jobs: int = 1) -> dict:
    """Parameter error under moment-matching versus random initialisation."""
    kernels = kernels or tuple(INIT_KERNELS)
    Ts = _horizons(Ts, scale)
    reps = reps or min(scale.reps, 10)
    specs = [RunSpec(key=(kname, init, float(T), r), mu=0.8, alpha=1.4, mu_tilde=0.5, T=float(T),
                     marks="identity-linear", kernel=INIT_KERNELS[kname],
                     seed=derive_seed(seed, "init-study", kname, r, fmt_float(T)),
                     modes=("unhap",), solver=solver, init_scheme=init)
             for kname in kernels for init in ("moments-max", "random") for T in Ts
             for r in range(reps)]
    runs = execute(specs, jobs)
    table = []
    for (kname, init, T), rows in _group(runs, lambda r: r["key"][:3]).items():
        q25, med, q75 = _quantiles([r["error"] for r in rows])
        table.append({"kernel": kname, "init": init, "T": T, "median_error": med,
                      "q25_error": q25, "q75_error": q75, "n_runs": len(rows)})
    return {"init-study.csv": table, "init-study_runs.csv": _flatten(runs, ("kernel", "init", "T", "rep"))}


def b_sensitivity(scale: Scale, seed: int, solver: dict, bs=None, reps=None, jobs: int = 1) -> dict:
    """Error, label precision and cost against the number of steps between label updates."""
    bs = bs or (10, 25, 50, 75, 100, 200)
    reps = reps or min(scale.reps, 10)
    noise = {"non-noisy": 0.1, "noisy": 1.0}
    solver = {k: v for k, v in solver.items() if k != "b"}
    specs = []
    for name, mt in noise.items():
        for b in bs:
            for r in range(reps):
                # one sequence per (setting, rep), shared by every b
                specs.append(RunSpec(key=(name, int(b), r), mu=0.8, alpha=1.4, mu_tilde=mt, T=1000.0,
                                     marks="identity-uniform",
                                     kernel=_kernel_spec("truncated_gaussian", m=0.5, sigma=0.1),
                                     seed=derive_seed(seed, "b-sensitivity", name, r),
                                     modes=("unhap",), solver={**solver, "b": int(b)}))
    runs = execute(specs, jobs)
    table = []
    for (name, b), rows in _group(runs, lambda r: r["key"][:2]).items():
        table.append({"setting": name, "b": b,
                      "median_error": float(np.median([r["error"] for r in rows])),
                      "median_precision": float(np.median([r["precision"] for r in rows])),
                      "median_time_s": float(np.median([r["time_s"] for r in rows])),
                      "n_refresh": rows[0]["n_refresh"], "n_runs": len(rows),
                      "recommended": int(b == RECOMMENDED_B)})
    return {"b-sensitivity.csv": table, "b-sensitivity_runs.csv": _flatten(runs, ("setting", "b", "rep"))}


SWEEPS = {
    "fig2": fig2,
    "fig3": fig3,
    "table1-marked": table1_marked,
    "table-unmarked": table_unmarked,
    "init-study": init_study,
    "b-sensitivity": b_sensitivity,
}


def _flatten(runs, key_names) -> list:
    out = []
    for row in runs:
        row = dict(row)
        out.append({**dict(zip(key_names, row.pop("key"))), **row})
    return out


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_table(path, rows) -> None:
    columns = []
    for row in rows:
        columns.extend(c for c in row if c not in columns)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c, "")) for c in columns])


def run_experiment(name: str, scale: str = "desk", out_dir=".", seed: int = 0, jobs: int = 1,
                   solver: dict | None = None, **grid) -> dict:
    """Run one named sweep and write its CSV tables under ``out_dir``."""
    if name not in SWEEPS:
        raise ConfigError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}; expected one of {tuple(SCALES)}")
    solver = dict(solver or {})
    SolverConfig(**{k: v for k, v in solver.items() if k != "init"})   # validate early
    tables = SWEEPS[name](SCALES[scale], seed, solver, jobs=jobs, **grid)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for fname, rows in tables.items():
        write_table(out_dir / fname, rows)
    meta = {"experiment": name, "scale": scale, "seed": seed,
            "config": plain({"solver": solver, "grid": grid})}
    meta["config_sha256"] = sha256_text(canonical_json(meta["config"]))
    write_manifest(out_dir, list(tables), meta)
    return tables
