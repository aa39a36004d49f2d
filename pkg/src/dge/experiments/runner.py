"""End-to-end experiment pipelines driven by an :class:`ExperimentConfig`.

Stream layout under ``RngStream(root_seed)``:

- ``(0,)``: the real train/test split (fixed across runs)
- ``(1, r)``: run ``r``; below it
  - ``(1, r, 1, k)``: generator ``k`` (fit ``.. 0``, sample ``.. 1``)
  - ``(1, r, 2, k, j)``: classifier seed ``j`` on synthetic set ``k``
  - ``(1, r, 3, j)``: classifier seed ``j`` on the concatenated sets
  - ``(1, r, 4, j)``: classifier seed ``j`` on the real training data
  - ``(1, r, 5, k)``: train/test split of synthetic set ``k``
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..classifiers import ClassifierSpec, EnsemblePredictor, ensemble_predict, predict_proba, train_classifier
from ..errors import ConfigError, DgeError, DimensionError, NoSubgroups, annotate
from ..evaluation import (
    EvalReport,
    StatisticSamples,
    SubgroupReport,
    accuracy,
    confidence_accuracy_curve,
    cross_dataset_eval,
    evaluate_model,
    mc_stats,
    minority_subgroups,
    rank_models,
    score,
    uncertainty_grid,
)
from ..publish import SyntheticBundle, dge_generate, naive_view, replicate
from ..tabular import RngStream, TabularDataset, read_csv, split
from ..toys import gen_toy
from .config import ExperimentConfig

APPROACH_NAMES = {"oracle": "Oracle", "naive_s": "NaiveS", "naive_e": "NaiveE",
                  "naive_c": "NaiveC", "dge": "DGE"}


# --------------------------------------------------------------------------
# Record
# --------------------------------------------------------------------------


@dataclass
class RunRecord:
    experiment: str
    name: str
    config: dict
    config_hash: str
    root_seed: int
    seeds: list
    results: dict
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        """Everything except wall-clock timings, so replays compare byte-for-byte."""
        return {"experiment": self.experiment, "name": self.name, "config": self.config,
                "config_hash": self.config_hash, "root_seed": self.root_seed,
                "seeds": self.seeds, "results": self.results}


def jsonable(obj):
    """Plain JSON types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if hasattr(obj, "to_dict"):
        return jsonable(obj.to_dict())
    return obj


# --------------------------------------------------------------------------
# Shared plumbing
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RealData:
    full: TabularDataset
    train: TabularDataset
    test: TabularDataset


def load_real(cfg: ExperimentConfig) -> RealData:
    if cfg.toy_spec is not None:
        full = gen_toy(cfg.toy_spec)
    else:
        full = read_csv(cfg.csv_path, label_name=cfg.data.get("label"),
                        positive_label=cfg.data.get("positive_label"))
    idx = split(full, cfg.data["train_fraction"], RngStream(cfg.root_seed, (0,)),
                stratified=cfg.data["stratified"])
    train, test = idx.apply(full)
    return RealData(full, train, test)


def run_stream(cfg: ExperimentConfig, r: int) -> RngStream:
    return RngStream(cfg.root_seed, (1, r))


def make_bundle(cfg: ExperimentConfig, real: RealData, run: RngStream) -> SyntheticBundle:
    K = cfg.K
    if cfg.control == "real_copies":
        return replicate(real.train, K, "real_copy")
    if cfg.control == "identical_sets":
        one = dge_generate(cfg.generator, real.train, 1, cfg.n_synth, run.child(1))
        return replicate(one.datasets[0], K, cfg.generator.kind)
    return dge_generate(cfg.generator, real.train, K, cfg.n_synth, run.child(1),
                        disjoint_train=cfg.disjoint_train)


def synth_member(spec: ClassifierSpec, data: TabularDataset, run: RngStream, k: int, j: int = 0):
    return train_classifier(spec, data, run.child(2, k, j))


def _workers(cfg: ExperimentConfig) -> int:
    env = os.environ.get("DGE_WORKERS")
    cap = int(env) if env else cfg.workers
    return max(1, min(cfg.workers, cap))


def _run_all(cfg: ExperimentConfig, fn: Callable, real: RealData) -> tuple:
    """Per-run results in run order, plus per-run wall-clock seconds."""
    workers = _workers(cfg)
    if workers == 1 or cfg.n_runs == 1:
        pairs = [_pool_entry(fn, cfg, real, r) for r in range(cfg.n_runs)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_pool_entry, fn, cfg, real, r) for r in range(cfg.n_runs)]
            pairs = [f.result() for f in futures]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def _pool_entry(fn, cfg, real, r):
    t0 = time.perf_counter()
    try:
        out = fn(cfg, real, r)
    except DgeError as e:
        raise annotate(e, f"run {r}", run_index=r) from e
    return out, time.perf_counter() - t0


def _record(cfg: ExperimentConfig, results: dict, timings: dict) -> RunRecord:
    seeds = [{"run": r, "path": [1, r], "seed": run_stream(cfg, r).seed_int()} for r in range(cfg.n_runs)]
    return RunRecord(cfg.experiment, cfg.name, jsonable(cfg.to_dict()), cfg.config_hash(),
                     cfg.root_seed, seeds, jsonable(results), timings)


def _reports(per_run: list, approaches: list, metrics: list) -> list:
    return [EvalReport.from_values(a, m, [run[a][m] for run in per_run]).to_dict()
            for a in approaches for m in metrics]


def _mean_or_none(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


# --------------------------------------------------------------------------
# Train: Oracle / NaiveS / NaiveE / NaiveC / DGE_K on the real test set
# --------------------------------------------------------------------------


def _train_approach_labels(cfg: ExperimentConfig) -> list:
    sec = cfg.section("train")
    labels = []
    for a in sec["approaches"]:
        if a == "dge":
            labels += [f"DGE_{K}" for K in sec["dge_sizes"]]
        else:
            labels.append(APPROACH_NAMES[a])
    return labels


def _train_run(cfg: ExperimentConfig, real: RealData, r: int) -> dict:
    sec = cfg.section("train")
    spec = cfg.downstream
    run = run_stream(cfg, r)
    wanted = sec["approaches"]
    sizes = sorted(sec["dge_sizes"]) if "dge" in wanted else []
    n_members = max(sizes + ([1] if {"naive_s", "naive_e"} & set(wanted) else []), default=0)
    bundle = make_bundle(cfg, real, run) if n_members or "naive_c" in wanted else None
    # member k is also NaiveS (k = 0) and NaiveE's first seed
    members = [synth_member(spec, bundle.datasets[k], run, k) for k in range(n_members)]
    probs = {}
    if "oracle" in wanted:
        probs["Oracle"] = predict_proba(train_classifier(spec, real.train, run.child(4, 0)), real.test)
    if "naive_s" in wanted:
        probs["NaiveS"] = predict_proba(members[0], real.test)
    if "naive_e" in wanted:
        ens = [members[0]] + [synth_member(spec, bundle.datasets[0], run, 0, j)
                              for j in range(1, sec["naive_e_size"])]
        probs["NaiveE"] = ensemble_predict(EnsemblePredictor(ens), real.test)[0]
    if "naive_c" in wanted:
        probs["NaiveC"] = predict_proba(train_classifier(spec, naive_view(bundle, "concat"), run.child(3, 0)),
                                        real.test)
    if sizes:
        member_probs = np.vstack([predict_proba(m, real.test) for m in members])
        for K in sizes:
            probs[f"DGE_{K}"] = member_probs[:K].mean(axis=0)
    return {a: {m: score(p, real.test.labels, m) for m in sec["metrics"]} for a, p in probs.items()}


def run_train_experiment(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    _expect(cfg, "train")
    real = real or load_real(cfg)
    t0 = time.perf_counter()
    per_run, run_times = _run_all(cfg, _train_run, real)
    approaches = _train_approach_labels(cfg)
    metrics = cfg.section("train")["metrics"]
    results = {"approaches": approaches, "metrics": metrics,
               "reports": _reports(per_run, approaches, metrics), "per_run": per_run}
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "per_run_s": run_times})


# --------------------------------------------------------------------------
# Evaluate / Select: naive vs cross-set vs real-test evaluation of g_k
# --------------------------------------------------------------------------


def _k_primes(cfg: ExperimentConfig) -> list:
    return sorted({min(k, cfg.K - 1) for k in cfg.section("evaluate")["k_primes"]})


def _eval_labels(cfg: ExperimentConfig) -> list:
    return ["Naive"] + [f"DGE_{k}" for k in _k_primes(cfg)] + ["Oracle"]


def _evaluate_models(cfg: ExperimentConfig, real: RealData, r: int, specs: list) -> dict:
    sec = cfg.section("evaluate")
    metric = sec["metric"]
    run = run_stream(cfg, r)
    bundle = make_bundle(cfg, real, run)
    parts = [split(d, sec["synth_train_fraction"], run.child(5, k), stratified=cfg.data["stratified"]).apply(d)
             for k, d in enumerate(bundle.datasets)]
    tests = [p[1] for p in parts]
    out = {}
    for spec in specs:
        models = [synth_member(spec, tr, run, k) for k, (tr, _) in enumerate(parts)]
        samples = {"Naive": cross_dataset_eval(models, tests, "naive", metric=metric)}
        for kp in _k_primes(cfg):
            samples[f"DGE_{kp}"] = cross_dataset_eval(models, tests, "dge_cross", kp, metric)
        samples["Oracle"] = StatisticSamples([evaluate_model(m, real.test, metric) for m in models],
                                             f"oracle_{metric}")
        row = {}
        for a, s in samples.items():
            mean, var = mc_stats(s, require_variance=False)
            row[a] = {"mean": mean, "variance": var, "values": list(s.values)}
        out[spec.label] = row
    return out


def _evaluate_run(cfg, real, r):
    return _evaluate_models(cfg, real, r, [cfg.downstream])


def _select_run(cfg, real, r):
    return _evaluate_models(cfg, real, r, cfg.models)


def _bias_summary(per_run: list, labels: list) -> dict:
    """Per-run ``approach mean - Oracle mean`` for each synthetic-data approach."""
    return {a: [run[a]["mean"] - run["Oracle"]["mean"] for run in per_run] for a in labels if a != "Oracle"}


def run_evaluate_experiment(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    _expect(cfg, "evaluate")
    real = real or load_real(cfg)
    t0 = time.perf_counter()
    raw, run_times = _run_all(cfg, _evaluate_run, real)
    label = cfg.downstream.label
    per_run = [r[label] for r in raw]
    labels = _eval_labels(cfg)
    metric = cfg.section("evaluate")["metric"]
    reports = [EvalReport.from_values(a, metric, [run[a]["mean"] for run in per_run]).to_dict() for a in labels]
    bias = _bias_summary(per_run, labels)
    results = {"model": label, "metric": metric, "approaches": labels, "reports": reports,
               "bias": {a: {"per_run": v, "mean": float(np.mean(v)), "mean_abs": float(np.mean(np.abs(v)))}
                        for a, v in bias.items()},
               "per_run": per_run}
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "per_run_s": run_times})


def run_select_experiment(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    _expect(cfg, "select")
    real = real or load_real(cfg)
    t0 = time.perf_counter()
    per_run, run_times = _run_all(cfg, _select_run, real)
    labels = _eval_labels(cfg)
    names = [m.label for m in cfg.models]
    metric = cfg.section("evaluate")["metric"]
    rankings = {a: [] for a in labels}
    for run in per_run:
        ref = {n: run[n]["Oracle"]["mean"] for n in names}
        for a in labels:
            rankings[a].append(rank_models({n: run[n][a]["mean"] for n in names}, ref).to_dict())
    summary = {}
    for a in labels:
        rho = [rk["spearman"] for rk in rankings[a]]
        finite = [v for v in rho if v is not None and math.isfinite(v)]
        summary[a] = {
            "spearman": EvalReport.from_values(a, "spearman", finite).to_dict() if finite else None,
            "mean_rank": {n: float(np.mean([rk["ranks"][i] for rk in rankings[a]])) for i, n in enumerate(names)},
            "top_pick": [names[int(np.argmin(rk["ranks"]))] for rk in rankings[a]],
            "scores": {n: EvalReport.from_values(a, metric, [run[n][a]["mean"] for run in per_run]).to_dict()
                       for n in names},
        }
    results = {"models": names, "metric": metric, "approaches": labels, "summary": summary,
               "rankings": rankings, "per_run": per_run}
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "per_run_s": run_times})


# --------------------------------------------------------------------------
# Uncertainty: confidence-accuracy curves and member-spread grids
# --------------------------------------------------------------------------


def _grid_bbox(cfg: ExperimentConfig, real: RealData) -> list:
    bbox = cfg.section("uq")["grid"]["bbox"]
    if bbox is not None:
        return list(bbox)
    X = real.full.features
    lo, hi = X.min(axis=0), X.max(axis=0)
    pad = 0.1 * (hi - lo)
    return [float(lo[0] - pad[0]), float(hi[0] + pad[0]), float(lo[1] - pad[1]), float(hi[1] + pad[1])]


def _uq_ensembles(cfg: ExperimentConfig, real: RealData, run: RngStream) -> dict:
    sec = cfg.section("uq")
    spec = cfg.downstream
    wanted = sec["approaches"]
    size = sec["ensemble_size"]
    bundle = make_bundle(cfg, real, run) if set(wanted) - {"oracle"} else None
    ens = {}
    if "oracle" in wanted:
        ens["Oracle"] = [train_classifier(spec, real.train, run.child(4, j)) for j in range(sec["oracle_size"])]
    if "naive_e" in wanted:
        ens["NaiveE"] = [synth_member(spec, bundle.datasets[0], run, 0, j) for j in range(size)]
    if "naive_c" in wanted:
        cat = naive_view(bundle, "concat")
        ens["NaiveC"] = [train_classifier(spec, cat, run.child(3, j)) for j in range(size)]
    if "dge" in wanted:
        ens[f"DGE_{cfg.K}"] = [synth_member(spec, d, run, k) for k, d in enumerate(bundle.datasets)]
    return {a: EnsemblePredictor(m) for a, m in ens.items()}


def _uq_run(cfg: ExperimentConfig, real: RealData, r: int) -> dict:
    sec = cfg.section("uq")
    ensembles = _uq_ensembles(cfg, real, run_stream(cfg, r))
    out = {"curves": {}, "accuracy": {}, "grid_mean_std": {}, "grids": {}, "grid_error": None}
    for a, ens in ensembles.items():
        mean, _ = ensemble_predict(ens, real.test)
        out["curves"][a] = confidence_accuracy_curve(mean, real.test.labels, sec["thresholds"]).to_dict()
        out["accuracy"][a] = accuracy(mean, real.test.labels)
    if sec["grid"]["enabled"]:
        try:
            bbox = _grid_bbox(cfg, real)
            for a, ens in ensembles.items():
                g = uncertainty_grid(ens, bbox, sec["grid"]["resolution"])
                out["grid_mean_std"][a] = g.mean_std
                if r == 0:
                    out["grids"][a] = g.to_dict()
        except DimensionError as e:
            out["grid_error"] = str(e)
    return out


def _uq_labels(cfg: ExperimentConfig) -> list:
    names = {"oracle": "Oracle", "naive_e": "NaiveE", "naive_c": "NaiveC", "dge": f"DGE_{cfg.K}"}
    return [names[a] for a in cfg.section("uq")["approaches"]]


def run_uq_experiment(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    _expect(cfg, "uq")
    real = real or load_real(cfg)
    t0 = time.perf_counter()
    per_run, run_times = _run_all(cfg, _uq_run, real)
    labels = _uq_labels(cfg)
    taus = list(cfg.section("uq")["thresholds"])
    curves = {}
    for a in labels:
        acc = [_mean_or_none([run["curves"][a]["accuracy"][i] for run in per_run]) for i in range(len(taus))]
        cov = [float(np.mean([run["curves"][a]["coverage"][i] for run in per_run])) for i in range(len(taus))]
        curves[a] = {"thresholds": taus, "accuracy": acc, "coverage": cov}
    grid_std = {}
    if per_run[0]["grid_error"] is None and cfg.section("uq")["grid"]["enabled"]:
        grid_std = {a: EvalReport.from_values(a, "grid_std", [run["grid_mean_std"][a] for run in per_run]).to_dict()
                    for a in labels}
    results = {
        "approaches": labels,
        "curves": curves,
        "accuracy": {a: EvalReport.from_values(a, "accuracy", [run["accuracy"][a] for run in per_run]).to_dict()
                     for a in labels},
        "grid_std": grid_std,
        "grid_error": per_run[0]["grid_error"],
        "grids": per_run[0]["grids"],
        "per_run": [{k: run[k] for k in ("curves", "accuracy", "grid_mean_std")} for run in per_run],
    }
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "per_run_s": run_times})


# --------------------------------------------------------------------------
# Subgroups: minority-group accuracy relative to the real-data model
# --------------------------------------------------------------------------


def _subgroup_run(cfg: ExperimentConfig, real: RealData, r: int) -> dict:
    sec = cfg.section("subgroups")
    spec = cfg.downstream
    run = run_stream(cfg, r)
    K = sec["dge_size"]
    bundle = make_bundle(cfg, real, run)
    members = [synth_member(spec, bundle.datasets[k], run, k) for k in range(K)]
    member_probs = np.vstack([predict_proba(m, real.test) for m in members])
    probs = {
        "Oracle": predict_proba(train_classifier(spec, real.train, run.child(4, 0)), real.test),
        "NaiveS": member_probs[0],
        f"DGE_{K}": member_probs.mean(axis=0),
    }
    y = real.test.labels
    groups = minority_subgroups(real.full, numeric=sec["numeric"])
    out = {"overall": {a: accuracy(p, y) for a, p in probs.items()}, "subgroups": []}
    for g in groups:
        mask = g.mask(real.test)
        n = int(mask.sum())
        out["subgroups"].append({"label": g.label, "n_rows": n,
                                 "accuracy": {a: accuracy(p[mask], y[mask]) if n else None
                                              for a, p in probs.items()}})
    return out


def run_subgroups_experiment(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    _expect(cfg, "subgroups")
    real = real or load_real(cfg)
    groups = minority_subgroups(real.full, numeric=cfg.section("subgroups")["numeric"])
    if not groups:
        raise NoSubgroups("no feature has a qualifying minority subgroup")
    t0 = time.perf_counter()
    per_run, run_times = _run_all(cfg, _subgroup_run, real)
    labels = ["Oracle", "NaiveS", f"DGE_{cfg.section('subgroups')['dge_size']}"]
    reports = []
    for i, g in enumerate(groups):
        rows = [run["subgroups"][i] for run in per_run]
        ok = [row for row in rows if row["n_rows"] > 0]
        if not ok:
            continue
        acc = {a: EvalReport.from_values(a, "accuracy", [row["accuracy"][a] for row in ok]) for a in labels}
        rel = {a: EvalReport.from_values(a, "relative_accuracy",
                                         [row["accuracy"][a] - row["accuracy"]["Oracle"] for row in ok])
               for a in labels}
        reports.append(SubgroupReport(g, tuple(row["n_rows"] for row in rows), acc, rel).to_dict())
    overall = {a: EvalReport.from_values(a, "accuracy", [run["overall"][a] for run in per_run]).to_dict()
               for a in labels}
    results = {"approaches": labels, "overall": overall, "subgroups": reports, "per_run": per_run}
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "per_run_s": run_times})


# --------------------------------------------------------------------------
# Sweeps over a generator knob or the synthetic dataset size
# --------------------------------------------------------------------------

RUNNERS = {
    "train": run_train_experiment,
    "evaluate": run_evaluate_experiment,
    "select": run_select_experiment,
    "uq": run_uq_experiment,
    "subgroups": run_subgroups_experiment,
}


def _sweep_curve(base: str, results: dict) -> dict:
    if base == "evaluate":
        means = {rep["approach"]: rep["mean"] for rep in results["reports"]}
        out = {f"{a}_mean": m for a, m in means.items()}
        out.update({f"{a}_bias": b["mean"] for a, b in results["bias"].items()})
        out["tsts_minus_tstr"] = means["Naive"] - means["Oracle"]
        return out
    if base == "select":
        return {f"{a}_spearman": (s["spearman"] or {}).get("mean") for a, s in results["summary"].items()}
    return {f"{rep['approach']}_{rep['metric']}": rep["mean"] for rep in results["reports"]}


def run_sweep(cfg: ExperimentConfig, real: Optional[RealData] = None) -> RunRecord:
    if not cfg.is_sweep:
        raise ConfigError("run_sweep needs a complexity_sweep or size_sweep config")
    real = real or load_real(cfg)
    sweep = cfg.section("sweep")
    t0 = time.perf_counter()
    points, timings = [], []
    for value, sub in cfg.sweep_points():
        rec = RUNNERS[sweep["base"]](sub, real)
        points.append({"value": value, "config_hash": rec.config_hash, "curve": _sweep_curve(sweep["base"], rec.results),
                       "record": rec.to_dict()})
        timings.append(rec.timings)
    results = {"base": sweep["base"], "parameter": sweep["parameter"], "values": list(sweep["values"]),
               "points": points}
    return _record(cfg, results, {"total_s": time.perf_counter() - t0, "points": timings})


def _expect(cfg: ExperimentConfig, kind: str):
    if cfg.experiment != kind:
        raise ConfigError(f"expected a {kind!r} config, got {cfg.experiment!r}")


def run_experiment(cfg: ExperimentConfig) -> RunRecord:
    if cfg.is_sweep:
        return run_sweep(cfg)
    return RUNNERS[cfg.experiment](cfg)
