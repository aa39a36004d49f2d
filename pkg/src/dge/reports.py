"""Render a stored run record as CSV tables, JSON, or SVG plots."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

from .errors import ConfigError, IoError

RESULT_FILE = "result.json"
TIMINGS_FILE = "timings.json"
FORMATS = ("csv", "json", "svg")


def dumps_record(record: dict) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(record, sort_keys=True, indent=2, allow_nan=False) + "\n"


def load_record(run_dir) -> dict:
    path = Path(run_dir) / RESULT_FILE
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise IoError(f"no {RESULT_FILE} in {run_dir}") from e
    except OSError as e:
        raise IoError(str(e)) from e


def _dataset_name(record: dict) -> str:
    data = record["config"]["data"]
    if "name" in data:
        return data["name"]
    return data["toy"]["kind"] if "toy" in data else Path(data["csv"]).stem


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def table_rows(record: dict) -> list:
    """Header plus rows: one line per approach x dataset (x metric or model) cell."""
    exp = record["experiment"]
    res = record["results"]
    ds = _dataset_name(record)
    if exp in ("train", "evaluate"):
        rows = [["approach", "dataset", "metric", "mean", "std", "n_runs"]]
        for rep in res["reports"]:
            rows.append([rep["approach"], ds, rep["metric"], _fmt(rep["mean"]), _fmt(rep["std"]),
                         str(len(rep["values"]))])
        return rows
    if exp == "select":
        rows = [["approach", "dataset", "model", "metric", "mean", "std", "mean_rank",
                 "spearman_mean", "spearman_std"]]
        for a in res["approaches"]:
            s = res["summary"][a]
            rho = s["spearman"] or {}
            for m in res["models"]:
                sc = s["scores"][m]
                rows.append([a, ds, m, sc["metric"], _fmt(sc["mean"]), _fmt(sc["std"]),
                             _fmt(s["mean_rank"][m]), _fmt(rho.get("mean")), _fmt(rho.get("std"))])
        return rows
    if exp == "uq":
        rows = [["approach", "dataset", "quantity", "threshold", "mean", "std"]]
        for a in res["approaches"]:
            c = res["curves"][a]
            for t, acc, cov in zip(c["thresholds"], c["accuracy"], c["coverage"]):
                rows.append([a, ds, "selective_accuracy", _fmt(t), _fmt(acc), ""])
                rows.append([a, ds, "coverage", _fmt(t), _fmt(cov), ""])
            acc = res["accuracy"][a]
            rows.append([a, ds, "accuracy", "", _fmt(acc["mean"]), _fmt(acc["std"])])
            if a in res["grid_std"]:
                g = res["grid_std"][a]
                rows.append([a, ds, "grid_std", "", _fmt(g["mean"]), _fmt(g["std"])])
        return rows
    if exp == "subgroups":
        rows = [["approach", "dataset", "subgroup", "fraction", "accuracy_mean", "accuracy_std",
                 "relative_mean", "relative_std"]]
        for a in res["approaches"]:
            o = res["overall"][a]
            rows.append([a, ds, "all", "1.0", _fmt(o["mean"]), _fmt(o["std"]), "", ""])
            for rep in res["subgroups"]:
                acc, rel = rep["accuracy"][a], rep["relative"][a]
                rows.append([a, ds, rep["subgroup"]["label"], _fmt(rep["subgroup"]["fraction"]),
                             _fmt(acc["mean"]), _fmt(acc["std"]), _fmt(rel["mean"]), _fmt(rel["std"])])
        return rows
    if exp in ("complexity_sweep", "size_sweep"):
        keys = sorted({k for p in res["points"] for k in p["curve"]})
        rows = [[res["parameter"], "dataset"] + keys]
        for p in res["points"]:
            rows.append([_fmt(p["value"]), ds] + [_fmt(p["curve"].get(k)) for k in keys])
        return rows
    raise ConfigError(f"unknown experiment kind {exp!r} in record")


def to_csv(record: dict) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table_rows(record))
    return buf.getvalue()


# --------------------------------------------------------------------------
# SVG
# --------------------------------------------------------------------------


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "dge"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def _save(plt, fig, path: Path):
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as e:
        raise IoError(str(e)) from e
    finally:
        plt.close(fig)


def _bar_plot(plt, labels, means, stds, ylabel, title, path):
    fig, ax = plt.subplots(figsize=(max(4, 0.9 * len(labels)), 3.5))
    ax.bar(range(len(labels)), means, yerr=stds, capsize=3, color="#4c72b0")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    lo = min(m - s for m, s in zip(means, stds))
    hi = max(m + s for m, s in zip(means, stds))
    pad = 0.1 * (hi - lo) + 1e-3
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    _save(plt, fig, path)


def write_svgs(record: dict, out_dir) -> list:
    """One or more SVG plots for the record; returns the written paths."""
    plt = _figure()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp = record["experiment"]
    res = record["results"]
    written = []
    if exp in ("train", "evaluate"):
        metric = res["reports"][0]["metric"]
        reps = [r for r in res["reports"] if r["metric"] == metric]
        path = out / f"{exp}_{metric}.svg"
        _bar_plot(plt, [r["approach"] for r in reps], [r["mean"] for r in reps], [r["std"] for r in reps],
                  metric, f"{exp}: {_dataset_name(record)}", path)
        written.append(path)
    elif exp == "select":
        fig, ax = plt.subplots(figsize=(6, 3.5))
        for a in res["approaches"]:
            ranks = [res["summary"][a]["mean_rank"][m] for m in res["models"]]
            ax.plot(range(len(ranks)), ranks, marker="o", label=a)
        ax.set_xticks(range(len(res["models"])))
        ax.set_xticklabels(res["models"], rotation=30, ha="right")
        ax.set_ylabel("mean rank (1 = best)")
        ax.invert_yaxis()
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / "select_ranks.svg"
        _save(plt, fig, path)
        written.append(path)
    elif exp == "uq":
        fig, ax = plt.subplots(figsize=(5, 3.5))
        for a in res["approaches"]:
            c = res["curves"][a]
            pts = [(t, v) for t, v in zip(c["thresholds"], c["accuracy"]) if v is not None]
            ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=a)
        ax.set_xlabel("confidence threshold")
        ax.set_ylabel("accuracy on selected rows")
        ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / "uq_curves.svg"
        _save(plt, fig, path)
        written.append(path)
        for a, g in sorted(res["grids"].items()):
            fig, ax = plt.subplots(figsize=(4.5, 3.8))
            mesh = ax.pcolormesh(g["xs"], g["ys"], g["std"], shading="auto", cmap="viridis")
            fig.colorbar(mesh, ax=ax, label="member std")
            for line in g["boundary"]:
                if line:
                    ax.plot([p[0] for p in line], [p[1] for p in line], "w:", lw=1.5)
            ax.set_xlabel(g["feature_names"][0])
            ax.set_ylabel(g["feature_names"][1])
            ax.set_title(a)
            fig.tight_layout()
            path = out / f"uq_grid_{a}.svg"
            _save(plt, fig, path)
            written.append(path)
    elif exp == "subgroups":
        labels, means, stds = [], [], []
        for rep in res["subgroups"]:
            for a in res["approaches"]:
                if a == "Oracle":
                    continue
                labels.append(f"{rep['subgroup']['label']} {a}")
                means.append(rep["relative"][a]["mean"])
                stds.append(rep["relative"][a]["std"])
        path = out / "subgroups_relative.svg"
        _bar_plot(plt, labels, means, stds, "accuracy minus oracle", "minority subgroups", path)
        written.append(path)
    else:
        rows = table_rows(record)
        keys = rows[0][2:]
        xs = [float(r[0]) for r in rows[1:]]
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        for i, k in enumerate(keys):
            ys = [float(r[2 + i]) if r[2 + i] else float("nan") for r in rows[1:]]
            ax.plot(xs, ys, marker="o", label=k)
        ax.set_xscale("log")
        ax.set_xlabel(res["parameter"])
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out / f"{exp}.svg"
        _save(plt, fig, path)
        written.append(path)
    return written


def write_report(run_dir, fmt: str, out=None) -> list:
    """Write ``report.csv`` / ``report.json`` / SVG plots for a run directory."""
    if fmt not in FORMATS:
        raise ConfigError(f"unknown report format {fmt!r}; expected one of {FORMATS}")
    record = load_record(run_dir)
    out_dir = Path(out) if out is not None else Path(run_dir)
    if fmt == "svg":
        return write_svgs(record, out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"report.{fmt}"
    text = to_csv(record) if fmt == "csv" else dumps_record(record)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise IoError(str(e)) from e
    return [path]
