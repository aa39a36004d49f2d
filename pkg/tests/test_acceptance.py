"""Acceptance criteria, each checked at its stated tolerance and time budget.

Every test prints one ``PASS``/``FAIL`` line with the measured values, then
asserts. The long reproductions read their configs from
``configs/acceptance/`` and are marked ``slow``.
"""
import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import kstest, norm

from dge.classifiers.mlp import init_params, loss_and_grad
from dge.evaluation import StatisticSamples, auc, mc_stats, minority_subgroups
from dge.experiments import load_config, run_experiment
from dge.generators.mixture import fit_mixture
from dge.tabular import Column, Schema, TabularDataset

CONFIGS = Path(__file__).resolve().parent.parent / "configs" / "acceptance"


@pytest.fixture
def verdict(capsys):
    def report(criterion: int, ok: bool, detail: str, seconds: float):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail} [{seconds:.1f} s]")
        assert ok, detail

    return report


def run_config(name: str):
    t0 = time.perf_counter()
    rec = run_experiment(load_config(CONFIGS / name))
    return rec.results, time.perf_counter() - t0


# ---- 1: exact oracles ----

def _pair_count(s, y):
    pos = s[y == 1]
    neg = s[y == 0]
    return (np.sum(pos[:, None] > neg[None, :]) + 0.5 * np.sum(pos[:, None] == neg[None, :])) / (len(pos) * len(neg))


def _subgroup_fixtures():
    """20 fixtures with hand-enumerated expected subgroups ``(feature, rule, level or threshold, rows)``."""
    out = []
    cat_cases = [
        ({"A": 70, "B": 25, "C": 5}, "C"),
        ({"A": 997, "B": 3}, None),
        ({"A": 90, "B": 10}, "B"),
        ({"A": 80, "B": 20}, None),
        ({"A": 50, "B": 50}, None),
        ({"A": 85, "B": 10, "C": 5}, "C"),
        ({"A": 88, "B": 6, "C": 6}, "B"),
        ({"A": 994, "B": 5, "C": 1}, None),
        ({"A": 190, "B": 6, "C": 4}, "C"),
        ({"A": 60, "B": 19, "C": 21}, "B"),
        ({"A": 100, "B": 0, "C": 10}, "C"),
        ({"A": 1, "B": 99}, "A"),
    ]
    for counts, expected in cat_cases:
        levels = tuple(counts)
        codes = np.repeat(np.arange(len(levels)), list(counts.values())).astype(float)
        schema = Schema.build([Column("c", levels)])
        d = TabularDataset(schema, codes[:, None], np.arange(len(codes)) % 2)
        rows = None if expected is None else int(counts[expected])
        out.append((d, [] if expected is None else [("c", "category", expected, rows)]))
    num_cases = [
        (np.arange(1, 1001), 901.0, 100),
        (np.arange(1, 11), 10.0, 1),
        (np.arange(1, 12), 10.0, 2),
        (np.arange(1, 21), 19.0, 2),
        (np.r_[np.zeros(95), np.ones(5)], 0.0, 100),
        (np.r_[np.zeros(90), np.ones(10)], 1.0, 10),
        (np.arange(100, 0, -1), 91.0, 10),
        (np.r_[np.arange(1, 10), 5, 5], 8.0, 2),
    ]
    for x, threshold, rows in num_cases:
        d = TabularDataset(Schema.build([Column("age")]), np.asarray(x, float)[:, None], np.arange(len(x)) % 2)
        out.append((d, [("age", "top_decile", threshold, rows)]))
    return out


def test_criterion_1_exact_oracles(verdict):
    t0 = time.perf_counter()
    gen = np.random.default_rng(2024)
    worst_auc = 0.0
    for _ in range(100):
        n = int(gen.integers(2, 51))
        y = gen.integers(0, 2, n)
        y[:2] = [0, 1]
        s = np.round(gen.random(n), int(gen.integers(1, 4)))  # rounding creates ties
        worst_auc = max(worst_auc, abs(auc(s, y) - _pair_count(s, y)))
    worst_mc = 0.0
    for _ in range(100):
        v = gen.normal(gen.uniform(-3, 3), gen.uniform(0.01, 2), int(gen.integers(2, 40)))
        mean = sum(v) / len(v)
        var = sum((x - mean) ** 2 for x in v) / (len(v) - 1)
        m, s2 = mc_stats(StatisticSamples(tuple(v)))
        worst_mc = max(worst_mc, abs(m - mean), abs(s2 - var))
    mismatches = 0
    fixtures = _subgroup_fixtures()
    for data, expected in fixtures:
        got = []
        for g in minority_subgroups(data):
            key = g.level if g.rule == "category" else g.threshold
            got.append((g.feature, g.rule, key, int(g.mask(data).sum())))
        mismatches += got != expected
    seconds = time.perf_counter() - t0
    ok = worst_auc <= 1e-12 and worst_mc <= 1e-12 and mismatches == 0 and len(fixtures) == 20 and seconds < 10
    verdict(1, ok, f"max |auc - pairs| {worst_auc:.1e}, max mc_stats error {worst_mc:.1e}, "
                   f"subgroup mismatches {mismatches}/{len(fixtures)}", seconds)


# ---- 2: numerical core ----

def test_criterion_2_numerical_core(verdict):
    t0 = time.perf_counter()
    worst_step = math.inf
    for fit_id in range(100):
        gen = np.random.default_rng(fit_id)
        centres = gen.normal(0, 3, (3, 2))
        X = np.vstack([gen.normal(c, gen.uniform(0.3, 1.2), (70, 2)) for c in centres])
        _, trace, _, _ = fit_mixture(X, 2 + fit_id % 4, gen)
        worst_step = min(worst_step, float(np.diff(trace).min()) if len(trace) > 1 else 0.0)

    worst_grad = 0.0
    for cfg in range(20):
        gen = np.random.default_rng(10_000 + cfg)
        d = int(gen.integers(1, 6))
        hidden = tuple(int(h) for h in gen.integers(2, 8, size=int(gen.integers(1, 4))))
        X = gen.standard_normal((16, d))
        y = gen.integers(0, 2, 16).astype(float)
        params = init_params([d, *hidden, 1], gen)
        for p in params[1::2]:
            p += gen.normal(0, 0.1, p.shape)
        _, grads = loss_and_grad(params, X, y, 1e-4)
        h = 1e-5
        for p, g in zip(params, grads):
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + h
                up, _ = loss_and_grad(params, X, y, 1e-4)
                p[idx] = old - h
                down, _ = loss_and_grad(params, X, y, 1e-4)
                p[idx] = old
                fd = (up - down) / (2 * h)
                worst_grad = max(worst_grad, abs(fd - g[idx]) / max(abs(fd) + abs(g[idx]), 1e-7))

    gen = np.random.default_rng(7)
    x = np.r_[gen.normal(-2, 0.5, 400), gen.normal(1.5, 1.0, 600)][:, None]
    gm, _, _, _ = fit_mixture(x, 2, gen)
    draws = gm.sample(100_000, np.random.default_rng(8))[:, 0]
    sd = np.sqrt(gm.covs[:, 0, 0])
    ks = kstest(draws, lambda v: sum(w * norm.cdf((v - m) / s)
                                     for w, m, s in zip(gm.weights, gm.means[:, 0], sd))).statistic
    seconds = time.perf_counter() - t0
    ok = worst_step >= -1e-9 and worst_grad < 1e-4 and ks < 0.01 and seconds < 120
    verdict(2, ok, f"min EM step {worst_step:.2e} over 100 fits, max gradient rel. error {worst_grad:.2e}, "
                   f"KS {ks:.4f}", seconds)


# ---- 3: ensemble size improves TSTR ----

@pytest.mark.slow
def test_criterion_3_train_direction(verdict):
    lines, ok, total = [], True, 0.0
    for toy in ("moons", "gaussian"):
        res, seconds = run_config(f"train_{toy}.yaml")
        total += seconds
        m = {r["approach"]: r["mean"] for r in res["reports"] if r["metric"] == "auc"}
        monotone = m["DGE_20"] >= m["DGE_10"] - 0.005 and m["DGE_10"] >= m["DGE_5"] - 0.005 \
            and m["DGE_5"] >= m["NaiveS"] - 0.005
        gain = m["DGE_20"] - m["NaiveS"]
        ok &= monotone and gain >= 0.005
        lines.append(f"{toy}: NaiveS {m['NaiveS']:.4f} DGE_5 {m['DGE_5']:.4f} DGE_10 {m['DGE_10']:.4f} "
                     f"DGE_20 {m['DGE_20']:.4f} gain {gain:+.4f}")
    verdict(3, ok and total < 600, "; ".join(lines), total)


# ---- 4: naive evaluation overestimates, cross-set evaluation does not ----

@pytest.mark.slow
def test_criterion_4_evaluation_bias(verdict):
    res, seconds = run_config("evaluate_gaussian.yaml")
    points = {p["value"]: p["record"]["results"]["bias"] for p in res["points"]}
    over, under = points[0.02], points[20.0]
    naive_gap = over["Naive"]["mean"]
    closer = sum(abs(d) < n for d, n in zip(over["DGE_19"]["per_run"], over["Naive"]["per_run"]))
    a, b = under["Naive"]["mean_abs"], under["DGE_19"]["mean_abs"]
    ratio = max(a, b) / min(a, b)
    ok = naive_gap >= 0.03 and closer >= 16 and ratio <= 2.0 and seconds < 600
    verdict(4, ok, f"naive TSTS-TSTR gap {naive_gap:+.4f}, DGE_19 closer to oracle in {closer}/20 runs, "
                   f"underfit |bias| naive {a:.4f} vs DGE_19 {b:.4f} (ratio {ratio:.2f})", seconds)


# ---- 5: model ranking ----

@pytest.mark.slow
def test_criterion_5_ranking(verdict):
    res, seconds = run_config("select_moons.yaml")
    s = res["summary"]
    dge, naive = s["DGE_10"]["spearman"]["mean"], s["Naive"]["spearman"]["mean"]
    ok = dge >= naive and dge >= 0.7 and seconds < 900
    verdict(5, ok, f"mean Spearman vs oracle ranking: DGE_10 {dge:.3f}, naive {naive:.3f}", seconds)


# ---- 6 and 7: uncertainty ----

@pytest.fixture(scope="module")
def uq_runs():
    res, seconds = run_config("uq_gaussian.yaml")
    ctrl, ctrl_seconds = run_config("uq_gaussian_identical.yaml")
    return res, seconds, ctrl, ctrl_seconds


@pytest.mark.slow
def test_criterion_6_grid_std(verdict, uq_runs):
    res, seconds, ctrl, ctrl_seconds = uq_runs
    gs = {a: r["mean"] for a, r in res["grid_std"].items()}
    ratio = gs["DGE_20"] / gs["NaiveE"]
    ctrl_ratio = ctrl["grid_std"]["DGE_20"]["mean"] / ctrl["grid_std"]["NaiveE"]["mean"]
    total = seconds + ctrl_seconds
    ok = ratio >= 2.0 and gs["NaiveC"] < gs["DGE_20"] and abs(ctrl_ratio - 1.0) <= 0.2 and total < 300
    verdict(6, ok, f"grid std DGE_20 {gs['DGE_20']:.4f}, NaiveE {gs['NaiveE']:.4f} (ratio {ratio:.2f}), "
                   f"NaiveC {gs['NaiveC']:.4f}; identical-sets control ratio {ctrl_ratio:.2f}", total)


@pytest.mark.slow
def test_criterion_7_selective_accuracy(verdict, uq_runs):
    res, seconds, _, _ = uq_runs
    curves = res["curves"]
    taus = curves["DGE_20"]["thresholds"]
    wanted = [0.5, 0.6, 0.7, 0.8]
    dge = dict(zip(taus, curves["DGE_20"]["accuracy"]))
    nav = dict(zip(taus, curves["NaiveE"]["accuracy"]))
    not_worse = all(dge[t] is not None and nav[t] is not None and dge[t] >= nav[t] - 0.01 for t in wanted)
    strict = sum(dge[t] is not None and nav[t] is not None and dge[t] > nav[t] for t in wanted)
    ok = not_worse and strict >= 2 and seconds < 300
    pairs = ", ".join(f"tau {t}: {dge[t]:.4f} vs {nav[t]:.4f}" for t in wanted)
    verdict(7, ok, f"DGE_20 vs NaiveE selective accuracy {pairs}; strictly better at {strict}", seconds)


# ---- 8: minority subgroup ----

@pytest.mark.slow
def test_criterion_8_minority(verdict):
    res, seconds = run_config("subgroups_minority.yaml")
    (group,) = [g for g in res["subgroups"] if g["subgroup"]["feature"] == "group"]
    acc = group["accuracy"]
    gap = acc["DGE_20"]["mean"] - acc["NaiveS"]["mean"]
    overall = abs(res["overall"]["DGE_20"]["mean"] - res["overall"]["NaiveS"]["mean"])
    ok = gap >= 0.02 and overall < 0.02
    verdict(8, ok, f"minority {group['subgroup']['label']} accuracy DGE_20 {acc['DGE_20']['mean']:.4f} vs "
                   f"NaiveS {acc['NaiveS']['mean']:.4f} (gap {gap:+.4f}); overall difference {overall:.4f}",
            seconds)


# ---- 9: replay ----

def test_criterion_9_replay(verdict, tmp_path):
    t0 = time.perf_counter()
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        subprocess.run([sys.executable, "-m", "dge.cli", "run", "train", "--config",
                        str(CONFIGS / "replay_train.yaml"), "--out", str(out)],
                       check=True, capture_output=True)
        outs.append((out / "result.json").read_bytes())
    ok = outs[0] == outs[1]
    verdict(9, ok, f"two `dge run train` invocations, result.json {len(outs[0])} bytes, identical: {ok}",
            time.perf_counter() - t0)
