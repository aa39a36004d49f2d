"""Command-line entry point: ``dge data gen | publish | run <experiment> | report``."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DataError, IoError
from .experiments import load_config, run_experiment
from .generators import GeneratorSpec
from .publish import dge_generate, publish
from .reports import FORMATS, RESULT_FILE, TIMINGS_FILE, dumps_record, table_rows, write_report
from .tabular import RngStream, read_csv, write_csv
from .toys import KINDS, ToySpec, gen_toy

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
RUN_KINDS = ("train", "evaluate", "select", "uq", "subgroups", "sweep")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dge", description="Deep generative ensembles for synthetic tabular data.")
    sub = p.add_subparsers(dest="command", required=True)

    data = sub.add_parser("data", help="toy dataset utilities")
    data_sub = data.add_subparsers(dest="data_command", required=True)
    gen = data_sub.add_parser("gen", help="write a toy dataset to CSV")
    gen.add_argument("--kind", choices=KINDS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=float, default=None, help="moons/circles noise std (default per kind)")
    gen.add_argument("--out", required=True)

    pub = sub.add_parser("publish", help="fit K seeded generators and publish K synthetic datasets")
    pub.add_argument("--real", required=True, help="real training CSV")
    pub.add_argument("--label", default=None, help="label column (default: last column)")
    pub.add_argument("--positive-label", default=None)
    pub.add_argument("--class", dest="generator_class", choices=("gmm", "kde", "catproduct", "composite"),
                     required=True)
    pub.add_argument("--numeric-kind", choices=("gmm", "kde"), default="kde", help="numeric block of composite")
    pub.add_argument("--bandwidth-scale", type=float, default=1.0)
    pub.add_argument("--components", type=int, default=1, help="GMM components per class")
    pub.add_argument("--smoothing", type=float, default=1.0, help="categorical Dirichlet smoothing")
    pub.add_argument("--n-train-cap", type=int, default=None)
    pub.add_argument("--k", type=int, default=20)
    pub.add_argument("--n-synth", type=int, default=2000)
    pub.add_argument("--seed", type=int, default=0)
    pub.add_argument("--disjoint-train", action="store_true", help="give each generator its own slice of the data")
    pub.add_argument("--save-models", action="store_true", help="also write generator_k{i}.json")
    pub.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("kind", choices=RUN_KINDS)
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None, help="output directory (default: config output_dir or runs/<name>)")

    rep = sub.add_parser("report", help="render a run directory")
    rep.add_argument("--in", dest="run_dir", required=True)
    rep.add_argument("--format", choices=FORMATS, default="csv")
    rep.add_argument("--out", default=None, help="output directory (default: the run directory)")
    return p


def _cmd_data_gen(args) -> int:
    spec = ToySpec(args.kind, args.n, noise=args.noise, seed=args.seed)
    data = gen_toy(spec)
    write_csv(data, args.out)
    n0, n1 = data.class_counts()
    print(f"wrote {data.n_rows} rows ({n0} negative, {n1} positive) to {args.out}")
    return EXIT_OK


def _cmd_publish(args) -> int:
    spec = GeneratorSpec(kind=args.generator_class, components_per_class=args.components,
                         bandwidth_scale=args.bandwidth_scale, dirichlet_smoothing=args.smoothing,
                         numeric_kind=args.numeric_kind, n_train_cap=args.n_train_cap)
    if args.k < 1 or args.n_synth < 1:
        raise ConfigError("--k and --n-synth must be >= 1")
    real = read_csv(args.real, label_name=args.label, positive_label=args.positive_label)
    bundle = dge_generate(spec, real, args.k, args.n_synth, RngStream(args.seed),
                          disjoint_train=args.disjoint_train, keep_models=args.save_models)
    out = publish(bundle, args.out)
    print(f"published {bundle.K} datasets of {args.n_synth} rows to {out}")
    return EXIT_OK


def _print_table(rows: list):
    widths = [max(len(str(r[i])) for r in rows) for i in range(len(rows[0]))]
    for r in rows:
        cells = []
        for i, c in enumerate(r):
            try:
                c = f"{float(c):.4f}" if c and "." in c else c
            except ValueError:
                pass
            cells.append(str(c).ljust(min(widths[i], 24)))
        print("  ".join(cells).rstrip())


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    expected = cfg.experiment if not cfg.is_sweep else "sweep"
    if args.kind != expected:
        raise ConfigError(f"config describes a {cfg.experiment!r} experiment, not {args.kind!r}")
    out = Path(args.out) if args.out else (cfg.output_dir or Path("runs") / cfg.name)
    record = run_experiment(cfg)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / RESULT_FILE).write_text(dumps_record(record.to_dict()), encoding="utf-8")
        (out / TIMINGS_FILE).write_text(json.dumps(record.timings, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        raise IoError(str(e)) from e
    _print_table(table_rows(record.to_dict()))
    print(f"results written to {out / RESULT_FILE} ({record.timings.get('total_s', 0.0):.1f} s)")
    return EXIT_OK


def _cmd_report(args) -> int:
    for path in write_report(args.run_dir, args.format, args.out):
        print(path)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"data": _cmd_data_gen, "publish": _cmd_publish, "run": _cmd_run, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
