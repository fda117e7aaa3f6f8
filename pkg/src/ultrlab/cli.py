"""Command-line front end: data generation, training runs, evaluation, the
causal oracle demo, and curve aggregation for plotting.

Configuration is one JSON object mirroring ExperimentConfig (with a nested
"simulation" section); any key can be overridden on the command line with
`--set key=value` using dotted paths, e.g. `--set simulation.eta=2`.
"""

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .autodiff import load_params, save_params
from .causal import ToyCausalModel, overestimation_report
from .clicks import PositionBiasCurve
from .data import generate_synthetic, parse_svmlight, serialize_svmlight
from .ranker import RankerMLP
from .seeding import derive_seed
from .training import (
    CURVE_COLUMNS,
    ExperimentConfig,
    SplitData,
    evaluate_ranker,
    make_split_data,
    run_experiment,
)
from .training import DatasetView


def _load_config(path, overrides):
    cfg_dict = ExperimentConfig().as_dict()
    if path is not None:
        with open(path) as fh:
            loaded = json.load(fh)
        for key, value in loaded.items():
            if key == "simulation":
                cfg_dict["simulation"].update(value)
            elif key in cfg_dict:
                cfg_dict[key] = value
            else:
                raise ValueError(f"unknown config key {key!r}")
    for item in overrides or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"--set needs key=value, got {item!r}")
        target = cfg_dict
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in target or not isinstance(target[part], dict):
                raise ValueError(f"unknown config section {part!r}")
            target = target[part]
        if parts[-1] not in target:
            raise ValueError(f"unknown config key {key!r}")
        try:
            target[parts[-1]] = json.loads(value)
        except json.JSONDecodeError:
            target[parts[-1]] = value
    return cfg_dict


def _load_split(data_dir) -> SplitData:
    root = Path(data_dir)
    train_path, test_path = root / "train.txt", root / "test.txt"
    for p in (train_path, test_path):
        if not p.exists():
            raise ValueError(f"missing data file {p}")
    return SplitData(
        train=parse_svmlight(train_path.read_text(), split="train"),
        test=parse_svmlight(test_path.read_text(), split="test"),
    )


def cmd_gen_data(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = [("train.txt", args.train_queries, "train"),
             ("test.txt", args.test_queries, "test")]
    teacher = derive_seed(args.seed, "data", "teacher")
    for filename, n_queries, split in specs:
        ds = generate_synthetic(n_queries, args.docs, args.features,
                                derive_seed(args.seed, "data", split), split=split,
                                teacher_seed=teacher)
        (out / filename).write_text(serialize_svmlight(ds))
        print(f"wrote {out / filename} ({n_queries} queries x {args.docs} docs)")
    return 0


def _train_one_seed(cfg_dict: dict, data_dir, out_dir: str, curve_path):
    cfg = ExperimentConfig.from_dict(cfg_dict)
    data = _load_split(data_dir) if data_dir else make_split_data()
    curve = PositionBiasCurve.from_file(curve_path) if curve_path else None
    result = run_experiment(cfg, data, curve=curve)
    out = Path(out_dir)
    curves_path = out / f"curves_seed{cfg.seed}.csv"
    curves_path.write_text(result.curves_csv())
    model_path = out / f"model_seed{cfg.seed}.npz"
    save_params(model_path, result.ranker.parameters())
    prop_path = out / f"propensity_seed{cfg.seed}.csv"
    prop_path.write_text(result.final_estimate.as_csv())
    return {
        "seed": cfg.seed,
        "curves": curves_path.name,
        "model": model_path.name,
        "propensity": prop_path.name,
        "duration_s": result.duration_s,
        "final_metrics": result.final_metrics,
    }


def _parse_seeds(args):
    if args.seeds:
        lo, sep, hi = args.seeds.partition("..")
        if not sep:
            raise ValueError("--seeds wants a range like 0..4")
        return list(range(int(lo), int(hi) + 1))
    return [args.seed]


def cmd_train(args) -> int:
    started = time.monotonic()
    cfg_dict = _load_config(args.config, args.set)
    if args.algorithm:
        cfg_dict["algorithm"] = args.algorithm
    if args.paradigm:
        cfg_dict["paradigm"] = args.paradigm
    seeds = _parse_seeds(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    jobs = []
    for seed in seeds:
        per_seed = dict(cfg_dict)
        per_seed["seed"] = seed
        jobs.append((per_seed, args.data, str(out), args.curve))

    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            entries = list(pool.map(_train_one_seed, *zip(*jobs)))
    else:
        entries = [_train_one_seed(*job) for job in jobs]

    manifest = {
        "artifact_version": __version__,
        "config": cfg_dict,
        "master_seed": seeds[0],
        "seeds": seeds,
        "data": str(args.data) if args.data else "synthetic-default",
        "results": {str(e["seed"]): e for e in entries},
        "wall_clock_s": time.monotonic() - started,
    }
    for entry in entries:
        for key in ("curves", "model", "propensity"):
            if not (out / entry[key]).exists():
                raise ValueError(f"expected output {entry[key]} was not written")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {out / 'manifest.json'} ({len(seeds)} seed(s))")
    return 0


def cmd_eval(args) -> int:
    cfg = ExperimentConfig.from_dict(_load_config(args.config, args.set))
    data = _load_split(args.data) if args.data else make_split_data()
    dataset = data.test if args.split == "test" else data.train
    view = DatasetView(dataset)
    ranker = RankerMLP(dataset.feature_dim, np.random.default_rng(0),
                       hidden=cfg.ranker_hidden, dropout=cfg.dropout)
    load_params(args.model, ranker.parameters())
    metrics = evaluate_ranker(ranker, view, y_max=cfg.simulation.y_max)
    print(json.dumps(metrics, indent=2))
    return 0


def cmd_oracle_demo(args) -> int:
    model = ToyCausalModel.reference(epsilon=args.epsilon)
    if args.preset == "weak":
        model = model.with_weak_policy()
    report = overestimation_report(model)
    print(report.as_text_table())
    print()
    print(report.as_csv(), end="")
    if args.csv:
        Path(args.csv).write_text(report.as_csv())
        print(f"wrote {args.csv}")
    return 0


def cmd_export_curves(args) -> int:
    run_dir = Path(args.runs)
    manifest_path = run_dir / "manifest.json"
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text())
        files = [run_dir / e["curves"] for e in manifest["results"].values()]
    else:
        files = sorted(run_dir.glob("curves_seed*.csv"))
    if not files:
        raise ValueError(f"no curve CSVs found under {run_dir}")

    rows = []
    for path in files:
        with open(path) as fh:
            rows.extend(csv.DictReader(fh))

    metric_cols = [c for c in CURVE_COLUMNS if c not in ("step", "algorithm", "seed")]
    grouped = {}
    for row in rows:
        grouped.setdefault((row["algorithm"], int(row["step"])), []).append(row)

    out_path = Path(args.out)
    header = ["step", "algorithm", "n_seeds"]
    for col in metric_cols:
        header += [f"mean_{col}", f"std_{col}"]
    lines = [",".join(header)]
    for (algorithm, step) in sorted(grouped, key=lambda k: (k[0], k[1])):
        bucket = grouped[(algorithm, step)]
        cells = [str(step), algorithm, str(len(bucket))]
        for col in metric_cols:
            vals = np.array([float(r[col]) for r in bucket])
            std = vals.std(ddof=1) if vals.size > 1 else 0.0
            cells += [repr(float(vals.mean())), repr(float(std))]
        lines.append(",".join(cells))
    out_path.write_text("\n".join(lines) + "\n")
    print(f"wrote {out_path} ({len(grouped)} step rows)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ultrlab",
        description="Desk-scale unbiased learning-to-rank laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write synthetic SVMlight train/test files")
    p.add_argument("--out", required=True)
    p.add_argument("--train-queries", type=int, default=500)
    p.add_argument("--test-queries", type=int, default=100)
    p.add_argument("--docs", type=int, default=10)
    p.add_argument("--features", type=int, default=16)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run one experiment over one or more seeds")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (dotted paths allowed)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--data", help="directory from gen-data; default regenerates")
    p.add_argument("--curve", help="file with one examination probability per line")
    p.add_argument("--algorithm", choices=["upe", "dla", "naive", "ipw_oracle"])
    p.add_argument("--paradigm", choices=["OnD", "Off"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", help="inclusive range like 0..4")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved ranker snapshot on a split")
    p.add_argument("--model", required=True, help="model npz from train")
    p.add_argument("--data", help="directory from gen-data; default regenerates")
    p.add_argument("--split", choices=["train", "test"], default="test")
    p.add_argument("--config", help="JSON config file (for model shape)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("oracle-demo", help="print the exact overestimation report")
    p.add_argument("--preset", choices=["strong", "weak"], default="strong")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="click noise on examined documents")
    p.add_argument("--csv", help="also write the CSV here")
    p.set_defaults(func=cmd_oracle_demo)

    p = sub.add_parser("export-curves", help="merge per-seed curves to mean/std rows")
    p.add_argument("--runs", required=True, help="train output directory")
    p.add_argument("--out", required=True, help="merged CSV path")
    p.set_defaults(func=cmd_export_curves)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
