"""Command-line pipeline: generate, label, resample, train, evaluate, optimize, serve.

Every subcommand is deterministic for fixed seeds, so rerunning a
command reproduces its artifacts byte for byte.  Errors print one
machine-readable JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import evaluation, oracle, pairs, params
from .model import ScoringModel, TrainConfig, train
from .optimize import Constraints, optimize
from .render import ChartData, render


def _load_grid(args) -> params.ParamGrid:
    if getattr(args, "grid", None):
        return params.ParamGrid.load(args.grid)
    return params.default_grid(args.exp)


def _add_grid_args(p) -> None:
    p.add_argument("--exp", choices=["exp1", "exp2"], default="exp1")
    p.add_argument("--grid", help="grid JSON file (overrides --exp)")


def _cmd_gen_pairs(args) -> int:
    grid = _load_grid(args)
    out = pairs.generate_pairs(grid, args.n, args.seed, provenance=args.provenance)
    with open(args.out, "w") as f:
        for p in out:
            f.write(json.dumps(p.to_json_dict(grid.experiment)) + "\n")
    auto = sum(1 for p in out if p.label is not None)
    print(json.dumps({"pairs": len(out), "auto_labeled": auto, "out": args.out}))
    return 0


def _cmd_calibrate_oracle(args) -> int:
    grid = _load_grid(args)
    base = oracle.OracleConfig(ground_truth=args.ground_truth, seed=args.seed)
    cfg, report = oracle.calibrate_beta(
        grid, base, target=args.target, n_pairs=args.n_pairs, seed=args.seed
    )
    oracle.save_config(cfg, args.out)
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))
    return 0


def _cmd_label(args) -> int:
    raw = []
    with open(args.pairs) as f:
        experiment = "custom"
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            experiment = d.get("experiment", experiment)
            raw.append(pairs.ComparisonPair.from_json_dict(d))
    if args.oracle:
        cfg = oracle.load_config(args.oracle)
    else:
        cfg = oracle.OracleConfig(
            ground_truth=args.ground_truth, beta=args.beta, seed=args.seed
        )
    ds, report = pairs.label_pairs(raw, cfg, experiment)
    ds.save_jsonl(args.out)
    print(json.dumps({**report, "out": args.out}))
    return 0


def _cmd_resample(args) -> int:
    grid = _load_grid(args)
    if args.mode == "importance":
        ds = pairs.Dataset.load_jsonl(args.dataset)
        new_grid = pairs.importance_resample(grid, ds, cap=args.cap)
    else:
        model = ScoringModel.load(args.model)
        new_grid = pairs.gradient_resample(
            grid, model, threshold=args.threshold, refine_factor=args.refine_factor
        )
    new_grid.save(args.out)
    print(
        json.dumps(
            {
                "mode": args.mode,
                "out": args.out,
                "cells": new_grid.size,
                "values": {n: len(new_grid.values[n]) for n in params.PARAM_ORDER},
            }
        )
    )
    return 0


def _cmd_train(args) -> int:
    ds = pairs.Dataset.load_jsonl(args.dataset)
    grid = (
        params.ParamGrid.load(args.grid)
        if args.grid
        else params.default_grid(ds.experiment)
    )
    cfg = TrainConfig(
        margin=args.margin,
        epochs=args.epochs,
        dropout=args.dropout,
        batch_size=args.batch_size,
        seed=args.seed,
    )
    model, history = train(ds, grid, cfg)
    model.save(args.out)
    if args.loss_csv:
        with open(args.loss_csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["epoch", "train_loss", "val_loss"])
            for i, (tr, va) in enumerate(zip(history["train_loss"], history["val_loss"])):
                w.writerow([i, repr(tr), repr(va)])
    print(
        json.dumps(
            {
                "out": args.out,
                "pairs": len(ds.labeled),
                "best_val_loss": history["best_val_loss"],
            }
        )
    )
    return 0


def _cmd_eval(args) -> int:
    ds = pairs.Dataset.load_jsonl(args.dataset)
    grid = params.ParamGrid.load(args.grid) if args.grid else params.default_grid(ds.experiment)
    report = evaluation.mccv(
        ds, args.method, runs=args.runs, split=args.split, seed=args.seed, grid=grid
    )
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2) + "\n")
    print(json.dumps(report))
    return 0


def _cmd_analyze(args) -> int:
    model = ScoringModel.load(args.model)
    grid = _load_grid(args)
    ds = pairs.Dataset.load_jsonl(args.dataset) if args.dataset else None
    paths = evaluation.export_analysis(
        model, grid, args.out_dir, dataset=ds, samples=args.samples, seed=args.seed
    )
    print(json.dumps(paths))
    return 0


def _load_chart_data(path: str) -> ChartData:
    p = Path(path)
    if p.suffix.lower() == ".json":
        d = json.loads(p.read_text())
        return ChartData(categories=tuple(d["categories"]), values=tuple(d["values"]))
    cats, vals = [], []
    with open(p, newline="") as f:
        for row in csv.reader(f):
            if not row or (not cats and row[0].strip().lower() in ("category", "label", "name")):
                continue
            cats.append(row[0].strip())
            vals.append(float(row[1]))
    return ChartData(categories=tuple(cats), values=tuple(vals))


def _cmd_optimize(args) -> int:
    grid = _load_grid(args)
    if args.use_oracle:
        cfg = oracle.load_config(args.oracle) if args.oracle else oracle.OracleConfig()
        scorer = lambda p: oracle.true_score(p, cfg)  # noqa: E731
    else:
        scorer = ScoringModel.load(args.model)
    data = _load_chart_data(args.data) if args.data else None
    pinned = {}
    for item in args.pin or []:
        key, _, value = item.partition("=")
        if key not in params.PARAM_ORDER:
            raise SystemExit(_fail(f"unknown parameter {key!r} in --pin"))
        if key == "orientation":
            pinned[key] = value
        elif key in ("num_bars", "max_label_length", "label_rotation"):
            pinned[key] = int(value)
        else:
            pinned[key] = float(value)
    constraints = Constraints(max_width_px=args.max_width, pinned=pinned)
    result = optimize(
        scorer,
        grid,
        data=data,
        constraints=constraints,
        top_k=args.top_k,
        base_height_px=args.base_height,
        pin_num_bars=not args.free_bars,
    )
    out = {
        "params": result.params.to_dict(),
        "score": result.score,
        "n_feasible": result.n_feasible,
        "n_cells": result.n_cells,
    }
    if args.out_params:
        Path(args.out_params).write_text(json.dumps(out, indent=2) + "\n")
    if args.out_topk:
        with open(args.out_topk, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["rank", *params.PARAM_ORDER, "score"])
            for rank, (p, s) in enumerate(result.top, start=1):
                w.writerow([rank, *[p.value_of(n) for n in params.PARAM_ORDER], repr(s)])
    if args.out_svg:
        chart_data = data
        if chart_data is None:
            from .optimize import default_chart_data

            chart_data = default_chart_data(result.params.num_bars)
        elif len(chart_data.values) != result.params.num_bars:
            from .optimize import _adapt_data

            chart_data = _adapt_data(chart_data, result.params.num_bars)
        Path(args.out_svg).write_text(
            render(chart_data, result.params, args.base_height).svg + "\n"
        )
    print(json.dumps(out))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import LabelStore, create_app

    raw = []
    with open(args.pairs) as f:
        experiment = "custom"
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            experiment = d.get("experiment", experiment)
            raw.append(pairs.ComparisonPair.from_json_dict(d))
    store = LabelStore(
        raw,
        args.log,
        experiment=experiment,
        lease_seconds=args.lease_seconds,
        seed=args.seed,
    )
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutrank",
        description="Learn bar-chart layout quality from paired comparisons.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pairs", help="generate unlabeled comparison pairs")
    _add_grid_args(p)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--provenance", choices=list(pairs.PROVENANCES), default="uniform")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen_pairs)

    p = sub.add_parser("calibrate-oracle", help="tune rater noise to the target unanimity")
    _add_grid_args(p)
    p.add_argument("--target", type=float, default=oracle.TARGET_UNANIMITY)
    p.add_argument("--ground-truth", choices=list(oracle.GROUND_TRUTHS), default="rulebook")
    p.add_argument("--n-pairs", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=1234)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=_cmd_calibrate_oracle)

    p = sub.add_parser("label", help="label pairs with the simulated raters")
    p.add_argument("--pairs", required=True)
    p.add_argument("--oracle", help="oracle config JSON (from calibrate-oracle)")
    p.add_argument("--ground-truth", choices=list(oracle.GROUND_TRUTHS), default="rulebook")
    p.add_argument("--beta", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("resample", help="adapt the sampling grid from results")
    _add_grid_args(p)
    p.add_argument("--mode", choices=["importance", "gradient"], required=True)
    p.add_argument("--dataset", help="labeled JSONL (importance mode)")
    p.add_argument("--model", help="model JSON (gradient mode)")
    p.add_argument("--cap", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--refine-factor", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_resample)

    p = sub.add_parser("train", help="train the scoring network")
    p.add_argument("--grid", help="grid JSON (defaults to the dataset's experiment)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--margin", type=float, default=0.12)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--batch-size", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-csv")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="Monte-Carlo cross-validation")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=list(evaluation.METHODS), default="model")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid")
    p.add_argument("--report")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("analyze", help="export correlations, heat grids, box tables")
    _add_grid_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--dataset")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("optimize", help="recommend layout parameters for data")
    _add_grid_args(p)
    p.add_argument("--model", help="model JSON")
    p.add_argument("--use-oracle", action="store_true", help="score with the hidden oracle")
    p.add_argument("--oracle", help="oracle config JSON (with --use-oracle)")
    p.add_argument("--data", help="chart data CSV (category,value) or JSON")
    p.add_argument("--max-width", type=float, default=None)
    p.add_argument("--pin", action="append", metavar="PARAM=VALUE")
    p.add_argument("--free-bars", action="store_true", help="do not pin num_bars to the data")
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--base-height", type=int, default=300)
    p.add_argument("--out-params")
    p.add_argument("--out-topk")
    p.add_argument("--out-svg")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("serve", help="run the labeling service")
    p.add_argument("--pairs", required=True, help="unlabeled pairs JSONL")
    p.add_argument("--log", required=True, help="append-only choice log JSONL")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--lease-seconds", type=float, default=600.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ui-dir", help="static directory for the labeling UI")
    p.set_defaults(func=_cmd_serve)

    return parser


def _fail(message: str) -> int:
    print(json.dumps({"error": message}), file=sys.stderr)
    return 2


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "optimize" and not args.use_oracle and not args.model:
        return _fail("optimize requires --model or --use-oracle")
    if args.command == "resample":
        if args.mode == "importance" and not args.dataset:
            return _fail("importance resampling requires --dataset")
        if args.mode == "gradient" and not args.model:
            return _fail("gradient resampling requires --model")
    try:
        return args.func(args)
    except (ValueError, RuntimeError, FileNotFoundError, json.JSONDecodeError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
