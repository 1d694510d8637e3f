"""Monte-Carlo cross-validation, correlation analysis, and analysis exports.

Accuracy is the fraction of held-out pairs where the method names the
labeled winner.  Correlations and heat/box exports enumerate the full
grid (87,360 forward passes stay under a second), so marginal means are
exact rather than sampled.
"""

from __future__ import annotations

import csv
import json
from itertools import combinations
from pathlib import Path

import numpy as np

from .baselines import pair_features, train_ranksvm_on_diffs
from .model import ScoringModel, TrainConfig, train
from .params import PARAM_ORDER, ParamGrid, default_grid, encoded_value_grids, enumerate_features
from .pairs import Dataset

METHODS = ("model", "ranksvm", "whitespace", "scale", "unity", "balance", "all")


def _resolve_grid(dataset: Dataset, grid: ParamGrid | None) -> ParamGrid:
    if grid is not None:
        return grid
    return default_grid(dataset.experiment)


def _subset(dataset: Dataset, idx) -> Dataset:
    return Dataset(
        pairs=[dataset.labeled[i] for i in idx],
        experiment=dataset.experiment,
        seed=dataset.seed,
    )


def mccv(
    dataset: Dataset,
    method: str,
    runs: int = 10,
    split: float = 0.8,
    seed: int = 0,
    grid: ParamGrid | None = None,
    train_config: TrainConfig | None = None,
    C: float = 1.0,
    eval_on_train: bool = False,
) -> dict:
    """Repeated random-split evaluation; returns per-run accuracies and summary.

    Each run reseeds the split and the method's training.  ``method`` is
    'model' for the scoring network, 'ranksvm' for the linear model on
    parameter features, or a metric-set name for RankSVM on that set.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    labeled = dataset.labeled
    if len(labeled) < 10:
        raise ValueError(f"need at least 10 labeled pairs, got {len(labeled)}")
    if not (0.0 < split < 1.0):
        raise ValueError(f"split must be in (0, 1), got {split}")
    grid = _resolve_grid(dataset, grid)

    feature_set = "params" if method == "ranksvm" else method
    if method != "model":
        Xa, Xb, labels = pair_features(dataset, grid, feature_set)
        sign = np.where(np.array(labels) == "a", 1.0, -1.0)[:, None]
        diffs_all = sign * (Xa - Xb)

    n = len(labeled)
    n_train = int(round(split * n))
    run_reports = []
    for run in range(runs):
        run_seed = seed * 100_003 + run
        rng = np.random.default_rng(run_seed)
        perm = rng.permutation(n)
        tr, te = perm[:n_train], perm[n_train:]
        eval_idx = tr if eval_on_train else te
        if method == "model":
            cfg = train_config or TrainConfig()
            cfg = TrainConfig.from_json_dict({**cfg.to_json_dict(), "seed": run_seed})
            m, _ = train(_subset(dataset, tr), grid, cfg)
            sa = m.score_many([labeled[i].params_a for i in eval_idx])
            sb = m.score_many([labeled[i].params_b for i in eval_idx])
            pred = np.where(sb > sa, "b", "a")
        else:
            lm = train_ranksvm_on_diffs(diffs_all[tr], feature_set, C=C, seed=run_seed)
            margin = (Xa[eval_idx] - Xb[eval_idx]) @ lm.weights
            pred = np.where(margin < 0.0, "b", "a")
        truth = np.array([labeled[i].label for i in eval_idx])
        acc = float(np.mean(pred == truth))
        run_reports.append({"run": run, "seed": run_seed, "accuracy": acc})
    accs = [r["accuracy"] for r in run_reports]
    return {
        "method": method,
        "runs": run_reports,
        "mean_accuracy": float(np.mean(accs)),
        "sd_accuracy": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
        "n_pairs": n,
        "split": split,
        "eval_on_train": eval_on_train,
    }


def _score_tensor(model: ScoringModel, grid: ParamGrid) -> np.ndarray:
    feats = enumerate_features(grid)
    return model.forward(feats).reshape(grid.shape)


def correlations(model: ScoringModel, grid: ParamGrid) -> dict[str, float | None]:
    """Pearson r between the predicted score and each raw parameter value.

    Enumerates every grid cell.  Fixed (single-value) parameters have no
    variance and report ``None``.  Orientation is coded {0, 1}.
    """
    scores = _score_tensor(model, grid).reshape(-1)
    raw = encoded_value_grids(grid)
    out: dict[str, float | None] = {}
    for name in PARAM_ORDER:
        if name not in raw:
            out[name] = None
            continue
        v = raw[name]
        if float(np.std(v)) == 0.0 or float(np.std(scores)) == 0.0:
            out[name] = None
            continue
        out[name] = float(np.corrcoef(v, scores)[0, 1])
    return out


def export_analysis(
    model: ScoringModel,
    grid: ParamGrid,
    out_dir,
    dataset: Dataset | None = None,
    samples: int = 100,
    seed: int = 0,
) -> dict:
    """Write the interpretation files: box-plot table, heat grids, report.

    ``boxplot.csv`` holds ``samples`` scores per parameter value, drawn
    from random cells that fix the value (score distribution per value).
    ``heatmaps.csv`` holds, for every free parameter pair, the mean score
    over all remaining dimensions.  ``report.json`` carries correlations,
    score statistics, and (when a dataset is given) the model-vs-label
    agreement.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scores = _score_tensor(model, grid)
    rng = np.random.default_rng(seed)
    free = grid.free_params

    boxplot_path = out_dir / "boxplot.csv"
    with open(boxplot_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["parameter", "value", "sample", "score"])
        for name in free:
            axis = PARAM_ORDER.index(name)
            for j, value in enumerate(grid.values[name]):
                slice_scores = np.take(scores, j, axis=axis).reshape(-1)
                idx = rng.integers(0, slice_scores.size, size=samples)
                for s_i, si in enumerate(idx):
                    w.writerow([name, value, s_i, repr(float(slice_scores[si]))])

    heat_path = out_dir / "heatmaps.csv"
    with open(heat_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["param_x", "param_y", "value_x", "value_y", "mean_score"])
        for name_x, name_y in combinations(free, 2):
            ax_x, ax_y = PARAM_ORDER.index(name_x), PARAM_ORDER.index(name_y)
            other = tuple(i for i in range(len(PARAM_ORDER)) if i not in (ax_x, ax_y))
            heat = scores.mean(axis=other)  # shape (|Vx|, |Vy|), axes ordered
            for i, vx in enumerate(grid.values[name_x]):
                for j, vy in enumerate(grid.values[name_y]):
                    w.writerow([name_x, name_y, vx, vy, repr(float(heat[i, j]))])

    report = {
        "experiment": grid.experiment,
        "correlations": correlations(model, grid),
        "score_min": float(scores.min()),
        "score_max": float(scores.max()),
        "score_mean": float(scores.mean()),
        "cells": int(scores.size),
        "samples_per_value": samples,
        "seed": seed,
    }
    if dataset is not None and dataset.labeled:
        sa = model.score_many([p.params_a for p in dataset.labeled])
        sb = model.score_many([p.params_b for p in dataset.labeled])
        pred = np.where(sb > sa, "b", "a")
        truth = np.array([p.label for p in dataset.labeled])
        report["label_agreement"] = float(np.mean(pred == truth))
        report["n_labeled_pairs"] = len(dataset.labeled)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    return {
        "boxplot": str(boxplot_path),
        "heatmaps": str(heat_path),
        "report": str(report_path),
    }
