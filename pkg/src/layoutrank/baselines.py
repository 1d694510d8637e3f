"""Comparator methods: linear RankSVM over parameter or layout-metric features.

The metric feature sets (white space, scale, unity, balance) are fixed
reconstructions in the spirit of classic graphic-design measures, computed
from rendered geometry.  Every feature is a fraction, ratio, or
coefficient of variation, so all sets are invariant under uniform canvas
scaling.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import ParamGrid, normalize
from .render import RenderedChart, box_area, render

FEATURE_SETS = ("params", "whitespace", "scale", "unity", "balance", "all")
METRIC_SETS = ("whitespace", "scale", "unity", "balance", "all")


@dataclass
class LinearRankModel:
    """Bias-free linear comparison model: prefer a iff w . (x_a - x_b) > 0."""

    weights: np.ndarray
    feature_set: str

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.feature_set not in FEATURE_SETS:
            raise ValueError(f"unknown feature set {self.feature_set!r}")

    def decide(self, x_a: np.ndarray, x_b: np.ndarray) -> str:
        return "a" if float(self.weights @ (x_a - x_b)) >= 0.0 else "b"

    def to_json_dict(self) -> dict:
        return {"feature_set": self.feature_set, "weights": self.weights.tolist()}

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict()) + "\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "LinearRankModel":
        return cls(weights=np.asarray(d["weights"]), feature_set=d["feature_set"])


def _cv(values: np.ndarray) -> float:
    m = float(np.mean(values)) if len(values) else 0.0
    if m == 0.0:
        return 0.0
    return float(np.std(values) / m)


def _elements(chart: RenderedChart):
    boxes = list(chart.bars) + [b for b in chart.labels if box_area(b) > 0.0]
    return boxes


def metric_features(chart: RenderedChart, set_id: str) -> np.ndarray:
    """Hand-crafted layout metrics from rendered geometry.

    whitespace: ink-free fraction of the canvas and of the plot area
                (ink = summed bar and label box areas, bars only inside
                the plot).
    scale:      mean element area over canvas area; min/max element-area
                ratio (element = bar or label box).
    unity:      coefficient of variation of the gaps along the band axis
                (edge gaps included) and of the label box areas.
    balance:    |x| and |y| offsets of the ink centroid from the canvas
                center, normalized by the half extents.
    all:        the four sets concatenated in the order above.
    """
    if set_id == "all":
        return np.concatenate(
            [metric_features(chart, s) for s in ("whitespace", "scale", "unity", "balance")]
        )
    canvas_area = chart.width * chart.height
    if set_id == "whitespace":
        bar_ink = sum(box_area(b) for b in chart.bars)
        label_ink = sum(box_area(b) for b in chart.labels)
        plot_area = box_area(chart.plot)
        canvas_free = 1.0 - min(1.0, (bar_ink + label_ink) / canvas_area)
        plot_free = 1.0 - min(1.0, bar_ink / plot_area) if plot_area > 0 else 0.0
        return np.array([canvas_free, plot_free])
    if set_id == "scale":
        areas = np.array([box_area(b) for b in _elements(chart)])
        if len(areas) == 0 or float(areas.max()) == 0.0:
            return np.array([0.0, 0.0])
        return np.array(
            [float(areas.mean()) / canvas_area, float(areas.min() / areas.max())]
        )
    if set_id == "unity":
        # Gaps along the band axis, including the leading/trailing gaps
        # between the plot edge and the outermost bars.
        axis = 0 if chart.orientation == "vertical" else 1
        lo, hi = (
            (chart.plot[0], chart.plot[2]) if axis == 0 else (chart.plot[1], chart.plot[3])
        )
        edges = sorted((b[axis], b[axis + 2]) for b in chart.bars)
        gaps = [edges[0][0] - lo, hi - edges[-1][1]]
        gaps += [b[0] - a[1] for a, b in zip(edges, edges[1:])]
        gap_cv = _cv(np.maximum(0.0, np.array(gaps)))
        label_areas = np.array([box_area(b) for b in chart.labels])
        return np.array([gap_cv, _cv(label_areas)])
    if set_id == "balance":
        boxes = _elements(chart)
        areas = np.array([box_area(b) for b in boxes])
        total = float(areas.sum())
        if total == 0.0:
            return np.array([0.0, 0.0])
        cx = sum(a * (b[0] + b[2]) / 2 for a, b in zip(areas, boxes)) / total
        cy = sum(a * (b[1] + b[3]) / 2 for a, b in zip(areas, boxes)) / total
        return np.array(
            [
                abs(cx - chart.width / 2) / (chart.width / 2),
                abs(cy - chart.height / 2) / (chart.height / 2),
            ]
        )
    raise ValueError(f"unknown feature set {set_id!r}")


def pair_features(
    dataset, grid: ParamGrid, set_id: str, base_height_px: int = 300
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """(X_a, X_b, labels) for the labeled pairs of a dataset."""
    Xa, Xb, labels = [], [], []
    for pair in dataset.labeled:
        if set_id == "params":
            xa = normalize(pair.params_a, grid)
            xb = normalize(pair.params_b, grid)
        else:
            xa = metric_features(render(pair.data, pair.params_a, base_height_px), set_id)
            xb = metric_features(render(pair.data, pair.params_b, base_height_px), set_id)
        Xa.append(xa)
        Xb.append(xb)
        labels.append(pair.label)
    return np.stack(Xa), np.stack(Xb), labels


def train_ranksvm_on_diffs(
    diffs: np.ndarray,
    feature_set: str,
    C: float = 1.0,
    iterations: int = 2000,
    seed: int = 0,
) -> LinearRankModel:
    """Minimize sum(max(0, 1 - w.d)) + C*||w||^2 by subgradient descent.

    ``diffs`` holds winner-minus-loser feature differences, one row per
    pair.  The best iterate by objective value is returned, which makes
    the result robust to the 1/sqrt(t) step schedule.  Deterministic.
    """
    diffs = np.asarray(diffs, dtype=np.float64)
    n, d = diffs.shape
    if np.all(np.abs(diffs) < 1e-12):
        warnings.warn(
            "all pair feature differences are identical (zero); returning zero weights"
        )
        return LinearRankModel(weights=np.zeros(d), feature_set=feature_set)

    def objective(w: np.ndarray) -> float:
        margins = diffs @ w
        return float(np.sum(np.maximum(0.0, 1.0 - margins)) + C * w @ w)

    scale = max(1.0, float(np.abs(diffs).sum(axis=0).max()))
    w = np.zeros(d)
    best_w = w.copy()
    best_obj = objective(w)
    for t in range(1, iterations + 1):
        margins = diffs @ w
        active = margins < 1.0
        g = -diffs[active].sum(axis=0) + 2.0 * C * w
        w = w - (1.0 / scale) / np.sqrt(t) * g
        obj = objective(w)
        if obj < best_obj:
            best_obj = obj
            best_w = w.copy()
    return LinearRankModel(weights=best_w, feature_set=feature_set)


def train_ranksvm(
    dataset,
    grid: ParamGrid,
    feature_set: str = "params",
    C: float = 1.0,
    iterations: int = 2000,
    seed: int = 0,
    base_height_px: int = 300,
) -> LinearRankModel:
    """Fit a linear ranking model on a labeled dataset's pair differences."""
    if not dataset.labeled:
        raise ValueError("dataset has no labeled pairs")
    Xa, Xb, labels = pair_features(dataset, grid, feature_set, base_height_px)
    sign = np.where(np.array(labels) == "a", 1.0, -1.0)[:, None]
    diffs = sign * (Xa - Xb)
    return train_ranksvm_on_diffs(diffs, feature_set, C=C, iterations=iterations, seed=seed)
