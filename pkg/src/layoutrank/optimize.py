"""Brute-force layout recommendation over the parameter grid.

Enumerates every grid cell, filters by constraints and hard rules,
scores the survivors, and returns the maximizer.  Ties break toward the
lexicographically smallest parameter tuple; because cells enumerate in
row-major canonical order, the flat cell index realizes exactly that
order, so the result is independent of evaluation order.  Rule verdicts
are memoized on the label-relevant parameters (bandwidth never affects
them), which keeps the full 87,360-cell sweep under a few seconds.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .model import ScoringModel
from .params import (
    PARAM_ORDER,
    LayoutParams,
    ParamGrid,
    cell_at,
    enumerate_features,
)
from .render import ChartData, desk_reject, render


class NoFeasibleLayoutError(ValueError):
    """Every grid cell was excluded by constraints or hard rules."""


@dataclass
class Constraints:
    max_width_px: float | None = None
    pinned: dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        unknown = set(self.pinned) - set(PARAM_ORDER)
        if unknown:
            raise ValueError(f"cannot pin unknown parameters: {sorted(unknown)}")
        if self.max_width_px is not None and self.max_width_px <= 0:
            raise ValueError(f"max_width_px must be positive, got {self.max_width_px}")


@dataclass
class OptimizeResult:
    params: LayoutParams
    score: float
    top: list[tuple[LayoutParams, float]]
    n_feasible: int
    n_cells: int


def default_chart_data(num_bars: int) -> ChartData:
    """Deterministic placeholder data for rule checks when none is supplied."""
    letters = string.ascii_lowercase
    cats = tuple(
        "".join(letters[(i + k) % 26] for k in range(12)) for i in range(num_bars)
    )
    values = tuple(float(v) for v in range(1, num_bars + 1))
    return ChartData(categories=cats, values=values)


def _adapt_data(data: ChartData, num_bars: int) -> ChartData:
    """Fit caller data to a cell's bar count by truncating or cycling."""
    if len(data.values) == num_bars:
        return data
    cats = tuple(data.categories[i % len(data.categories)] for i in range(num_bars))
    vals = tuple(data.values[i % len(data.values)] for i in range(num_bars))
    return ChartData(categories=cats, values=vals)


def _rule_mask(grid: ParamGrid, data: ChartData | None, base_height_px: int) -> np.ndarray:
    """Flat desk-reject pass mask, computed once per rule-relevant value combo.

    Bandwidth affects bars only, never tick labels, so verdicts are
    evaluated on the reduced grid without it and broadcast back.
    """
    rule_names = ("num_bars", "aspect_ratio", "max_label_length", "label_rotation", "orientation")
    lists = [grid.values[n] for n in rule_names]
    bw = grid.values["bandwidth"][0]
    reduced = np.empty([len(l) for l in lists], dtype=bool)
    for combo_idx in product(*(range(len(l)) for l in lists)):
        combo = {n: lists[i][combo_idx[i]] for i, n in enumerate(rule_names)}
        p = LayoutParams(bandwidth=bw, **combo)
        d = default_chart_data(p.num_bars) if data is None else _adapt_data(data, p.num_bars)
        reduced[combo_idx] = (
            desk_reject(render(d, p, base_height_px), p, grid.experiment) is None
        )
    # Insert the bandwidth axis and broadcast to the full grid shape.
    bw_axis = PARAM_ORDER.index("bandwidth")
    expanded = np.expand_dims(reduced, axis=bw_axis)
    return np.broadcast_to(expanded, grid.shape).reshape(-1)


def optimize(
    scorer,
    grid: ParamGrid,
    data: ChartData | None = None,
    constraints: Constraints | None = None,
    top_k: int = 10,
    base_height_px: int = 300,
    pin_num_bars: bool = True,
) -> OptimizeResult:
    """Return the feasible grid cell with the highest score.

    ``scorer`` is a trained :class:`ScoringModel` or any callable mapping
    :class:`LayoutParams` to a float.  When ``data`` is given and
    ``pin_num_bars`` is true, the bar count is pinned to the data length.
    Hard rules apply under exp2 grids.  Raises
    :class:`NoFeasibleLayoutError` when nothing survives.
    """
    constraints = constraints or Constraints()
    pinned = dict(constraints.pinned)
    if data is not None and pin_num_bars:
        pinned.setdefault("num_bars", len(data.values))

    axis_masks = []
    for name in PARAM_ORDER:
        vals = grid.values[name]
        mask = np.ones(len(vals), dtype=bool)
        if name in pinned:
            mask &= np.array([v == pinned[name] for v in vals])
        if name == "aspect_ratio" and constraints.max_width_px is not None:
            limit = constraints.max_width_px / base_height_px + 1e-9
            mask &= np.array([v <= limit for v in vals])
        axis_masks.append(mask)
    mesh = np.meshgrid(*axis_masks, indexing="ij")
    feasible = np.logical_and.reduce([m.reshape(-1) for m in mesh])

    if grid.experiment == "exp2":
        feasible &= _rule_mask(grid, data, base_height_px)

    idx = np.nonzero(feasible)[0]
    if idx.size == 0:
        raise NoFeasibleLayoutError(
            "no grid cell satisfies the constraints and hard rules"
        )

    if isinstance(scorer, ScoringModel):
        feats = enumerate_features(grid)
        scores = scorer.forward(feats[idx])
    else:
        scores = np.array([float(scorer(cell_at(grid, int(i)))) for i in idx])

    # Row-major flat index == lexicographic parameter-tuple order, so
    # sorting by (-score, flat index) realizes the documented tie-break.
    order = np.lexsort((idx, -scores))
    best_flat = int(idx[order[0]])
    top = [
        (cell_at(grid, int(idx[k])), float(scores[k])) for k in order[: max(1, top_k)]
    ]
    return OptimizeResult(
        params=cell_at(grid, best_flat),
        score=float(scores[order[0]]),
        top=top,
        n_feasible=int(idx.size),
        n_cells=grid.size,
    )
