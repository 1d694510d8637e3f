"""Comparison-pair pipeline: generation, labeling, and adaptive re-sampling.

Pairs share one dataset and bar count but differ in the remaining layout
parameters.  Hard-rule violations label or discard pairs before any
rater sees them; rater labels come from the oracle (or, via the labeling
service, from people).  Two offline strategies then reshape the grid:
importance re-sampling concentrates probability on winning values, and
gradient re-sampling refines the grid where the learned score surface
is flat.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass

import numpy as np

from .oracle import OracleConfig, judge_pair
from .params import PARAM_ORDER, LayoutParams, ParamGrid, enumerate_features, sample_params
from .render import ChartData, desk_reject, render

PROVENANCES = ("uniform", "importance", "gradient", "human")
LABEL_SOURCES = ("desk_reject", "oracle", "human")

_TOKEN_LEN = 12
_NUMERIC_REFINABLE = ("num_bars", "aspect_ratio", "bandwidth", "max_label_length")


@dataclass
class ComparisonPair:
    """Two layouts over identical data, optionally with a preference label."""

    id: str
    data: ChartData
    params_a: LayoutParams
    params_b: LayoutParams
    label: str | None = None  # "a" | "b"
    provenance: str = "uniform"
    label_via: str | None = None

    def __post_init__(self):
        if self.params_a == self.params_b:
            raise ValueError(f"pair {self.id}: sides must differ")
        if self.label not in (None, "a", "b"):
            raise ValueError(f"pair {self.id}: bad label {self.label!r}")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"pair {self.id}: bad provenance {self.provenance!r}")
        if self.label_via not in (None,) + LABEL_SOURCES:
            raise ValueError(f"pair {self.id}: bad label_via {self.label_via!r}")

    @property
    def winner(self) -> LayoutParams:
        if self.label is None:
            raise ValueError(f"pair {self.id} is unlabeled")
        return self.params_a if self.label == "a" else self.params_b

    @property
    def loser(self) -> LayoutParams:
        if self.label is None:
            raise ValueError(f"pair {self.id} is unlabeled")
        return self.params_b if self.label == "a" else self.params_a

    def to_json_dict(self, experiment: str) -> dict:
        return {
            "id": self.id,
            "experiment": experiment,
            "categories": list(self.data.categories),
            "values": list(self.data.values),
            "a": self.params_a.to_dict(),
            "b": self.params_b.to_dict(),
            "label": self.label,
            "provenance": self.provenance,
            "label_via": self.label_via,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ComparisonPair":
        return cls(
            id=d["id"],
            data=ChartData(categories=tuple(d["categories"]), values=tuple(d["values"])),
            params_a=LayoutParams.from_dict(d["a"]),
            params_b=LayoutParams.from_dict(d["b"]),
            label=d.get("label"),
            provenance=d.get("provenance", "uniform"),
            label_via=d.get("label_via"),
        )


@dataclass
class Dataset:
    """A list of comparison pairs plus the experiment they belong to."""

    pairs: list[ComparisonPair]
    experiment: str
    seed: int = 0

    def __post_init__(self):
        ids = [p.id for p in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate pair ids in dataset")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def labeled(self) -> list[ComparisonPair]:
        return [p for p in self.pairs if p.label is not None]

    def save_jsonl(self, path) -> None:
        with open(path, "w") as f:
            for p in self.pairs:
                f.write(json.dumps(p.to_json_dict(self.experiment)) + "\n")

    @classmethod
    def load_jsonl(cls, path, seed: int = 0) -> "Dataset":
        pairs = []
        experiments = set()
        with open(path) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                experiments.add(d.get("experiment", "custom"))
                pairs.append(ComparisonPair.from_json_dict(d))
        if len(experiments) > 1:
            raise ValueError(f"mixed experiments in {path}: {sorted(experiments)}")
        experiment = experiments.pop() if experiments else "custom"
        return cls(pairs=pairs, experiment=experiment, seed=seed)


def synth_chart_data(num_bars: int, rng: np.random.Generator) -> ChartData:
    """Synthetic categories and values for one pair.

    Values are uniform on [1, 100]; categories are distinct random
    lowercase tokens that the renderer truncates per-side to the
    side's max label length.
    """
    values = rng.uniform(1.0, 100.0, size=num_bars)
    letters = np.array(list(string.ascii_lowercase))
    cats: list[str] = []
    seen = set()
    while len(cats) < num_bars:
        tok = "".join(rng.choice(letters, size=_TOKEN_LEN))
        if tok not in seen:
            seen.add(tok)
            cats.append(tok)
    return ChartData(categories=tuple(cats), values=tuple(float(v) for v in values))


def _distinct_partner(
    grid: ParamGrid, rng: np.random.Generator, side_a: LayoutParams
) -> LayoutParams:
    from dataclasses import replace as _replace

    for _ in range(1000):
        b = sample_params(grid, rng)
        b = _replace(b, num_bars=side_a.num_bars)
        if b != side_a:
            return b
    raise ValueError("grid too small to produce distinct pair sides")


def generate_pairs(
    grid: ParamGrid,
    n: int,
    seed: int,
    provenance: str = "uniform",
    base_height_px: int = 300,
    id_prefix: str = "pair",
) -> list[ComparisonPair]:
    """Generate ``n`` comparison pairs from the grid's sampling probabilities.

    Each pair shares synthesized data and bar count; the remaining
    parameters are drawn independently per side.  Under exp2 rules a
    pair where both sides violate hard rules is discarded (it does not
    count toward ``n``); if exactly one side violates, the pair is
    auto-labeled with the passing side as winner.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    check_rules = grid.experiment == "exp2"
    out: list[ComparisonPair] = []
    attempts = 0
    while len(out) < n:
        attempts += 1
        if attempts > 1000 * n:
            raise RuntimeError(
                "desk rejection discarded too many pairs; grid may be degenerate"
            )
        a = sample_params(grid, rng)
        b = _distinct_partner(grid, rng, a)
        data = synth_chart_data(a.num_bars, rng)
        label = None
        label_via = None
        if check_rules:
            fail_a = desk_reject(render(data, a, base_height_px), a, grid.experiment)
            fail_b = desk_reject(render(data, b, base_height_px), b, grid.experiment)
            if fail_a and fail_b:
                continue
            if fail_a or fail_b:
                label = "b" if fail_a else "a"
                label_via = "desk_reject"
        out.append(
            ComparisonPair(
                id=f"{id_prefix}-{len(out):06d}",
                data=data,
                params_a=a,
                params_b=b,
                label=label,
                provenance=provenance,
                label_via=label_via,
            )
        )
    return out


def label_pairs(
    pairs: list[ComparisonPair], cfg: OracleConfig, experiment: str
) -> tuple[Dataset, dict]:
    """Label pairs with the simulated raters, keeping unanimous outcomes only.

    Pairs already auto-labeled by desk rejection are merged through
    unchanged.  Returns the labeled dataset plus a report of
    judged/kept/discarded counts.
    """
    rng = np.random.default_rng(cfg.seed)
    kept: list[ComparisonPair] = []
    judged = kept_judged = discarded = auto = 0
    for p in pairs:
        if p.label is not None:
            auto += 1
            kept.append(p)
            continue
        judged += 1
        verdict = judge_pair(p.params_a, p.params_b, cfg, rng)
        if verdict is None:
            discarded += 1
            continue
        p.label = verdict
        p.label_via = "oracle"
        kept_judged += 1
        kept.append(p)
    report = {
        "input_pairs": len(pairs),
        "auto_labeled": auto,
        "judged": judged,
        "kept_judged": kept_judged,
        "discarded": discarded,
        "kept_fraction": (kept_judged / judged) if judged else None,
    }
    return Dataset(pairs=kept, experiment=experiment, seed=cfg.seed), report


def capped_win_probabilities(wins: list[int], cap: int) -> list[float]:
    """min(w, cap) / sum(min(w, cap)); uniform when every count is zero."""
    capped = [min(int(w), cap) for w in wins]
    total = sum(capped)
    if total == 0:
        return [1.0 / len(capped)] * len(capped)
    return [c / total for c in capped]


def importance_resample(
    grid: ParamGrid, dataset: Dataset, cap: int | None = None
) -> ParamGrid:
    """Re-weight sampling probabilities by capped per-value win counts.

    A value's win count is the number of labeled pairs whose winning
    side uses it; the new probability is min(wins, cap) over the sum of
    the capped counts.  A parameter with no wins at all falls back to
    uniform.  Wins from desk-reject labels count the same as rater wins.
    """
    if not dataset.labeled:
        raise ValueError("dataset has no labeled pairs")
    cap = grid.cap if cap is None else cap
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    wins = {name: [0] * len(grid.values[name]) for name in PARAM_ORDER}
    for pair in dataset.labeled:
        w = pair.winner
        for name in PARAM_ORDER:
            wins[name][grid.index_of(name, w.value_of(name))] += 1
    probabilities = {
        name: capped_win_probabilities(wins[name], cap) for name in PARAM_ORDER
    }
    return ParamGrid(
        values={name: list(grid.values[name]) for name in PARAM_ORDER},
        probabilities=probabilities,
        wins=wins,
        cap=cap,
        experiment=grid.experiment,
    )


def gradient_resample(
    grid: ParamGrid,
    model,
    threshold: float | None = None,
    refine_factor: int = 3,
) -> ParamGrid:
    """Refine the grid where the learned score surface is flat.

    The score gradient is estimated by central finite differences over
    the normalized grid (one-sided at the ends).  Cells whose gradient
    L2 norm over the numeric dimensions falls below the threshold flag
    their parameter values; flagged gaps in each numeric value list are
    subdivided into ``refine_factor`` steps.  Rotation and orientation
    are categorical and never refined.  ``threshold=None`` uses the 20th
    percentile of observed gradient norms.
    """
    if threshold is not None and threshold <= 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    if refine_factor < 2:
        raise ValueError(f"refine_factor must be >= 2, got {refine_factor}")

    feats = enumerate_features(grid)
    scores = model.forward(feats).reshape(grid.shape)
    free = grid.free_params
    bounds = grid.feature_bounds()

    numeric = [
        name
        for name in free
        if name in _NUMERIC_REFINABLE and len(grid.values[name]) > 1
    ]
    grads = []
    for name in numeric:
        axis = PARAM_ORDER.index(name)
        lo, hi = bounds[name]
        coords = (np.asarray([float(v) for v in grid.values[name]]) - lo) / (hi - lo)
        grads.append(np.gradient(scores, coords, axis=axis))
    if not grads:
        return grid
    norm = np.sqrt(np.sum(np.stack(grads) ** 2, axis=0))

    if threshold is None:
        threshold = float(np.percentile(norm, 20.0))
    flagged = norm < threshold

    new_values = {name: list(grid.values[name]) for name in PARAM_ORDER}
    for name in numeric:
        axis = PARAM_ORDER.index(name)
        other_axes = tuple(i for i in range(len(PARAM_ORDER)) if i != axis)
        marked = flagged.any(axis=other_axes)  # per value index
        vals = grid.values[name]
        integer = all(isinstance(v, int) or float(v).is_integer() for v in vals)
        augmented = list(vals)
        for j in range(len(vals) - 1):
            if marked[j] or marked[j + 1]:
                step = (vals[j + 1] - vals[j]) / refine_factor
                for k in range(1, refine_factor):
                    v = vals[j] + k * step
                    if integer:
                        v = round(v)
                    else:
                        v = round(v, 10)
                    augmented.append(v)
        new = sorted(set(float(v) for v in augmented))
        if integer:
            new = [int(v) for v in new]
        new_values[name] = new

    return ParamGrid(values=new_values, cap=grid.cap, experiment=grid.experiment)
