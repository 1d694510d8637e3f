"""Layout parameter space: the design vector, discrete value grids, and feature scaling.

A bar-chart layout is described by six parameters.  The small experiment
("exp1") varies three of them over 1,575 combinations; the extended
experiment ("exp2") varies all six over 87,360 combinations.  Grids carry
per-value sampling probabilities and win counters so adaptive re-sampling
can reshape where future comparison pairs are drawn from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

# Canonical parameter order.  Feature vectors, enumeration order, and
# lexicographic tie-breaking all follow this ordering.
PARAM_ORDER = (
    "num_bars",
    "aspect_ratio",
    "bandwidth",
    "max_label_length",
    "label_rotation",
    "orientation",
)

ROTATIONS = (0, 45, 90)
ORIENTATIONS = ("vertical", "horizontal")

EXP1_SIZE = 1_575
EXP2_SIZE = 87_360

# Grid meta keys that are not parameter names in the JSON schema.
_GRID_META_KEYS = {"probabilities", "wins", "cap", "experiment"}


@dataclass(frozen=True)
class LayoutParams:
    """One point in the layout design space.

    ``bandwidth`` is the bar width as a fraction of the per-category band
    step (1.0 makes adjacent bars touch).  ``aspect_ratio`` is canvas
    width over height.  In exp1 the last three fields stay at their
    defaults and are excluded from learning features.
    """

    num_bars: int
    aspect_ratio: float
    bandwidth: float
    max_label_length: int = 2
    label_rotation: int = 0
    orientation: str = "vertical"

    def __post_init__(self):
        if self.num_bars < 2:
            raise ValueError(f"num_bars must be >= 2, got {self.num_bars}")
        if not (0.0 < self.bandwidth <= 1.0):
            raise ValueError(f"bandwidth must be in (0, 1], got {self.bandwidth}")
        if self.aspect_ratio <= 0.0:
            raise ValueError(f"aspect_ratio must be positive, got {self.aspect_ratio}")
        if self.max_label_length < 1:
            raise ValueError(
                f"max_label_length must be >= 1, got {self.max_label_length}"
            )
        if self.label_rotation not in ROTATIONS:
            raise ValueError(
                f"label_rotation must be one of {ROTATIONS}, got {self.label_rotation}"
            )
        if self.orientation not in ORIENTATIONS:
            raise ValueError(
                f"orientation must be one of {ORIENTATIONS}, got {self.orientation!r}"
            )

    def value_of(self, name: str):
        return getattr(self, name)

    def sort_key(self) -> tuple:
        """Total order used for deterministic tie-breaking."""
        return (
            self.num_bars,
            self.aspect_ratio,
            self.bandwidth,
            self.max_label_length,
            self.label_rotation,
            ORIENTATIONS.index(self.orientation),
        )

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "LayoutParams":
        return cls(**{name: d[name] for name in PARAM_ORDER})


def encode_value(name: str, value) -> float:
    """Numeric encoding used for features and correlations.

    Orientation maps to its index (vertical=0, horizontal=1); everything
    else is already numeric.
    """
    if name == "orientation":
        return float(ORIENTATIONS.index(value))
    return float(value)


@dataclass
class ParamGrid:
    """Per-parameter candidate values with sampling probabilities.

    Every grid carries all six parameters; a parameter with a single
    candidate value is "fixed" and excluded from learning features.
    ``cap`` is the win-count ceiling used by importance re-sampling.
    """

    values: dict[str, list]
    probabilities: dict[str, list[float]] = field(default_factory=dict)
    wins: dict[str, list[int]] = field(default_factory=dict)
    cap: int = 5
    experiment: str = "custom"

    def __post_init__(self):
        unknown = set(self.values) - set(PARAM_ORDER)
        if unknown:
            raise ValueError(f"unknown parameters in grid: {sorted(unknown)}")
        missing = set(PARAM_ORDER) - set(self.values)
        if missing:
            raise ValueError(f"grid missing parameters: {sorted(missing)}")
        if self.cap < 1:
            raise ValueError(f"cap must be a positive integer, got {self.cap}")
        # Keep dicts in canonical order regardless of construction order.
        self.values = {name: list(self.values[name]) for name in PARAM_ORDER}
        for name, vals in self.values.items():
            if not vals:
                raise ValueError(f"empty value list for {name}")
            if name != "orientation":
                if any(b <= a for a, b in zip(vals, vals[1:])):
                    raise ValueError(f"values for {name} must be strictly increasing")
            # Reject values the dataclass itself would refuse.
            if name == "label_rotation" and any(v not in ROTATIONS for v in vals):
                raise ValueError(f"label_rotation values must be within {ROTATIONS}")
            if name == "orientation" and any(v not in ORIENTATIONS for v in vals):
                raise ValueError(f"orientation values must be within {ORIENTATIONS}")
        if not self.probabilities:
            self.probabilities = {
                name: [1.0 / len(vals)] * len(vals) for name, vals in self.values.items()
            }
        else:
            self.probabilities = {
                name: [float(p) for p in self.probabilities[name]] for name in PARAM_ORDER
            }
        if not self.wins:
            self.wins = {name: [0] * len(vals) for name, vals in self.values.items()}
        else:
            self.wins = {name: list(self.wins[name]) for name in PARAM_ORDER}
        for name in PARAM_ORDER:
            probs = self.probabilities[name]
            if len(probs) != len(self.values[name]):
                raise ValueError(f"probability list length mismatch for {name}")
            if len(self.wins[name]) != len(self.values[name]):
                raise ValueError(f"win list length mismatch for {name}")
            if any(p < 0 for p in probs):
                raise ValueError(f"negative probability for {name}")
            if abs(sum(probs) - 1.0) > 1e-9:
                raise ValueError(
                    f"probabilities for {name} sum to {sum(probs)!r}, expected 1"
                )

    # -- structure ---------------------------------------------------------

    @property
    def free_params(self) -> tuple[str, ...]:
        return tuple(name for name in PARAM_ORDER if len(self.values[name]) > 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(self.values[name]) for name in PARAM_ORDER)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def feature_names(self) -> tuple[str, ...]:
        return self.free_params

    def feature_bounds(self) -> dict[str, tuple[float, float]]:
        out = {}
        for name in self.free_params:
            enc = [encode_value(name, v) for v in self.values[name]]
            out[name] = (min(enc), max(enc))
        return out

    def index_of(self, name: str, value) -> int:
        """Exact index of a value in a parameter's candidate list."""
        try:
            return self.values[name].index(value)
        except ValueError:
            raise ValueError(f"value {value!r} not in grid list for {name}") from None

    # -- (de)serialization ---------------------------------------------------

    def to_json_dict(self) -> dict:
        d: dict = {name: self.values[name] for name in PARAM_ORDER}
        d["probabilities"] = {name: self.probabilities[name] for name in PARAM_ORDER}
        d["wins"] = {name: self.wins[name] for name in PARAM_ORDER}
        d["cap"] = self.cap
        d["experiment"] = self.experiment
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "ParamGrid":
        values = {k: v for k, v in d.items() if k not in _GRID_META_KEYS}
        return cls(
            values=values,
            probabilities=d.get("probabilities") or {},
            wins=d.get("wins") or {},
            cap=d.get("cap", 5),
            experiment=d.get("experiment", "custom"),
        )

    @classmethod
    def load(cls, path) -> "ParamGrid":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


def default_grid(experiment: str) -> ParamGrid:
    """Built-in candidate grids for the two experiments.

    exp1: 25 bar counts x 9 aspect ratios x 7 bandwidths = 1,575 cells,
    with label length, rotation, and orientation fixed at (2, 0, vertical).
    exp2: 26 bar counts x 16 aspect ratios (capped at 2.0) x 7 bandwidths
    x 5 label lengths x 3 rotations x 2 orientations = 87,360 cells.

    Bandwidths run 0.10 to 1.00 in steps of 0.15.  exp1 aspect ratios form
    a sqrt(2) ladder from 0.25 to 4.0; exp2 uses a linear ladder from
    0.125 to 2.0 (responsive widths), reflecting that large aspect ratios
    were unpopular in the first round.
    """
    bandwidths = [round(0.10 + 0.15 * k, 2) for k in range(7)]
    if experiment == "exp1":
        values = {
            "num_bars": list(range(2, 27)),
            "aspect_ratio": [round(0.25 * 2 ** (k / 2), 4) for k in range(9)],
            "bandwidth": bandwidths,
            "max_label_length": [2],
            "label_rotation": [0],
            "orientation": ["vertical"],
        }
        grid = ParamGrid(values=values, experiment="exp1")
        assert grid.size == EXP1_SIZE, grid.size
        return grid
    if experiment == "exp2":
        values = {
            "num_bars": list(range(2, 28)),
            "aspect_ratio": [round(0.125 * k, 3) for k in range(1, 17)],
            "bandwidth": bandwidths,
            "max_label_length": [2, 4, 6, 8, 10],
            "label_rotation": [0, 45, 90],
            "orientation": ["vertical", "horizontal"],
        }
        grid = ParamGrid(values=values, experiment="exp2")
        assert grid.size == EXP2_SIZE, grid.size
        return grid
    raise ValueError(f"unknown experiment {experiment!r}; expected 'exp1' or 'exp2'")


def normalize(params: LayoutParams, grid: ParamGrid) -> np.ndarray:
    """Min-max feature vector over the grid's free parameters.

    Each free dimension maps to (v - min) / (max - min) in [0, 1], in
    canonical parameter order.  Orientation contributes a single binary
    feature.  Values outside the grid's range raise a ValueError naming
    the offending parameter.
    """
    feats = []
    for name, (lo, hi) in grid.feature_bounds().items():
        v = encode_value(name, params.value_of(name))
        if v < lo - 1e-12 or v > hi + 1e-12:
            raise ValueError(
                f"{name}={params.value_of(name)!r} outside grid range [{lo}, {hi}]"
            )
        feats.append((v - lo) / (hi - lo))
    return np.asarray(feats, dtype=np.float64)


def normalize_many(params_list, grid: ParamGrid) -> np.ndarray:
    return np.stack([normalize(p, grid) for p in params_list])


def sample_params(grid: ParamGrid, rng) -> LayoutParams:
    """Draw one design point, each parameter independently per its probabilities.

    ``rng`` is either an integer seed or a ``numpy.random.Generator``.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    chosen = {}
    for name in PARAM_ORDER:
        vals = grid.values[name]
        if len(vals) == 1:
            chosen[name] = vals[0]
        else:
            idx = rng.choice(len(vals), p=grid.probabilities[name])
            chosen[name] = vals[int(idx)]
    return LayoutParams(**chosen)


def enumerate_cells(grid: ParamGrid):
    """Yield every design point in canonical nested order (last axis fastest)."""
    lists = [grid.values[name] for name in PARAM_ORDER]
    for combo in product(*lists):
        yield LayoutParams(**dict(zip(PARAM_ORDER, combo)))


def cell_at(grid: ParamGrid, flat_index: int) -> LayoutParams:
    """Design point at a flat enumeration index (row-major over ``grid.shape``)."""
    idx = np.unravel_index(flat_index, grid.shape)
    chosen = {
        name: grid.values[name][int(i)] for name, i in zip(PARAM_ORDER, idx)
    }
    return LayoutParams(**chosen)


def encoded_value_grids(grid: ParamGrid) -> dict[str, np.ndarray]:
    """Per-parameter encoded raw values broadcast over the full grid.

    Returns, for each free parameter, a flat float array of length
    ``grid.size`` holding the parameter's encoded value in every cell
    (enumeration order matches :func:`enumerate_cells`).
    """
    axes = [
        np.asarray([encode_value(name, v) for v in grid.values[name]])
        for name in PARAM_ORDER
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return {
        name: mesh[i].reshape(-1)
        for i, name in enumerate(PARAM_ORDER)
        if name in grid.free_params
    }


def enumerate_features(grid: ParamGrid) -> np.ndarray:
    """Normalized feature matrix of shape (grid.size, n_free_params).

    Row order matches :func:`enumerate_cells`; column order matches
    :func:`ParamGrid.feature_names`.
    """
    raw = encoded_value_grids(grid)
    bounds = grid.feature_bounds()
    cols = [
        (raw[name] - lo) / (hi - lo) for name, (lo, hi) in bounds.items()
    ]
    if not cols:
        return np.zeros((grid.size, 0))
    return np.stack(cols, axis=1)
