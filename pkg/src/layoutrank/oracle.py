"""Synthetic preference oracle: a hidden quality function plus noisy raters.

Stands in for crowd workers so the whole pipeline runs reproducibly.
Three simulated raters each pick the chart they prefer under logistic
choice noise; only unanimous pairs produce labels.  The noise
temperature is calibrated so the unanimity rate over random pairs
matches the 45.6% observed with real raters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, replace
from functools import lru_cache

import numpy as np

from .params import LayoutParams, ParamGrid, sample_params

GROUND_TRUTHS = ("rulebook", "random-smooth")

TARGET_UNANIMITY = 0.456


@dataclass(frozen=True)
class OracleConfig:
    ground_truth: str = "rulebook"
    beta: float = 8.0
    raters: int = 3
    agreement: str = "unanimous"
    seed: int = 0

    def __post_init__(self):
        if self.ground_truth not in GROUND_TRUTHS:
            raise ValueError(f"unknown ground truth {self.ground_truth!r}")
        if not math.isfinite(self.beta) or self.beta <= 0:
            raise ValueError(f"beta must be finite and positive, got {self.beta}")
        if self.raters < 1:
            raise ValueError(f"raters must be >= 1, got {self.raters}")
        if self.agreement != "unanimous":
            raise ValueError(f"unsupported agreement policy {self.agreement!r}")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, d: dict) -> "OracleConfig":
        return cls(**d)


# Rulebook term weights.  The shape encodes the qualitative findings the
# pipeline should be able to recover: a bandwidth sweet spot near 0.8
# for vertical charts (lower for horizontal), growing difficulty with
# more bars, a mid-range aspect-ratio preference, and rotation hurting
# in the order 0 < 45 < 90.  Label length carries no direct weight, so
# points differing only there tie exactly.
#
# Crowding interaction: more bars shrink the bandwidth term's amplitude.
# Because the two sides of a pair always share a bar count, a purely
# additive bar term never reaches the training signal; the interaction
# is the only channel through which a pair-trained model can see the
# bar-count penalty at all.
_W_BAND = 0.35
_BAND_PEAK_VERTICAL = 0.8
_BAND_PEAK_HORIZONTAL = 0.675
_BAND_SIGMA = 0.18
_BAND_CROWDING = 0.9
_W_ASPECT = 0.30
_ASPECT_PEAK = 1.5
_ASPECT_LOG_SIGMA = 1.2
_W_BARS = 0.25
_BARS_SPAN = (2, 27)
_W_ROT = 0.15

# Over the exp1 default grid the rulebook's brute-force argmax is
# num_bars=2, aspect_ratio=1.4142, bandwidth=0.85 (verified by
# enumeration in the test suite).
RULEBOOK_EXP1_OPTIMUM = (2, 1.4142, 0.85)


def _rulebook_score(p: LayoutParams) -> float:
    peak = _BAND_PEAK_VERTICAL if p.orientation == "vertical" else _BAND_PEAK_HORIZONTAL
    band = math.exp(-(((p.bandwidth - peak) / _BAND_SIGMA) ** 2))
    aspect = math.exp(
        -(((math.log2(p.aspect_ratio) - math.log2(_ASPECT_PEAK)) / _ASPECT_LOG_SIGMA) ** 2)
    )
    lo, hi = _BARS_SPAN
    bars = min(1.0, max(0.0, (p.num_bars - lo) / (hi - lo)))
    rot = p.label_rotation / 90.0
    raw = (
        _W_BAND * (1.0 - _BAND_CROWDING * bars) * band
        + _W_ASPECT * aspect
        - _W_BARS * bars
        - _W_ROT * rot
    )
    # raw ranges over [-(W_BARS + W_ROT), W_BAND + W_ASPECT]; map to [0, 1].
    return (raw + _W_BARS + _W_ROT) / (_W_BAND + _W_ASPECT + _W_BARS + _W_ROT)


@lru_cache(maxsize=32)
def _smooth_basis(seed: int):
    rng = np.random.default_rng(seed)
    k = 8
    omega = rng.normal(0.0, 2.0, size=(k, 6))
    phase = rng.uniform(0.0, 2 * math.pi, size=k)
    amp = rng.uniform(0.5, 1.0, size=k) / k
    return omega, phase, amp


def _smooth_score(p: LayoutParams, seed: int) -> float:
    omega, phase, amp = _smooth_basis(seed)
    x = np.array(
        [
            p.num_bars / 30.0,
            math.log2(p.aspect_ratio) / 2.0,
            p.bandwidth,
            p.max_label_length / 16.0,
            p.label_rotation / 90.0,
            0.0 if p.orientation == "vertical" else 1.0,
        ]
    )
    raw = float(np.sum(amp * np.cos(omega @ x + phase)))
    return 0.5 * (math.tanh(2.0 * raw) + 1.0)


def true_score(params: LayoutParams, cfg: OracleConfig) -> float:
    """Hidden ground-truth layout quality in [0, 1]; deterministic."""
    if cfg.ground_truth == "rulebook":
        return _rulebook_score(params)
    return _smooth_score(params, cfg.seed)


def _sigmoid(x: float) -> float:
    x = min(60.0, max(-60.0, x))
    return 1.0 / (1.0 + math.exp(-x))


def judge_pair(
    a: LayoutParams, b: LayoutParams, cfg: OracleConfig, rng=None
) -> str | None:
    """Simulate the raters on one pair: 'a', 'b', or None (no unanimity).

    Each rater independently prefers ``a`` with probability
    sigmoid(beta * (score(a) - score(b))).  Deterministic for a fixed
    seed; pass an existing Generator to judge many pairs in sequence.
    """
    if a == b:
        raise ValueError("judge_pair requires two distinct design points")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = _sigmoid(cfg.beta * (true_score(a, cfg) - true_score(b, cfg)))
    votes_a = int(np.count_nonzero(rng.random(cfg.raters) < p))
    if votes_a == cfg.raters:
        return "a"
    if votes_a == 0:
        return "b"
    return None


def unanimity_probability(score_diffs: np.ndarray, beta: float, raters: int = 3) -> float:
    """Closed-form expected unanimity rate over the given score differences."""
    x = np.clip(beta * np.asarray(score_diffs, dtype=float), -60.0, 60.0)
    p = 1.0 / (1.0 + np.exp(-x))
    return float(np.mean(p**raters + (1.0 - p) ** raters))


def sample_score_diffs(
    grid: ParamGrid, cfg: OracleConfig, n_pairs: int, seed: int
) -> np.ndarray:
    """Score differences of random distinct pairs drawn from the grid.

    Mirrors pair generation: the two sides share a bar count (they must
    chart the same data) while the other parameters vary independently.
    """
    from dataclasses import replace as _replace

    rng = np.random.default_rng(seed)
    diffs = np.empty(n_pairs)
    for i in range(n_pairs):
        a = sample_params(grid, rng)
        b = _replace(sample_params(grid, rng), num_bars=a.num_bars)
        while b == a:
            b = _replace(sample_params(grid, rng), num_bars=a.num_bars)
        diffs[i] = true_score(a, cfg) - true_score(b, cfg)
    return diffs


def calibrate_beta(
    grid: ParamGrid,
    cfg: OracleConfig | None = None,
    target: float = TARGET_UNANIMITY,
    n_pairs: int = 20_000,
    seed: int = 1234,
    tol: float = 1e-4,
) -> tuple[OracleConfig, dict]:
    """Find beta so the expected unanimity over random pairs hits ``target``.

    The expected rate is computed in closed form over a seeded sample of
    random pairs, and is monotone increasing in beta (from the chance
    rate 2^(1-raters) toward 1), so bisection converges cleanly.
    """
    cfg = cfg or OracleConfig()
    chance = 2.0 ** (1 - cfg.raters)
    if not (chance < target < 1.0):
        raise ValueError(
            f"target {target} out of reach: chance rate is {chance} with "
            f"{cfg.raters} raters"
        )
    diffs = sample_score_diffs(grid, cfg, n_pairs, seed)
    lo, hi = 1e-6, 1.0
    while unanimity_probability(diffs, hi, cfg.raters) < target:
        hi *= 2.0
        if hi > 1e9:
            raise RuntimeError("calibration diverged; score differences may be all ~0")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if unanimity_probability(diffs, mid, cfg.raters) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    beta = 0.5 * (lo + hi)
    achieved = unanimity_probability(diffs, beta, cfg.raters)
    if abs(achieved - target) > tol:
        raise RuntimeError(
            f"calibration reached {achieved:.6f}, outside {target} +/- {tol}"
        )
    calibrated = replace(cfg, beta=beta)
    report = {
        "beta": beta,
        "target_unanimity": target,
        "expected_unanimity": achieved,
        "chance_rate": chance,
        "n_pairs": n_pairs,
        "seed": seed,
        "experiment": grid.experiment,
        "ground_truth": cfg.ground_truth,
    }
    return calibrated, report


def save_config(cfg: OracleConfig, path) -> None:
    from pathlib import Path

    Path(path).write_text(json.dumps(cfg.to_json_dict(), indent=2) + "\n")


def load_config(path) -> OracleConfig:
    from pathlib import Path

    return OracleConfig.from_json_dict(json.loads(Path(path).read_text()))
