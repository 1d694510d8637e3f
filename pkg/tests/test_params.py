import json

import numpy as np
import pytest

from layoutrank.params import (
    EXP1_SIZE,
    EXP2_SIZE,
    PARAM_ORDER,
    LayoutParams,
    ParamGrid,
    cell_at,
    default_grid,
    encode_value,
    enumerate_cells,
    enumerate_features,
    normalize,
    sample_params,
)


def test_default_grid_counts(exp1_grid, exp2_grid):
    assert exp1_grid.size == EXP1_SIZE == 1_575
    assert exp2_grid.size == EXP2_SIZE == 87_360


def test_bandwidth_list_step(exp1_grid, exp2_grid):
    expected = [0.10, 0.25, 0.40, 0.55, 0.70, 0.85, 1.00]
    for grid in (exp1_grid, exp2_grid):
        assert grid.values["bandwidth"] == pytest.approx(expected)
        assert len(grid.values["bandwidth"]) == 7


def test_exp2_aspect_capped_at_two(exp2_grid):
    assert max(exp2_grid.values["aspect_ratio"]) == 2.0


def test_exp1_fixed_parameters(exp1_grid):
    assert exp1_grid.values["max_label_length"] == [2]
    assert exp1_grid.values["label_rotation"] == [0]
    assert exp1_grid.values["orientation"] == ["vertical"]
    assert exp1_grid.free_params == ("num_bars", "aspect_ratio", "bandwidth")


def test_initial_probabilities_uniform(exp2_grid):
    for name in PARAM_ORDER:
        probs = exp2_grid.probabilities[name]
        assert probs == pytest.approx([1.0 / len(probs)] * len(probs))
        assert abs(sum(probs) - 1.0) <= 1e-9


def test_layout_params_validation():
    with pytest.raises(ValueError):
        LayoutParams(num_bars=1, aspect_ratio=1.0, bandwidth=0.5)
    with pytest.raises(ValueError):
        LayoutParams(num_bars=5, aspect_ratio=1.0, bandwidth=0.0)
    with pytest.raises(ValueError):
        LayoutParams(num_bars=5, aspect_ratio=1.0, bandwidth=1.5)
    with pytest.raises(ValueError):
        LayoutParams(num_bars=5, aspect_ratio=-1.0, bandwidth=0.5)
    with pytest.raises(ValueError):
        LayoutParams(num_bars=5, aspect_ratio=1.0, bandwidth=0.5, label_rotation=30)
    with pytest.raises(ValueError):
        LayoutParams(num_bars=5, aspect_ratio=1.0, bandwidth=0.5, orientation="diagonal")


class TestNormalize:
    def test_grid_minimum_maps_to_zeros(self, exp2_grid):
        p = LayoutParams(
            num_bars=2,
            aspect_ratio=0.125,
            bandwidth=0.10,
            max_label_length=2,
            label_rotation=0,
            orientation="vertical",
        )
        assert normalize(p, exp2_grid) == pytest.approx(np.zeros(6))

    def test_grid_maximum_maps_to_ones(self, exp2_grid):
        p = LayoutParams(
            num_bars=27,
            aspect_ratio=2.0,
            bandwidth=1.0,
            max_label_length=10,
            label_rotation=90,
            orientation="horizontal",
        )
        assert normalize(p, exp2_grid) == pytest.approx(np.ones(6))

    def test_bandwidth_midpoint(self, exp1_grid):
        # hand-evaluated: (0.55 - 0.10) / 0.90 = 0.5
        p = LayoutParams(num_bars=2, aspect_ratio=1.0, bandwidth=0.55)
        feats = normalize(p, exp1_grid)
        assert feats[2] == pytest.approx(0.5)

    def test_monotone_and_invertible_on_grid_values(self, exp2_grid):
        # strictly increasing normalized values per dimension invert uniquely
        base = dict(
            num_bars=5,
            aspect_ratio=1.0,
            bandwidth=0.55,
            max_label_length=4,
            label_rotation=45,
            orientation="vertical",
        )
        for i, name in enumerate(exp2_grid.free_params):
            feats = []
            for v in exp2_grid.values[name]:
                p = LayoutParams(**{**base, name: v})
                feats.append(normalize(p, exp2_grid)[i])
            assert all(b > a for a, b in zip(feats, feats[1:]))
            assert len(set(feats)) == len(feats)

    def test_out_of_grid_names_parameter(self, exp1_grid):
        p = LayoutParams(num_bars=40, aspect_ratio=1.0, bandwidth=0.5)
        with pytest.raises(ValueError, match="num_bars"):
            normalize(p, exp1_grid)


class TestSampling:
    def test_uniform_frequencies_within_3_sigma(self, exp1_grid):
        # binomial bound: sd = sqrt(p(1-p)/n) per value, p = 1/|V_i|
        n = 10_000
        rng = np.random.default_rng(6)
        draws = [sample_params(exp1_grid, rng) for _ in range(n)]
        for name in exp1_grid.free_params:
            vals = exp1_grid.values[name]
            p = 1.0 / len(vals)
            sd = (p * (1 - p) / n) ** 0.5
            for v in vals:
                freq = sum(1 for d in draws if d.value_of(name) == v) / n
                assert abs(freq - p) <= 3 * sd, (name, v, freq)

    def test_degenerate_grid_returns_exact_point(self):
        grid = ParamGrid(
            values={
                "num_bars": [4],
                "aspect_ratio": [1.5],
                "bandwidth": [0.7],
                "max_label_length": [2],
                "label_rotation": [0],
                "orientation": ["vertical"],
            }
        )
        p = sample_params(grid, 0)
        assert p == LayoutParams(4, 1.5, 0.7)

    def test_point_mass_probability(self, exp1_grid):
        probs = {
            name: list(exp1_grid.probabilities[name]) for name in PARAM_ORDER
        }
        probs["bandwidth"] = [1.0, 0, 0, 0, 0, 0, 0]
        grid = ParamGrid(
            values={n: list(exp1_grid.values[n]) for n in PARAM_ORDER},
            probabilities=probs,
        )
        rng = np.random.default_rng(5)
        for _ in range(200):
            assert sample_params(grid, rng).bandwidth == 0.10

    def test_samples_never_leave_grid(self, exp2_grid):
        rng = np.random.default_rng(9)
        for _ in range(500):
            p = sample_params(exp2_grid, rng)
            for name in PARAM_ORDER:
                assert p.value_of(name) in exp2_grid.values[name]


class TestEnumeration:
    def test_exp1_enumerates_distinct_cells(self, exp1_grid):
        cells = list(enumerate_cells(exp1_grid))
        assert len(cells) == EXP1_SIZE
        assert len({c.sort_key() for c in cells}) == EXP1_SIZE

    def test_cell_at_matches_enumeration(self, exp1_grid):
        cells = list(enumerate_cells(exp1_grid))
        for idx in (0, 1, 500, EXP1_SIZE - 1):
            assert cell_at(exp1_grid, idx) == cells[idx]

    def test_feature_matrix_matches_normalize(self, exp2_grid):
        feats = enumerate_features(exp2_grid)
        assert feats.shape == (EXP2_SIZE, 6)
        rng = np.random.default_rng(2)
        for idx in rng.integers(0, EXP2_SIZE, size=20):
            p = cell_at(exp2_grid, int(idx))
            assert feats[idx] == pytest.approx(normalize(p, exp2_grid))


class TestGridValidation:
    def test_probabilities_must_sum_to_one(self, exp1_grid):
        probs = {name: list(exp1_grid.probabilities[name]) for name in PARAM_ORDER}
        probs["bandwidth"] = [0.5] * 7
        with pytest.raises(ValueError, match="sum"):
            ParamGrid(
                values={n: list(exp1_grid.values[n]) for n in PARAM_ORDER},
                probabilities=probs,
            )

    def test_values_strictly_increasing(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ParamGrid(
                values={
                    "num_bars": [4, 4],
                    "aspect_ratio": [1.0],
                    "bandwidth": [0.5],
                    "max_label_length": [2],
                    "label_rotation": [0],
                    "orientation": ["vertical"],
                }
            )

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            ParamGrid(
                values={
                    "num_bars": [4],
                    "aspect_ratio": [1.0],
                    "bandwidth": [0.5],
                    "max_label_length": [2],
                    "label_rotation": [0],
                    "orientation": ["vertical"],
                    "color": ["red"],
                }
            )

    def test_json_round_trip(self, exp2_grid, tmp_path):
        path = tmp_path / "grid.json"
        exp2_grid.save(path)
        loaded = ParamGrid.load(path)
        assert loaded.values == exp2_grid.values
        assert loaded.probabilities == exp2_grid.probabilities
        assert loaded.cap == exp2_grid.cap
        assert loaded.experiment == "exp2"

    def test_flat_schema_loads(self, tmp_path):
        # schema: parameter name -> value list, plus optional meta keys
        d = {
            "num_bars": [2, 3],
            "aspect_ratio": [1.0, 2.0],
            "bandwidth": [0.5, 1.0],
            "max_label_length": [2],
            "label_rotation": [0],
            "orientation": ["vertical"],
        }
        path = tmp_path / "flat.json"
        path.write_text(json.dumps(d))
        grid = ParamGrid.load(path)
        assert grid.size == 8
        assert grid.experiment == "custom"


def test_encode_value_orientation():
    assert encode_value("orientation", "vertical") == 0.0
    assert encode_value("orientation", "horizontal") == 1.0
    assert encode_value("bandwidth", 0.7) == 0.7
