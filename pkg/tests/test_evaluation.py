import csv
import json

import numpy as np
import pytest

from layoutrank.evaluation import correlations, export_analysis, mccv
from layoutrank.model import TrainConfig
from layoutrank.oracle import OracleConfig
from layoutrank.pairs import Dataset, generate_pairs, label_pairs
from layoutrank.params import enumerate_cells, normalize
from tests.conftest import constant_model, linear_feature_model


@pytest.fixture(scope="module")
def small_dataset(exp1_grid):
    cfg = OracleConfig(beta=1e6, seed=8)
    ds, _ = label_pairs(generate_pairs(exp1_grid, 300, seed=8), cfg, "exp1")
    return ds


class TestMccv:
    def test_reproducible(self, small_dataset, exp1_grid):
        a = mccv(small_dataset, "ranksvm", runs=4, seed=5, grid=exp1_grid)
        b = mccv(small_dataset, "ranksvm", runs=4, seed=5, grid=exp1_grid)
        assert a == b

    def test_mean_within_run_bounds(self, small_dataset, exp1_grid):
        rep = mccv(small_dataset, "ranksvm", runs=6, seed=2, grid=exp1_grid)
        accs = [r["accuracy"] for r in rep["runs"]]
        assert min(accs) <= rep["mean_accuracy"] <= max(accs)

    def test_random_labels_near_half(self, exp1_grid):
        # binomial: with ~60-pair test sets over 10 runs the mean stays
        # within 0.5 +/- 0.08
        rng = np.random.default_rng(14)
        pairs = generate_pairs(exp1_grid, 300, seed=14)
        for p in pairs:
            p.label = "a" if rng.random() < 0.5 else "b"
            p.label_via = "oracle"
        ds = Dataset(pairs, "exp1")
        rep = mccv(ds, "ranksvm", runs=10, seed=3, grid=exp1_grid)
        assert abs(rep["mean_accuracy"] - 0.5) <= 0.08

    def test_train_set_memorization_sanity(self, exp1_grid):
        # noiseless, well-separated labels evaluated on the training split
        cfg = OracleConfig(beta=1e9, seed=4)
        from layoutrank.oracle import true_score

        raw = generate_pairs(exp1_grid, 600, seed=4)
        raw = [
            p
            for p in raw
            if abs(true_score(p.params_a, cfg) - true_score(p.params_b, cfg)) > 0.15
        ][:50]
        ds, _ = label_pairs(raw, cfg, "exp1")
        rep = mccv(
            ds,
            "model",
            runs=1,
            seed=6,
            grid=exp1_grid,
            train_config=TrainConfig(
                epochs=400, halve_every=100, dropout=0.0, val_fraction=0.0
            ),
            eval_on_train=True,
        )
        assert rep["mean_accuracy"] == 1.0

    def test_unknown_method(self, small_dataset):
        with pytest.raises(ValueError, match="unknown method"):
            mccv(small_dataset, "gradient-boosting")

    def test_too_small_dataset(self, exp1_grid):
        ds = Dataset(generate_pairs(exp1_grid, 5, seed=1), "exp1")
        with pytest.raises(ValueError, match="at least 10"):
            mccv(ds, "ranksvm")


class TestCorrelations:
    def test_identity_on_bandwidth(self, exp1_grid):
        model = linear_feature_model(exp1_grid, "bandwidth", slope=1.0)
        r = correlations(model, exp1_grid)
        assert r["bandwidth"] == pytest.approx(1.0)
        assert abs(r["num_bars"]) < 1e-9
        assert r["max_label_length"] is None  # fixed parameter

    def test_constant_model_undefined(self, exp1_grid):
        model = constant_model(exp1_grid, 2.0)
        r = correlations(model, exp1_grid)
        assert all(v is None for v in r.values())

    def test_orientation_coded_binary(self, exp2_grid):
        model = linear_feature_model(exp2_grid, "orientation", slope=1.0)
        r = correlations(model, exp2_grid)
        assert r["orientation"] == pytest.approx(1.0)


class TestExportAnalysis:
    def test_files_and_shapes(self, exp1_grid, exp1_model, tmp_path, exp1_dataset):
        paths = export_analysis(
            exp1_model, exp1_grid, tmp_path, dataset=exp1_dataset, samples=20, seed=1
        )
        with open(paths["heatmaps"]) as f:
            rows = list(csv.DictReader(f))
        pair_rows = [
            r
            for r in rows
            if r["param_x"] == "aspect_ratio" and r["param_y"] == "bandwidth"
        ]
        assert len(pair_rows) == 9 * 7
        assert all(np.isfinite(float(r["mean_score"])) for r in pair_rows)

        with open(paths["boxplot"]) as f:
            box_rows = list(csv.reader(f))[1:]
        cardinality = sum(len(exp1_grid.values[n]) for n in exp1_grid.free_params)
        assert len(box_rows) == cardinality * 20

        report = json.loads((tmp_path / "report.json").read_text())
        assert "correlations" in report and "label_agreement" in report

    def test_heat_marginalization_exact(self, exp1_grid, exp1_model, tmp_path):
        # independent recomputation: python loop over all 1,575 cells
        paths = export_analysis(exp1_model, exp1_grid, tmp_path, samples=5, seed=0)
        cells = list(enumerate_cells(exp1_grid))
        scores = exp1_model.forward(
            np.stack([normalize(p, exp1_grid) for p in cells])
        )
        full_mean = float(np.mean(scores))
        with open(paths["heatmaps"]) as f:
            rows = list(csv.DictReader(f))
        for px, py in [("num_bars", "aspect_ratio"), ("aspect_ratio", "bandwidth")]:
            vals = [
                float(r["mean_score"])
                for r in rows
                if r["param_x"] == px and r["param_y"] == py
            ]
            assert np.mean(vals) == pytest.approx(full_mean, abs=1e-9)
