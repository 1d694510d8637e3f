import numpy as np
import pytest

from layoutrank.model import ScoringModel, TrainConfig
from layoutrank.optimize import (
    Constraints,
    NoFeasibleLayoutError,
    default_chart_data,
    optimize,
)
from layoutrank.oracle import RULEBOOK_EXP1_OPTIMUM, OracleConfig, true_score
from layoutrank.params import enumerate_cells, normalize
from layoutrank.render import ChartData, desk_reject, render
from tests.conftest import constant_model


def independent_rescan(scorer, grid, feasible_fn):
    """Oracle: python loop over every cell, explicit max with tuple tie-break."""
    best = None
    best_score = None
    for p in enumerate_cells(grid):
        if not feasible_fn(p):
            continue
        s = scorer(p)
        if best is None or s > best_score or (s == best_score and p.sort_key() < best.sort_key()):
            best, best_score = p, s
    return best, best_score


def random_model(grid, seed) -> ScoringModel:
    rng = np.random.default_rng(seed)
    return ScoringModel.initialized(grid, TrainConfig(seed=seed), rng)


class TestOptimize:
    def test_oracle_scorer_matches_enumeration(self, exp1_grid):
        cfg = OracleConfig()
        res = optimize(lambda p: true_score(p, cfg), exp1_grid)
        best, best_score = independent_rescan(
            lambda p: true_score(p, cfg), exp1_grid, lambda p: True
        )
        assert res.params == best
        assert res.score == pytest.approx(best_score)
        assert (
            res.params.num_bars,
            res.params.aspect_ratio,
            res.params.bandwidth,
        ) == RULEBOOK_EXP1_OPTIMUM

    def test_matches_rescan_for_seeded_models_exp1(self, exp1_grid):
        for seed in range(6):
            model = random_model(exp1_grid, seed)
            res = optimize(model, exp1_grid)
            best, best_score = independent_rescan(
                model.score, exp1_grid, lambda p: True
            )
            assert res.params == best, seed
            assert res.score == pytest.approx(best_score, rel=1e-12)

    def test_width_constraint_below_minimum_errors(self, exp1_grid):
        model = random_model(exp1_grid, 0)
        min_width = 300 * min(exp1_grid.values["aspect_ratio"])
        with pytest.raises(NoFeasibleLayoutError):
            optimize(model, exp1_grid, constraints=Constraints(max_width_px=min_width - 1))

    def test_constraint_never_improves_optimum(self, exp1_grid):
        for seed in range(4):
            model = random_model(exp1_grid, seed + 50)
            free = optimize(model, exp1_grid).score
            capped = optimize(
                model, exp1_grid, constraints=Constraints(max_width_px=450)
            ).score
            assert capped <= free + 1e-12

    def test_constant_scorer_ties_break_lexicographically(self, exp1_grid):
        model = constant_model(exp1_grid, 1.0)
        res = optimize(model, exp1_grid)
        cells = list(enumerate_cells(exp1_grid))
        assert res.params == min(cells, key=lambda p: p.sort_key())

    def test_pinned_parameters(self, exp1_grid):
        model = random_model(exp1_grid, 2)
        res = optimize(
            model,
            exp1_grid,
            constraints=Constraints(pinned={"num_bars": 7, "bandwidth": 0.55}),
        )
        assert res.params.num_bars == 7
        assert res.params.bandwidth == 0.55
        for p, _ in res.top:
            assert p.num_bars == 7 and p.bandwidth == 0.55

    def test_data_pins_num_bars(self, exp1_grid):
        model = random_model(exp1_grid, 3)
        data = ChartData(categories=tuple("abcdefgh"), values=tuple(range(1, 9)))
        res = optimize(model, exp1_grid, data=data)
        assert res.params.num_bars == 8
        free = optimize(model, exp1_grid, data=data, pin_num_bars=False)
        assert free.score >= res.score

    def test_exp2_rules_respected(self, exp2_grid):
        model = random_model(exp2_grid, 4)
        res = optimize(model, exp2_grid, top_k=25)
        for p, _ in res.top:
            assert not (p.orientation == "horizontal" and p.label_rotation != 0)
            d = default_chart_data(p.num_bars)
            assert desk_reject(render(d, p), p, "exp2") is None
        assert res.n_feasible < res.n_cells

    def test_exp2_matches_rescan_over_feasible(self, exp2_grid):
        # independent argmax over the same feasibility set, loop + tuple order
        model = random_model(exp2_grid, 11)
        res = optimize(model, exp2_grid)
        feats = []
        cells = list(enumerate_cells(exp2_grid))
        X = np.stack([normalize(p, exp2_grid) for p in cells])
        scores = model.forward(X)
        best = None
        best_score = -np.inf
        for p, s in zip(cells, scores):
            if p.orientation == "horizontal" and p.label_rotation != 0:
                continue
            if desk_reject(render(default_chart_data(p.num_bars), p), p, "exp2"):
                continue
            if s > best_score or (s == best_score and p.sort_key() < best.sort_key()):
                best, best_score = p, s
        assert res.params == best
        assert res.score == pytest.approx(float(best_score), rel=1e-12)

    def test_top_k_sorted_and_consistent(self, exp1_grid):
        model = random_model(exp1_grid, 9)
        res = optimize(model, exp1_grid, top_k=10)
        assert len(res.top) == 10
        scores = [s for _, s in res.top]
        assert scores == sorted(scores, reverse=True)
        assert res.top[0][0] == res.params

    def test_bad_constraints(self):
        with pytest.raises(ValueError):
            Constraints(max_width_px=-5)
        with pytest.raises(ValueError):
            Constraints(pinned={"color": "red"})
