from types import SimpleNamespace

import numpy as np
import pytest
from pytest import approx

from app.exceptions import GridError, InputError
from app.models import FitOptions, Partition
from app.services.evaluate import edge_density
from app.services.optimizer import fit
from app.services.partitions import equal_blocks
from app.services.path import fit_path, penalty_grid, select_lambda_for_density


class TestPenaltyGrid:
    def test_endpoints(self, synthetic):
        _, S = synthetic(10, 0.7, 200, seed=1)
        partition = Partition.single(10)
        grid = penalty_grid(S, partition, 2)
        assert grid[1] == approx(grid[0] / 1e4)
        assert fit(S, partition, FitOptions(lam=grid[0])).estimate.edge_count == 0

    def test_strictly_decreasing(self, synthetic):
        _, S = synthetic(6, 0.6, 100, seed=2)
        grid = penalty_grid(S, Partition.single(6), 12)
        assert len(grid) == 12
        assert all(a > b for a, b in zip(grid, grid[1:]))

    def test_dense_end(self, synthetic):
        _, S = synthetic(10, 0.7, 200, seed=3)
        partition = Partition.singletons(range(10))
        grid = penalty_grid(S, partition, 2)
        dense = fit(S, partition, FitOptions(lam=grid[-1]))
        assert dense.estimate.edge_count >= 0.8 * 45

    def test_gives_up_after_doublings(self, synthetic, monkeypatch):
        _, S = synthetic(4, 0.5, 50)
        tried = []

        def never_empty(S, partition, options, lam):
            tried.append(lam)
            return SimpleNamespace(estimate=SimpleNamespace(edge_count=1))

        monkeypatch.setattr("app.services.path._fit_at", never_empty)
        with pytest.raises(GridError) as excinfo:
            penalty_grid(S, Partition.single(4), 5)
        assert len(tried) == 60
        assert max(tried) == 2.0 ** 59
        assert f"{2.0 ** 59:g}" in str(excinfo.value)

    def test_needs_two_values(self, synthetic):
        _, S = synthetic(4, 0.5, 50)
        with pytest.raises(InputError):
            penalty_grid(S, Partition.single(4), 1)


class TestFitPath:
    def test_one_fit_per_penalty(self, synthetic):
        _, S = synthetic(6, 0.6, 100, seed=4)
        partition = Partition(blocks=[[0, 1, 2], [3, 4, 5]])
        grid = penalty_grid(S, partition, 5)
        path = fit_path(S, partition, grid)
        assert len(path) == 5
        assert list(path.lambdas) == grid
        assert [r.lam for r in path.results] == grid
        assert path.results[0].estimate.edge_count == 0

    def test_no_warm_starts(self, synthetic):
        _, S = synthetic(6, 0.6, 100, seed=5)
        partition = Partition.single(6)
        grid = [0.5, 0.05, 0.005]
        path = fit_path(S, partition, grid)
        for lam, result in zip(grid, path.results):
            alone = fit(S, partition, FitOptions(lam=lam))
            assert np.array_equal(alone.estimate.values, result.estimate.values)

    def test_empty_grid(self, synthetic):
        _, S = synthetic(4, 0.5, 50)
        with pytest.raises(InputError):
            fit_path(S, Partition.single(4), [])


class TestDensitySelection:
    def test_zero_target_is_empty(self, synthetic):
        _, S = synthetic(8, 0.6, 100, seed=6)
        selection = select_lambda_for_density(S, Partition.single(8), 0.0)
        assert selection.result.estimate.edge_count == 0
        assert selection.hit
        assert selection.lam == approx(penalty_grid(S, Partition.single(8), 2)[0])

    def test_hits_target(self, synthetic):
        _, S = synthetic(20, 0.8, 200, seed=7)
        partition = equal_blocks(range(20), 2)
        selection = select_lambda_for_density(S, partition, 0.2, tolerance=0.02)
        assert selection.hit
        assert abs(edge_density(selection.result.estimate) - 0.2) <= 0.02
        assert selection.density == edge_density(selection.result.estimate)

    def test_thirty_six_variables_ten_blocks(self, synthetic):
        model, S = synthetic(36, 0.9, 200, seed=8)
        partition = equal_blocks(model.topological_order, 10)
        selection = select_lambda_for_density(S, partition, 0.33, tolerance=0.02)
        assert 0.31 <= selection.density <= 0.35

    def test_target_out_of_range(self, synthetic):
        _, S = synthetic(4, 0.5, 50)
        with pytest.raises(InputError):
            select_lambda_for_density(S, Partition.single(4), 1.0)
