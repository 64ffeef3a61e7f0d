"""Covariance, objective, partitions and the factor invariants."""
import math

import numpy as np
import pytest
from pytest import approx

from app.exceptions import DegenerateDataError, DomainError, InputError, InvariantViolation, PartitionError
from app.models import CholeskyFactor, Partition, SampleCovariance
from app.services.likelihood import (
    compute_covariance,
    objective,
    objective_by_block,
    validate_partition,
)
from tests.conftest import make_pd


def _random_lower(rng, p):
    B = np.tril(rng.uniform(-0.8, 0.8, (p, p)), k=-1)
    B[rng.random((p, p)) < 0.5] = 0.0
    np.fill_diagonal(B, rng.uniform(0.5, 2.0, p))
    return B


class TestComputeCovariance:
    def test_uncentered_outer_product(self):
        S = compute_covariance([[1, 2], [-1, -2]], center=False)
        np.testing.assert_allclose(S.entries, [[1, 2], [2, 4]])

    def test_exactly_symmetric(self):
        rng = np.random.default_rng(3)
        S = compute_covariance(rng.standard_normal((30, 6)))
        assert np.array_equal(S.entries, S.entries.T)

    def test_default_names(self):
        S = compute_covariance(np.random.default_rng(0).standard_normal((5, 3)))
        assert S.names == ("X1", "X2", "X3")

    def test_zero_variance_names_column(self):
        with pytest.raises(DegenerateDataError) as err:
            compute_covariance([[1, 0], [-1, 0]], center=False)
        assert err.value.variable == "X2"

    def test_constant_column_after_centering(self):
        with pytest.raises(DegenerateDataError):
            compute_covariance([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]], names=["a", "b"])

    def test_non_finite(self):
        with pytest.raises(InputError):
            compute_covariance([[1.0, np.nan], [2.0, 1.0]])

    def test_monte_carlo_identity(self):
        X = np.random.default_rng(11).standard_normal((100_000, 3))
        S = compute_covariance(X)
        assert np.max(np.abs(S.entries - np.eye(3))) < 0.05

    def test_sample_covariance_symmetrizes(self):
        S = SampleCovariance(entries=[[1.0, 0.2], [0.4, 1.0]])
        assert S.entries[0, 1] == S.entries[1, 0] == approx(0.3)

    def test_entries_read_only(self):
        S = SampleCovariance(entries=np.eye(2))
        with pytest.raises(ValueError):
            S.entries[0, 0] = 5.0


class TestObjective:
    def test_identity_with_penalty(self):
        assert objective(np.eye(2), np.eye(2), 1.0) == approx(2.0)

    def test_diagonal_covariance(self):
        assert objective(np.eye(2), np.diag([1.0, 2.0]), 0.0) == approx(3.0)

    def test_scalar_optimum(self):
        b = 1 / math.sqrt(2)
        assert objective(np.array([[b]]), np.array([[1.0]]), 0.0) == approx(0.5 + 0.5 * math.log(2))

    def test_diagonal_minimizer_on_grid(self):
        for s in (0.3, 1.0, 4.0):
            grid = np.linspace(1e-3, 5.0, 200_001)
            values = s * grid**2 - np.log(grid)
            assert grid[np.argmin(values)] == approx(1 / math.sqrt(2 * s), abs=1e-4)

    def test_penalty_counts_off_diagonals_only(self):
        B = np.array([[2.0, 0.0], [-0.5, 1.0]])
        S = np.eye(2)
        assert objective(B, S, 1.0) - objective(B, S, 0.0) == approx(0.5)

    def test_non_positive_diagonal(self):
        with pytest.raises(DomainError):
            objective(np.diag([1.0, 0.0]), np.eye(2), 0.1)

    def test_shape_mismatch(self):
        with pytest.raises(InputError):
            objective(np.eye(2), np.eye(3), 0.1)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(5)
        p = 6
        B = _random_lower(rng, p)
        S = make_pd(rng, p)
        perm = rng.permutation(p)
        permuted = objective(B[np.ix_(perm, perm)], S[np.ix_(perm, perm)], 0.3)
        assert permuted == approx(objective(B, S, 0.3), rel=1e-12)

    def test_block_terms_sum_to_total(self):
        rng = np.random.default_rng(8)
        p = 7
        partition = Partition.single(p)
        B = CholeskyFactor(values=_random_lower(rng, p), partition=partition)
        S = SampleCovariance(entries=make_pd(rng, p))
        terms = objective_by_block(B, S, 0.2)
        assert sum(terms) == approx(objective(B, S, 0.2), rel=1e-10)

        split = Partition(blocks=[[0, 1, 2], [3, 4, 5, 6]])
        lower = B.values.copy()
        lower[:3, 3:] = 0.0
        terms = objective_by_block(CholeskyFactor(values=lower, partition=split), S, 0.2)
        assert len(terms) == 2
        assert sum(terms) == approx(objective(lower, S, 0.2), rel=1e-10)


class TestPartition:
    def test_relabeling_order_and_bounds(self):
        relabel = validate_partition(Partition(blocks=[[2], [0, 1]]))
        assert relabel.order == (2, 0, 1)
        assert relabel.bounds == (0, 1, 3)

    def test_single_block_is_identity(self):
        relabel = validate_partition(Partition.single(4))
        assert relabel.is_identity
        assert relabel.bounds == (0, 4)

    def test_overlap_names_variable(self):
        with pytest.raises(PartitionError, match="variable 2 in two blocks"):
            Partition(blocks=[[0, 1], [1, 2]], p=3)

    def test_missing_variable(self):
        with pytest.raises(PartitionError, match="missing"):
            Partition(blocks=[[0], [2]], p=3)

    def test_sets_are_sorted(self):
        partition = Partition(blocks=[{2, 0}, {1}])
        assert partition.blocks == ((0, 2), (1,))

    def test_from_names_unknown(self):
        with pytest.raises(PartitionError) as err:
            Partition.from_names([["a"], ["b", "zz"]], ["a", "b"])
        assert err.value.offenders == ["zz"]

    def test_name_mismatch_with_data(self):
        partition = Partition.from_names([["b"], ["a"]], ["a", "b"])
        with pytest.raises(PartitionError):
            validate_partition(partition, ["a", "c"])

    def test_round_trip_canonical(self):
        rng = np.random.default_rng(1)
        M = rng.standard_normal((5, 5))
        relabel = validate_partition(Partition(blocks=[[3, 1], [4], [0, 2]]))
        assert np.array_equal(relabel.to_original(relabel.to_canonical(M)), M)


class TestCholeskyFactor:
    def test_edge_convention(self):
        B = CholeskyFactor(values=[[1.0, 0.0], [0.5, 1.0]], partition=Partition.single(2))
        assert [(e.parent, e.child) for e in B.edges] == [(0, 1)]
        assert B.edge_count == 1

    def test_structural_zero(self):
        with pytest.raises(InvariantViolation, match="structural zero"):
            CholeskyFactor(values=[[1.0, 0.3], [0.0, 1.0]], partition=Partition.singletons([0, 1]))

    def test_pair_exclusive(self):
        with pytest.raises(InvariantViolation):
            CholeskyFactor(values=[[1.0, 0.3], [0.2, 1.0]], partition=Partition.single(2))

    def test_within_block_cycle(self):
        B = np.eye(3)
        B[1, 0] = B[2, 1] = B[0, 2] = 0.4  # 0 -> 1 -> 2 -> 0
        with pytest.raises(InvariantViolation, match="cycle"):
            CholeskyFactor(values=B, partition=Partition.single(3))

    def test_positive_diagonal(self):
        with pytest.raises(DomainError):
            CholeskyFactor(values=np.diag([1.0, -1.0]), partition=Partition.single(2))

    def test_precision(self):
        B = CholeskyFactor(values=[[2.0, 0.0], [1.0, 1.0]], partition=Partition.single(2))
        np.testing.assert_allclose(B.precision, [[5.0, 1.0], [1.0, 1.0]])
