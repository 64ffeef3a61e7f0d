"""Pair classes, class-wise ROC curves, AUC-MA and known-edge audits."""
import math

import numpy as np
import pytest
from pytest import approx

from app.exceptions import InvariantViolation
from app.models import KnownEdge, PairClass
from app.services.evaluate import (
    audit_known_edges,
    audit_table,
    auc_ma,
    class_curves,
    classify_pairs,
    edge_density,
    format_audit_table,
    roc_points,
)

F, B, N = PairClass.FORWARD, PairClass.BACKWARD, PairClass.NONE


def from_labels(labels, p=3) -> np.ndarray:
    """Factor-shaped matrix whose pairs (row-major, i < j) carry the given classes."""
    M = np.eye(p)
    a, b = np.triu_indices(p, k=1)
    for i, j, label in zip(a, b, labels):
        if label == F:
            M[j, i] = 1.0
        elif label == B:
            M[i, j] = 1.0
    return M


class TestClassifyPairs:
    def test_identity(self):
        labels = classify_pairs(np.eye(4))
        assert labels.counts() == {N: 6, F: 0, B: 0}

    def test_forward_edge(self):
        M = np.eye(2)
        M[1, 0] = -0.4  # 0 -> 1
        assert list(classify_pairs(M).labels) == [F]
        M = np.eye(2)
        M[0, 1] = 0.2
        assert list(classify_pairs(M).labels) == [B]

    def test_magnitude_invariance(self):
        M = np.eye(3)
        M[2, 0] = 1e-9
        scaled = M.copy()
        scaled[2, 0] = -50.0
        assert np.array_equal(classify_pairs(M).labels, classify_pairs(scaled).labels)

    def test_counts_cover_pairs(self):
        rng = np.random.default_rng(0)
        M = np.tril(rng.random((7, 7)) < 0.4, k=-1).astype(float) + np.eye(7)
        assert sum(classify_pairs(M).counts().values()) == 21

    def test_both_directions(self):
        M = np.eye(2)
        M[0, 1] = M[1, 0] = 0.5
        with pytest.raises(InvariantViolation):
            classify_pairs(M)


class TestRoc:
    # truth: 0 -> 1 (F), 2 -> 0 (B), pair (1, 2) absent
    truth = classify_pairs(from_labels([F, B, N]))
    path = [from_labels([N, N, N]), from_labels([F, N, B]), from_labels([F, F, B])]

    def test_hand_enumerated_three_nodes(self):
        curves = {c.pair_class: c for c in class_curves(self.path, self.truth)}
        assert curves[F].points == ((0.0, 0.0), (0.0, 1.0), (0.5, 1.0))
        assert curves[F].auc_normalized == approx(1.0)
        assert curves[B].auc_normalized == approx(0.0)
        assert curves[N].points == ((0.0, 0.0), (0.5, 0.0), (1.0, 1.0))
        assert curves[N].auc_normalized == approx(0.25)
        assert auc_ma(self.path, self.truth) == approx(1.25 / 3, abs=1e-12)

    def test_order_of_path_does_not_matter(self):
        assert auc_ma(self.path[::-1], self.truth) == auc_ma(self.path, self.truth)

    def test_perfect_path(self):
        path = [
            from_labels([N, N, N]),
            from_labels([F, B, N]),
            from_labels([F, F, F]),
            from_labels([B, B, B]),
        ]
        for curve in class_curves(path, self.truth):
            assert curve.auc_normalized == approx(1.0)
        assert auc_ma(path, self.truth) == approx(1.0)

    def test_curve_spans_sparse_to_dense(self):
        path = [from_labels([N, N, N]), from_labels([F, F, F])]
        curve = roc_points(path, self.truth, F)
        assert curve.points[0] == (0.0, 0.0)
        assert curve.points[-1] == (1.0, 1.0)

    def test_single_estimate_is_undefined(self):
        curve = roc_points([from_labels([F, N, N])], self.truth, F)
        assert not curve.defined
        assert curve.auc_normalized is None

    def test_no_positives_is_undefined(self):
        truth = classify_pairs(from_labels([F, F, N]))
        curve = roc_points(self.path, truth, B)
        assert not curve.defined
        assert "positives" in curve.reason

    def test_all_classes_undefined(self):
        assert math.isnan(auc_ma([np.eye(3)], self.truth))

    def test_empty_path_points(self):
        path = [np.eye(3), np.eye(3)]
        for pair_class in (F, B):
            curve = roc_points(path, self.truth, pair_class)
            assert set(curve.points) == {(0.0, 0.0)}

    def test_random_guessing_is_near_half(self):
        rng = np.random.default_rng(21)
        p = 10
        pairs = p * (p - 1) // 2
        scores = []
        for _ in range(200):
            truth = classify_pairs(from_labels(rng.integers(0, 3, pairs), p))
            path = [from_labels([N] * pairs, p), from_labels([F] * pairs, p), from_labels([B] * pairs, p)]
            for _ in range(8):
                weights = rng.dirichlet([1.0, 1.0, 1.0])
                path.append(from_labels(rng.choice(3, size=pairs, p=weights), p))
            scores.append(auc_ma(path, truth))
        assert np.mean(scores) == approx(0.5, abs=0.05)


class TestAudit:
    names = ["a", "b", "c"]

    def _estimate(self):
        M = np.eye(3)
        M[1, 0] = 0.4   # a -> b
        M[2, 1] = -0.2  # b -> c
        return M

    def test_all_present(self):
        report = audit_known_edges(self._estimate(), [("a", "b"), ("b", "c")], self.names)
        assert report.fraction == 1.0
        assert report.present == report.total == 2

    def test_empty_estimate(self):
        report = audit_known_edges(np.eye(3), [("a", "b"), ("b", "c")], self.names)
        assert report.fraction == 0.0

    def test_direction_matters(self):
        report = audit_known_edges(self._estimate(), [("b", "a")], self.names)
        assert not report.entries[0].present

    def test_index_edges(self):
        report = audit_known_edges(self._estimate(), [(0, 1)], self.names)
        assert report.entries[0].parent == "a"
        assert report.entries[0].present

    def test_sign_agreement(self):
        known = [KnownEdge(parent="a", child="b", sign=1), KnownEdge(parent="b", child="c", sign=1)]
        report = audit_known_edges(self._estimate(), known, self.names)
        assert [e.sign_agrees for e in report.entries] == [True, False]

    def test_nested_supports_are_monotone(self):
        known = [("a", "b"), ("b", "c"), ("a", "c")]
        supports = [np.eye(3), np.eye(3), np.eye(3)]
        supports[1][1, 0] = 0.3
        supports[2][1, 0] = 0.3
        supports[2][2, 0] = 0.1
        fractions = [audit_known_edges(M, known, self.names).fraction for M in supports]
        assert fractions == sorted(fractions)

    def test_table(self):
        reports = audit_table({"coarse": np.eye(3), "fine": self._estimate()}, [("a", "b")], self.names)
        text = format_audit_table(reports)
        assert "Pres" in text and "Abs" in text
        assert "(a, b)" in text


class TestEdgeDensity:
    def test_values(self):
        assert edge_density(np.eye(4)) == 0.0
        M = np.eye(3)
        M[1, 0] = 0.5
        assert edge_density(M) == approx(1 / 3)
        assert edge_density(np.tril(np.ones((5, 5)))) == 1.0
