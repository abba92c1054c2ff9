import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cpeval.conformal import (
    CalibrationTable,
    Epsilon,
    PredictionSet,
    PValuePair,
    build_calibration,
    nonconformity,
    p_values,
    p_values_batch,
    prediction_set,
    prediction_sets_batch,
)
from cpeval.data import NEGATIVE, POSITIVE, Dataset
from cpeval.errors import EmptyClassCalibration


def table(pos, neg=(0.5,)):
    return CalibrationTable(np.array(pos), np.array(neg))


class TestNonconformity:
    def test_perfectly_conforming(self):
        assert nonconformity(1.0, POSITIVE) == 0.0

    def test_maximally_nonconforming(self):
        assert nonconformity(1.0, NEGATIVE) == 1.0

    def test_complement(self):
        assert nonconformity(0.3, POSITIVE) == pytest.approx(0.7)
        assert nonconformity(0.3, NEGATIVE) == pytest.approx(0.3)


class TestBuildCalibration:
    def test_scores_sorted_per_class(self):
        class Model:
            dim = 1

            def predict_proba(self, X):
                return np.array([0.9, 0.6, 0.2])

        ds = Dataset(np.zeros((3, 1)), np.array([1, 1, 0]), ("a", "b", "c"))
        t = build_calibration(Model(), ds)
        assert list(t.pos_scores) == pytest.approx([0.1, 0.4])
        assert list(t.neg_scores) == pytest.approx([0.2])

    def test_missing_class_rejected(self):
        class Model:
            def predict_proba(self, X):
                return np.full(len(X), 0.5)

        ds = Dataset(np.zeros((3, 1)), np.array([1, 1, 1]), ("a", "b", "c"))
        with pytest.raises(EmptyClassCalibration):
            build_calibration(Model(), ds)

    def test_empty_table_rejected(self):
        with pytest.raises(EmptyClassCalibration):
            CalibrationTable(np.array([]), np.array([0.5]))


def brute_force_p(scores, alpha):
    """Independent quadratic-scan oracle for the rank count."""
    count = 0
    for s in scores:
        if s >= alpha:
            count += 1
    return (count + 1) / (len(scores) + 1)


class TestPValues:
    def test_hand_count(self):
        t = table([0.1, 0.2, 0.3])
        p = p_values(t, 1.0 - 0.25)  # alpha_pos = 0.25
        assert p.p_pos == pytest.approx((1 + 1) / (3 + 1))

    def test_minimal_rank(self):
        t = table([0.1, 0.2, 0.3])
        p = p_values(t, 1.0)  # alpha_pos = 0 < all, maximal conformity
        assert p.p_pos == 1.0
        p = p_values(t, 0.0)  # alpha_pos = 1 > all
        assert p.p_pos == pytest.approx(1 / 4)

    def test_tie_counts_toward_numerator(self):
        t = table([0.1, 0.2, 0.3])
        p = p_values(t, 1.0 - 0.2)  # alpha equals a calibration score
        assert p.p_pos == pytest.approx((2 + 1) / 4)

    def test_batch_matches_scalar(self):
        t = table([0.05, 0.4, 0.4, 0.9], [0.1, 0.6])
        probas = np.linspace(0.0, 1.0, 21)
        p_pos, p_neg = p_values_batch(t, probas)
        for i, proba in enumerate(probas):
            single = p_values(t, proba)
            assert p_pos[i] == single.p_pos
            assert p_neg[i] == single.p_neg

    def test_exhaustive_oracle_small_tables(self):
        grid = [0.0, 0.25, 0.5, 0.75, 1.0]
        for size in range(1, 5):
            for scores in itertools.combinations_with_replacement(grid, size):
                t = table(scores, scores)
                for proba in grid:
                    p = p_values(t, proba)
                    assert p.p_pos == brute_force_p(scores, 1.0 - proba)
                    assert p.p_neg == brute_force_p(scores, proba)

    @given(
        st.lists(st.floats(0, 1), min_size=1, max_size=30),
        st.lists(st.floats(0, 1), min_size=1, max_size=30),
        st.floats(0, 1),
    )
    def test_bounds_property(self, pos, neg, proba):
        t = table(pos, neg)
        p = p_values(t, proba)
        assert 1 / (len(pos) + 1) <= p.p_pos <= 1.0
        assert 1 / (len(neg) + 1) <= p.p_neg <= 1.0


class TestPredictionSet:
    def test_four_outcomes(self):
        eps = Epsilon(0.1)
        assert prediction_set(PValuePair(0.5, 0.05), eps) is PredictionSet.POSITIVE_ONLY
        assert prediction_set(PValuePair(0.05, 0.5), eps) is PredictionSet.NEGATIVE_ONLY
        assert prediction_set(PValuePair(0.5, 0.5), eps) is PredictionSet.BOTH
        assert prediction_set(PValuePair(0.05, 0.05), eps) is PredictionSet.EMPTY

    def test_exact_equality_excludes(self):
        # strict inclusion rule: p == eps keeps the class out
        assert prediction_set(PValuePair(0.1, 0.5), Epsilon(0.1)) is PredictionSet.NEGATIVE_ONLY

    def test_epsilon_validation(self):
        with pytest.raises(ValueError):
            Epsilon(0.0)
        with pytest.raises(ValueError):
            Epsilon(1.0)
        assert Epsilon(0.2).confidence == pytest.approx(0.8)

    @given(
        st.floats(0.01, 1.0),
        st.floats(0.01, 1.0),
        st.floats(0.01, 0.99),
        st.floats(0.01, 0.99),
    )
    def test_nesting_property(self, p_pos, p_neg, e1, e2):
        # larger significance -> subset of the smaller-significance set
        lo, hi = sorted((e1, e2))
        pair = PValuePair(p_pos, p_neg)
        big = prediction_set(pair, Epsilon(lo))
        small = prediction_set(pair, Epsilon(hi))
        assert not (small.includes_positive and not big.includes_positive)
        assert not (small.includes_negative and not big.includes_negative)

    def test_batch_matches_scalar(self):
        eps = Epsilon(0.25)
        p_pos = np.array([0.1, 0.3, 0.25, 0.9])
        p_neg = np.array([0.3, 0.1, 0.25, 0.9])
        sets = prediction_sets_batch(p_pos, p_neg, eps)
        for pp, pn, s in zip(p_pos, p_neg, sets):
            assert prediction_set(PValuePair(pp, pn), eps) is s
