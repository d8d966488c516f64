import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import binomial_two_sided, pairwise_auc
from unityforest.metrics import accuracy, auc, binomial_sign_test, brier, separation_auc


def test_brier_examples():
    assert brier(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1, 2])) == 0.0
    assert brier(np.full((4, 2), 0.5), np.array([1, 2, 2, 1])) == 0.5
    assert brier(np.array([[0.8, 0.2]]), np.array([1])) == pytest.approx(0.08)
    with pytest.raises(ValueError):
        brier(np.full((2, 2), 0.5), np.array([1]))


@given(st.lists(st.tuples(st.floats(0, 1), st.integers(1, 2)), min_size=1, max_size=30))
def test_brier_range_and_minimum(rows):
    p = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    P = np.column_stack([p, 1 - p])
    b = brier(P, y)
    assert 0 <= b <= 2
    assert (b == 0) == bool(np.all(P[np.arange(len(y)), y - 1] == 1))


def test_auc_examples():
    assert auc(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1])) == 1.0
    assert auc(np.ones(6), np.array([0, 1, 0, 1, 1, 0])) == 0.5
    assert auc(np.array([0.9, 0.4, 0.6]), np.array([1, 0, 1])) == 1.0
    with pytest.raises(ValueError):
        auc(np.array([0.1, 0.2]), np.array([1, 1]))


@given(st.lists(st.tuples(st.integers(0, 10), st.booleans()), min_size=2, max_size=40))
def test_auc_matches_pairwise(rows):
    s = [r[0] for r in rows]
    y = [r[1] for r in rows]
    if all(y) or not any(y):
        return
    assert auc(np.array(s, float), np.array(y)) == pytest.approx(pairwise_auc(s, y))


@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=30, unique=True), st.randoms())
def test_auc_complement(scores, rnd):
    y = np.array([rnd.random() < 0.5 for _ in scores])
    if y.all() or not y.any():
        return
    s = np.array(scores)
    assert auc(s, y) + auc(-s, y) == pytest.approx(1.0)


def test_separation_auc():
    assert separation_auc(np.array([5.0, 6.0]), np.array([1.0, 2.0, 3.0])) == 1.0
    assert separation_auc(np.ones(2), np.ones(3)) == 0.5


def test_accuracy():
    assert accuracy(np.array([1, 2]), np.array([1, 2])) == 1.0
    assert accuracy(np.array([1, 2]), np.array([2, 1])) == 0.0
    assert accuracy(np.array([1, 2, 2, 1]), np.array([1, 2, 2, 2])) == 0.75
    with pytest.raises(ValueError):
        accuracy(np.array([1]), np.array([1, 2]))


def test_sign_test_examples():
    assert binomial_sign_test(10, 10) == 1.0
    assert binomial_sign_test(78, 90) == pytest.approx(0.396, abs=1e-3)
    assert binomial_sign_test(114, 45) < 0.001
    assert binomial_sign_test(0, 0) == 1.0


@given(st.integers(0, 60), st.integers(0, 60))
def test_sign_test_symmetry_and_oracle(w, l):
    if w + l == 0:
        return
    p = binomial_sign_test(w, l)
    assert p == binomial_sign_test(l, w)
    assert p == pytest.approx(binomial_two_sided(w, w + l), rel=1e-9)
