import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ivpgan.metrics import MetricError, aggregate, concordance_index, pearson_r, pearson_r2, rmse


def ci_loop(pred, y):
    num = 0.0
    den = 0
    for i in range(len(y)):
        for j in range(len(y)):
            if y[i] > y[j]:
                den += 1
                if pred[i] > pred[j]:
                    num += 1
                elif pred[i] == pred[j]:
                    num += 0.5
    return num / den


def test_rmse_examples():
    assert rmse([1, 2, 3], [1, 2, 3]) == 0.0
    assert rmse([1, 1], [0, 0]) == 1.0


def test_rmse_oracle(rng):
    p, y = rng.normal(size=1000), rng.normal(size=1000)
    loop = math.sqrt(sum((a - b) ** 2 for a, b in zip(p, y)) / 1000)
    assert abs(rmse(p, y) - loop) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50))
def test_rmse_symmetric_nonnegative(v):
    a = np.array(v)
    b = a[::-1].copy()
    assert rmse(a, b) == rmse(b, a) >= 0
    assert rmse(a, a) == 0


def test_rmse_errors():
    with pytest.raises(MetricError):
        rmse([], [])
    with pytest.raises(MetricError):
        rmse([1, 2], [1])


def test_ci_anchors():
    y = [1, 2, 3]
    assert concordance_index([1, 2, 3], y) == 1.0
    assert concordance_index([3, 2, 1], y) == 0.0
    assert concordance_index([2, 2, 2], y) == 0.5


def test_ci_all_tied_labels():
    with pytest.raises(MetricError):
        concordance_index([1, 2, 3], [5, 5, 5])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 200), st.integers(0, 2**32 - 1), st.booleans())
def test_ci_matches_loop(n, seed, tied):
    r = np.random.default_rng(seed)
    if tied:
        y = r.integers(0, 5, n).astype(float)
        p = r.integers(0, 5, n).astype(float)
    else:
        y, p = r.normal(size=n), r.normal(size=n)
    if len(set(y)) < 2:
        return
    assert concordance_index(p, y, block=7) == ci_loop(p, y)


def test_ci_monotone_transform_invariance(rng):
    y, p = rng.normal(size=300), rng.normal(size=300)
    base = concordance_index(p, y)
    assert concordance_index(np.exp(p), y) == base
    assert concordance_index(3.0 * p + 7.0, y) == base


def test_pearson_examples():
    y = np.array([1.0, 2.0, 4.0, 7.0])
    assert pearson_r2(2 * y + 3, y) == pytest.approx(1.0, abs=1e-15)
    assert pearson_r2(-y, y) == pytest.approx(1.0, abs=1e-15)
    assert pearson_r(-y, y) == pytest.approx(-1.0, abs=1e-15)


def test_pearson_independent_vectors():
    r = np.random.default_rng(0)
    assert pearson_r2(r.normal(size=10_000), r.normal(size=10_000)) < 0.01


def test_pearson_affine_invariance(rng):
    y, p = rng.normal(size=100), rng.normal(size=100)
    base = pearson_r2(p, y)
    assert pearson_r2(-2.5 * p + 1, y) == pytest.approx(base, rel=1e-12)
    assert pearson_r2(p, 4 * y - 3) == pytest.approx(base, rel=1e-12)


def test_pearson_constant():
    with pytest.raises(MetricError):
        pearson_r2([1, 1, 1], [1, 2, 3])


def test_aggregate_examples():
    rep = aggregate([0.5])
    assert rep.mean == 0.5 and rep.std == 0.0
    rep = aggregate([0.2, 0.4])
    assert rep.mean == pytest.approx(0.3, abs=1e-15)
    assert rep.std == pytest.approx(math.sqrt(0.02), abs=1e-15)


def test_aggregate_order_irrelevant(rng):
    values = rng.normal(size=10)
    cells = {(s, f): v for (s, f), v in zip([(s, f) for s in range(2) for f in range(5)], values)}
    shuffled = dict(reversed(list(cells.items())))
    a, b = aggregate(cells, "rmse", "warm"), aggregate(shuffled, "rmse", "warm")
    assert a.mean == b.mean and a.std == b.std
    assert a.to_dict() == b.to_dict()
    assert a.to_dict()["n_cells"] == 10
    assert set(a.per_seed()) == {0, 1} and set(a.per_fold()) == set(range(5))


def test_aggregate_empty():
    with pytest.raises(MetricError):
        aggregate([])
