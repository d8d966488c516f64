import numpy as np
import pytest

from unityforest.dgp import DgpSpec, covariate_types, generate_dgp1, generate_dgp2
from unityforest.metrics import auc


@pytest.fixture(scope="module")
def big1():
    return generate_dgp1(10000, 1)


@pytest.fixture(scope="module")
def big2():
    return generate_dgp2(10000, 2)


def _col(ds, name):
    return ds.X[:, ds.column_index(name)]


def test_dgp1_shape_and_balance():
    ds = generate_dgp1(400, 0)
    assert ds.p == 68 and ds.n == 400
    counts = np.bincount(ds.y, minlength=3)[1:]
    assert np.all(np.abs(counts - 200) <= 3 * np.sqrt(400 / 4))
    assert all(not c.is_nominal for c in ds.covariates)
    types = covariate_types("dgp1")
    assert set(types) == set(ds.names)
    assert sum(t == "noise" for t in types.values()) == 50


def test_dgp1_marginal_strong(big1):
    x = _col(big1, "mrg_s_1")
    diff = x[big1.y == 2].mean() - x[big1.y == 1].mean()
    assert diff == pytest.approx(1.5, abs=0.2)


def test_dgp1_tiers_are_monotone(big1):
    d = {t: _col(big1, f"mrg_{t}_1")[big1.y == 2].mean() - _col(big1, f"mrg_{t}_1")[big1.y == 1].mean()
         for t in "smw"}
    assert d["s"] > d["m"] > d["w"] > 0


@pytest.mark.parametrize("t,delta", [("s", 1.5), ("m", 1.0), ("w", 0.5)])
def test_dgp1_qualitative_pair(big1, t, delta):
    x, b = _col(big1, f"ql_{t}_1"), _col(big1, f"ql_{t}_2")
    y = big1.y
    for v in (x, b):
        assert abs(v[y == 2].mean() - v[y == 1].mean()) < 0.1
    pos, neg = b > 0, b <= 0
    assert x[pos & (y == 2)].mean() - x[pos & (y == 1)].mean() == pytest.approx(delta, abs=0.2)
    assert x[neg & (y == 2)].mean() - x[neg & (y == 1)].mean() == pytest.approx(-delta, abs=0.2)


def test_dgp1_quantitative_pair(big1):
    x, b = _col(big1, "qn_s_1"), _col(big1, "qn_s_2")
    y = big1.y
    small, large = b < 0, b >= 0
    d_small = x[small & (y == 2)].mean() - x[small & (y == 1)].mean()
    d_large = x[large & (y == 2)].mean() - x[large & (y == 1)].mean()
    assert d_small > d_large > 0  # effect keeps its sign, strength depends on the partner


def test_dgp2_schema():
    ds = generate_dgp2(200, 0)
    assert ds.p == 69
    nominal = {c.name: c.n_categories for c in ds.covariates if c.is_nominal}
    assert nominal == {"bne_ql": 2, "be_ql": 2, "bne_qn": 2, "cne_ql": 3}
    assert set(covariate_types("dgp2")) == set(ds.names)


def test_dgp2_binary_without_marginal(big2):
    b = _col(big2, "bne_ql")
    for level in (1, 2):
        share = np.mean(big2.y[b == level] == 2)
        assert share == pytest.approx(0.5, abs=0.05)


def test_dgp2_binary_with_marginal(big2):
    b = _col(big2, "be_ql")
    assert np.mean(big2.y[b == 2] == 2) > 0.6


def test_dgp2_quantitative_only_where_partner_is_one(big2):
    x, b, y = _col(big2, "qn_bne_s"), _col(big2, "bne_qn"), big2.y
    on, off = b == 2, b == 1  # code 2 is raw level 1
    assert auc(x[on], y[on] == 2) > 0.6
    assert auc(x[off], y[off] == 2) < 0.55


def test_dgp2_three_level_flip(big2):
    x, c, y = _col(big2, "ql_cne_s"), _col(big2, "cne_ql"), big2.y
    diffs = [x[(c == k) & (y == 2)].mean() - x[(c == k) & (y == 1)].mean() for k in (1, 2, 3)]
    assert diffs[0] > 1.0 and diffs[1] < -1.0 and abs(diffs[2]) < 0.15
    assert abs(x[y == 2].mean() - x[y == 1].mean()) < 0.6


def test_generators_deterministic():
    a, b = generate_dgp2(100, 5), generate_dgp2(100, 5)
    assert a.equals(b)
    assert not generate_dgp1(100, 5).equals(generate_dgp1(100, 6))


def test_spec_validation():
    with pytest.raises(ValueError):
        DgpSpec("dgp3", 100)
    with pytest.raises(ValueError):
        DgpSpec("dgp1", 3)
    assert DgpSpec("dgp1", 10).generate(0).p == 68
