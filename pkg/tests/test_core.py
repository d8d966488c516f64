import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from unityforest import Dataset, Schema, ValidationError, default_hyperparams, make_dataset, validate_dataset
from unityforest.core import Hyperparams, read_csv, schema_of, write_csv


def test_valid_table_passes_through():
    ds = validate_dataset(["a", "b", "y"], [["1", "2", "x"], ["3", "4", "z"], ["5", "6", "x"]], Schema())
    assert (ds.n, ds.p) == (3, 2)
    assert ds.task.classes == ("x", "z")
    np.testing.assert_array_equal(ds.y, [1, 2, 1])


def test_missing_cell_names_row_and_column():
    with pytest.raises(ValidationError, match=r"row 2, column 'b'"):
        validate_dataset(["a", "b", "y"], [["1", "2", "1"], ["3", "", "2"]], Schema())


def test_non_numeric_continuous_rejected():
    with pytest.raises(ValidationError, match="non-numeric"):
        validate_dataset(["a", "y"], [["1", "1"], ["red", "2"]], Schema())


def test_label_outside_declared_classes():
    with pytest.raises(ValidationError, match="not a declared class"):
        validate_dataset(["a", "y"], [["1", "1"], ["2", "3"]], Schema(classes=(1, 2)))


def test_nominal_recoded_by_rank():
    rows = [["9", "1"], ["2", "2"], ["5", "1"], ["2", "2"]]
    ds = validate_dataset(["c", "y"], rows, Schema(nominal=("c",)))
    # oracle: rank of each raw value among the sorted unique values
    raw = [9, 2, 5, 2]
    uniq = sorted(set(raw))
    expected = [uniq.index(v) + 1 for v in raw]
    np.testing.assert_array_equal(ds.X[:, 0], expected)
    assert ds.covariates[0].n_categories == 3


def test_undeclared_category_rejected():
    with pytest.raises(ValidationError, match="undeclared category"):
        validate_dataset(["c", "y"], [["a", "1"], ["b", "2"]], Schema(nominal=("c",), categories={"c": ("a",)}))


def test_default_hyperparams_p68():
    hp = default_hyperparams(68)
    assert hp.prop_var == pytest.approx(math.sqrt(68) / 68)
    assert hp.prop_var == pytest.approx(0.1213, abs=1e-4)
    assert hp.mtry == 8
    assert hp.n_root_covariates(68) == 9


def test_default_hyperparams_large_p_and_minimum():
    assert default_hyperparams(101).prop_var == 0.1
    hp = default_hyperparams(1)
    assert hp.mtry == 1 and hp.prop_var == 1.0


def test_default_values():
    hp = default_hyperparams(10)
    assert (hp.fract_n, hp.n_cand_trees, hp.max_depth_root, hp.prop_best_splits, hp.num_trees, hp.min_node_size) \
        == (0.7, 500, 3, 0.01, 500, 5)
    assert hp.min_root_node == 5
    assert Hyperparams(min_node_size=1).min_root_node == 2


@pytest.mark.parametrize("field,value", [("fract_n", 0.0), ("prop_var", 1.5), ("n_cand_trees", 0),
                                         ("max_depth_root", 0), ("mtry", 0), ("num_trees", 0)])
def test_invalid_hyperparams(field, value):
    with pytest.raises(ValidationError):
        Hyperparams(**{field: value})


def test_mtry_larger_than_p():
    with pytest.raises(ValidationError, match="mtry"):
        default_hyperparams(3, mtry=4).check_for(3)


@given(st.integers(1, 500))
def test_default_hyperparams_pure(p):
    a, b = default_hyperparams(p), default_hyperparams(p, "regression")
    assert a == b
    assert a.mtry == math.isqrt(p)
    assert 1 <= a.n_root_covariates(p) <= p


@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_dataset_roundtrip_dict(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    X[:, 0] = rng.integers(1, 4, n)
    ds = make_dataset(X, rng.integers(1, 3, n), nominal={0: 3}, n_classes=2)
    back = Dataset.from_dict(json.loads(json.dumps(ds.to_dict())))
    assert back.equals(ds)


def test_dataset_roundtrip_csv(tmp_path):
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.standard_normal(30), rng.integers(1, 4, 30)])
    ds = make_dataset(X, rng.standard_normal(30), task="regression", nominal={1: 3})
    write_csv(ds, tmp_path / "d.csv")
    back = read_csv(tmp_path / "d.csv", schema_of(ds))
    assert back.equals(ds)


def test_dataset_rejects_nonfinite():
    with pytest.raises(ValidationError, match="non-finite"):
        make_dataset(np.array([[1.0], [np.nan]]), [1, 2])


def test_dataset_is_immutable():
    ds = make_dataset(np.zeros((3, 1)), [1, 2, 1])
    with pytest.raises(ValueError):
        ds.X[0, 0] = 1.0
