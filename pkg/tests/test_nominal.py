import numpy as np
from hypothesis import given, strategies as st

from oracles import best_bipartition_gini, best_ordered_gini
from unityforest.nominal import CategoryOrdering, apply_orderings, dataset_orderings, order_categories
from unityforest import make_dataset


def test_single_category_identity():
    o = order_categories(np.ones(5), np.array([1, 2, 1, 2, 1]), 1, 2)
    assert o.rank == (1,)


def test_binary_sorted_by_class2_share():
    # A: 0.8, B: 0.2, C: 0.5 class-2 share
    codes = np.array([1] * 5 + [2] * 5 + [3] * 4)
    y = np.array([2, 2, 2, 2, 1] + [2, 1, 1, 1, 1] + [2, 2, 1, 1])
    o = order_categories(codes, y, 3, 2)
    assert o.categories_in_order() == [2, 3, 1]  # B, C, A


def test_regression_tie_keeps_raw_order():
    o = order_categories(np.array([1, 1, 2, 2]), np.array([3.0, 3.0, 3.0, 3.0]), 2, 0)
    assert o.categories_in_order() == [1, 2]


def test_empty_categories_last():
    codes = np.array([3, 3, 1, 1])
    y = np.array([2, 2, 1, 1])
    o = order_categories(codes, y, 4, 2)
    assert o.categories_in_order() == [1, 3, 2, 4]


def test_multiclass_orders_by_profile():
    # three categories whose class profiles lie on a line: 1 -> 2 -> 3
    codes = np.repeat([1, 2, 3], 10)
    y = np.concatenate([np.repeat([1, 1, 1, 1, 1, 1, 1, 1, 2, 3], 1),
                        np.array([1, 1, 2, 2, 2, 2, 2, 2, 3, 3]),
                        np.array([1, 2, 3, 3, 3, 3, 3, 3, 3, 3])])
    order = order_categories(codes, y, 3, 3).categories_in_order()
    assert order in ([1, 2, 3], [3, 2, 1])


columns = st.integers(1, 8).flatmap(lambda J: st.tuples(
    st.just(J),
    st.lists(st.tuples(st.integers(1, J), st.integers(1, 3)), min_size=1, max_size=40),
))


@given(columns, st.sampled_from([0, 2, 3]))
def test_output_is_permutation(data, K):
    J, pairs = data
    codes = np.array([c for c, _ in pairs])
    raw = np.array([v for _, v in pairs])
    y = {0: raw.astype(float), 2: np.minimum(raw, 2), 3: raw}[K]
    o = order_categories(codes, y, J, K)
    assert sorted(o.rank) == list(range(1, J + 1))


@given(columns, st.permutations(range(1, 9)))
def test_label_invariance(data, perm):
    """Relabelling raw codes yields the same order of category contents when
    no two present categories tie."""
    J, pairs = data
    codes = np.array([c for c, _ in pairs])
    y = np.array([1 if v == 1 else 2 for _, v in pairs])
    share = {c: np.mean(y[codes == c] == 2) for c in set(codes.tolist())}
    if len(set(share.values())) < len(share):
        return
    relabel = [p for p in perm if p <= J]  # a permutation of 1..J
    new_codes = np.array([relabel[c - 1] for c in codes])
    a = order_categories(codes, y, J, 2).categories_in_order()
    b = order_categories(new_codes, y, J, 2).categories_in_order()
    present_a = [c for c in a if c in share]
    present_b = [c for c in b if c in {relabel[k - 1] for k in share}]
    assert [relabel[c - 1] for c in present_a] == present_b


@given(st.integers(2, 8), st.lists(st.tuples(st.integers(1, 8), st.integers(1, 2)), min_size=2, max_size=30))
def test_ordered_split_matches_best_bipartition(J, pairs):
    codes = np.array([min(c, J) for c, _ in pairs])
    y = np.array([v for _, v in pairs])
    o = order_categories(codes, y, J, 2)
    encoded = o.encode(codes)
    assert best_ordered_gini(encoded.tolist(), y.tolist()) >= best_bipartition_gini(codes.tolist(), y.tolist())


def test_dataset_orderings_and_apply():
    X = np.column_stack([np.array([1, 2, 3, 1, 2, 3], float), np.arange(6.0)])
    ds = make_dataset(X, [2, 1, 1, 2, 1, 1], nominal={0: 3})
    orders = dataset_orderings(ds)
    assert set(orders) == {0}
    Xe = apply_orderings(ds.X, orders)
    assert Xe[0, 0] == 3 and Xe[1, 0] in (1, 2)
    np.testing.assert_array_equal(Xe[:, 1], ds.X[:, 1])


def test_identity_helper():
    assert CategoryOrdering.identity(0, 3).rank == (1, 2, 3)
