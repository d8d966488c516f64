"""Impurities, random candidate roots, the partition criterion and CART expansion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K_
from .core import Dataset, Hyperparams, Task
from .tree import Tree, TreeRoot


@dataclass(frozen=True)
class ImpurityValue:
    value: float
    weight: int


@dataclass(frozen=True)
class PartitionScore:
    reduction: float


def kernel_inputs(X: np.ndarray, y: np.ndarray, task: Task):
    """(Xt, yc, yr, K) in the layout the compiled kernels expect."""
    Xt = np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)
    n = Xt.shape[1]
    if task.is_classification:
        return Xt, np.asarray(y, dtype=np.int64) - 1, np.zeros(n), task.n_classes
    return Xt, np.zeros(n, dtype=np.int64), np.asarray(y, dtype=np.float64), 0


def node_impurity(outcome: np.ndarray, task: Task) -> ImpurityValue:
    """Gini impurity ``1 - sum p_k^2`` or population variance of an outcome slice."""
    outcome = np.asarray(outcome)
    n = len(outcome)
    if n == 0:
        raise ValueError("impurity of an empty node is undefined")
    if task.is_classification:
        counts = np.bincount(outcome.astype(np.int64) - 1, minlength=task.n_classes)
        props = counts / n
        return ImpurityValue(float(1.0 - np.sum(props * props)), n)
    return ImpurityValue(float(np.var(outcome.astype(np.float64))), n)


def _root_from_kernel(feat, thr, left, depth, nstart, nend, idx, subset, max_depth) -> TreeRoot:
    members = tuple(np.sort(idx[s:e]) for s, e in zip(nstart, nend))
    return TreeRoot(
        np.asarray(feat, dtype=np.int64).copy(),
        np.asarray(thr, dtype=np.float64).copy(),
        np.asarray(left, dtype=np.int64).copy(),
        np.asarray(depth, dtype=np.int64).copy(),
        np.sort(np.asarray(subset, dtype=np.int64)),
        int(max_depth),
        members,
    )


def generate_candidate_root(
    dataset: Dataset,
    sample: np.ndarray,
    covariate_subset: np.ndarray,
    hp: Hyperparams,
    rng: np.random.Generator,
) -> TreeRoot:
    """One random tree root on ``sample`` using covariates from ``covariate_subset``.

    Each expandable node draws a covariate uniformly from the subset and a
    threshold uniformly from the midpoints between consecutive distinct
    values at the node. A node stays a root leaf at ``max_depth_root``, when
    pure, when smaller than ``2 * min_root_node``, or after 10 draws that all
    leave a child below ``min_root_node`` observations.
    """
    subset = np.asarray(covariate_subset, dtype=np.int64)
    if len(subset) == 0:
        raise ValueError("covariate subset must be nonempty")
    Xt, yc, yr, K = kernel_inputs(dataset.X, dataset.y, dataset.task)
    idx = np.array(sample, dtype=np.int64)
    m = len(idx)
    cap = 2 ** (hp.max_depth_root + 1) - 1
    feat = np.empty(cap, np.int64)
    thr = np.empty(cap)
    left = np.empty(cap, np.int64)
    depth = np.empty(cap, np.int64)
    nstart = np.empty(cap, np.int64)
    nend = np.empty(cap, np.int64)
    rank, uvals = K_.rank_tables(Xt, subset, idx)
    nn, _ = K_.grow_random_root(
        Xt, yc, yr, K, idx, subset, rank, uvals, hp.max_depth_root, hp.min_root_node, rng,
        feat, thr, left, depth, nstart, nend,
        np.zeros(m + 64, np.uint8), np.zeros(m // 64 + 2, np.int64), np.empty(m, np.int64), np.empty(max(K, 1)),
    )
    return _root_from_kernel(
        feat[:nn], thr[:nn], left[:nn], depth[:nn], nstart[:nn], nend[:nn], idx, subset, hp.max_depth_root
    )


def partition_criterion(root: TreeRoot, dataset: Dataset) -> PartitionScore:
    """Impurity of the tree sample minus the size-weighted impurity of the root leaves."""
    if root.members is None:
        raise ValueError("root carries no membership information")
    y = dataset.y
    sample = root.members[0]
    N = len(sample)
    total = node_impurity(y[sample], dataset.task).value
    weighted = sum(
        len(root.members[v]) / N * node_impurity(y[root.members[v]], dataset.task).value
        for v in root.leaves
        if len(root.members[v])
    )
    if root.n_nodes == 1:
        return PartitionScore(0.0)
    return PartitionScore(total - weighted)


def select_best_root(candidates: list[TreeRoot], dataset: Dataset) -> TreeRoot:
    """Candidate with the largest partition criterion; the earliest one wins ties."""
    if not candidates:
        raise ValueError("need at least one candidate root")
    scores = [partition_criterion(c, dataset).reduction for c in candidates]
    return candidates[int(np.argmax(scores))]


def exhaustive_candidate_roots(
    dataset: Dataset, sample: np.ndarray, covariate_subset: np.ndarray, hp: Hyperparams
) -> list[TreeRoot]:
    """Every feasible depth-1 root: one per (covariate, midpoint) pair whose
    children both hold at least ``min_root_node`` observations.

    Falls back to the single-leaf root when no split is feasible.
    """
    if hp.max_depth_root != 1:
        raise ValueError("exhaustive candidate enumeration supports max_depth_root=1 only")
    sample = np.sort(np.asarray(sample, dtype=np.int64))
    subset = np.sort(np.asarray(covariate_subset, dtype=np.int64))
    out = []
    pure = len(np.unique(dataset.y[sample])) <= 1
    for j in subset:
        if pure:
            break
        x = dataset.X[sample, j]
        vals = np.unique(x)
        for a, b in zip(vals[:-1], vals[1:]):
            c = K_._midpoint(a, b)
            go_left = x <= c
            nl = int(go_left.sum())
            if nl < hp.min_root_node or len(sample) - nl < hp.min_root_node:
                continue
            out.append(TreeRoot(
                np.array([j, -1, -1]), np.array([c, 0.0, 0.0]), np.array([1, -1, -1]), np.array([0, 1, 1]),
                subset, 1, (sample, sample[go_left], sample[~go_left]),
            ))
    if not out:
        out.append(TreeRoot(np.array([-1]), np.array([0.0]), np.array([-1]), np.array([0]), subset, 1, (sample,)))
    return out


def _contiguous_layout(root: TreeRoot) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Order the tree sample so every root node owns a contiguous index range."""
    idx = np.concatenate([root.members[v] for v in root.leaf_order()]).astype(np.int64)
    start = np.zeros(root.n_nodes, np.int64)
    end = np.zeros(root.n_nodes, np.int64)
    pos = 0
    for v in root.leaf_order():
        start[v] = pos
        pos += len(root.members[v])
        end[v] = pos
    for v in range(root.n_nodes - 1, -1, -1):  # children have larger ids than parents
        if root.feature[v] >= 0:
            a, b = root.children(v)
            start[v] = start[a]
            end[v] = end[b]
    return idx, start, end


def expand_tree(
    root: TreeRoot,
    dataset: Dataset,
    hp: Hyperparams,
    rng: np.random.Generator,
    expand: bool = True,
) -> Tree:
    """Grow CART subtrees below every root leaf.

    Each node draws ``mtry`` covariates from all ``p`` and takes the
    impurity-minimising midpoint split; nodes smaller than ``min_node_size``,
    pure nodes and nodes without an improving split become terminal.
    """
    if root.members is None:
        raise ValueError("root carries no membership information")
    Xt, yc, yr, K = kernel_inputs(dataset.X, dataset.y, dataset.task)
    idx, start, end = _contiguous_layout(root)
    return assemble_tree(
        Xt, yc, yr, K, idx, root.feature, root.threshold, root.left, root.depth, start, end,
        root.covariate_subset, hp, rng, expand,
    )


def assemble_tree(Xt, yc, yr, K, idx, r_feat, r_thr, r_left, r_depth, r_start, r_end,
                  subset, hp: Hyperparams, rng, expand: bool) -> Tree:
    n = Xt.shape[1]
    feat, thr, left, depth, nstart, nend = K_.grow_body(
        Xt, yc, yr, K, idx,
        np.asarray(r_feat, np.int64), np.asarray(r_thr, np.float64), np.asarray(r_left, np.int64),
        np.asarray(r_depth, np.int64), np.asarray(r_start, np.int64), np.asarray(r_end, np.int64),
        hp.mtry, hp.min_node_size, expand, rng,
    )
    value, size = K_.node_values(yc, yr, K, idx, nstart, nend)
    inbag = np.sort(idx)
    mask = np.ones(n, dtype=bool)
    mask[inbag] = False
    return Tree(
        feature=feat, threshold=thr, left=left, depth=depth, value=value, node_size=size,
        n_root=len(r_feat), inbag=inbag, oob=np.flatnonzero(mask),
        covariate_subset=np.sort(np.asarray(subset, dtype=np.int64)),
        max_depth_root=hp.max_depth_root,
    )
