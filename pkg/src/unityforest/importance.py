"""Unity variable importance and a permutation-importance baseline.

Split scores of root splits are measured in-bag to pick each covariate's
top-scoring splits; the importance itself is then evaluated on out-of-bag
observations only, by permuting the covariate among the OOB observations
reaching each selected node.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K_
from .core import Dataset
from .forest import Forest, tree_rng

MIN_TOP_SPLITS = 5
# first element of the RNG key, so importance streams never collide with tree streams
_UNITY_STREAM = 101
_PERM_STREAM = 102


@dataclass(frozen=True)
class SplitScores:
    """One record per internal root node across the forest (column arrays).

    ``score`` is node size times impurity reduction, measured on in-bag or
    OOB observations depending on how the table was collected; ``n_node`` is
    always the in-bag node size N_l.
    """

    tree: np.ndarray
    node: np.ndarray
    covariate: np.ndarray
    n_node: np.ndarray
    score: np.ndarray
    source: str = "inbag"

    def __len__(self) -> int:
        return len(self.tree)

    def for_covariate(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.covariate == j)


def weighted_impurity_from_stats(stats: np.ndarray, regression: bool) -> np.ndarray:
    """N * impurity from child statistics (class counts, or count/sum/sumsq)."""
    stats = np.asarray(stats, dtype=np.float64)
    if regression:
        n, s, ss = stats[..., 0], stats[..., 1], stats[..., 2]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = ss - np.where(n > 0, s * s / n, 0.0)
        return np.maximum(w, 0.0)
    n = stats.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, n - (stats * stats).sum(axis=-1) / np.where(n > 0, n, 1.0), 0.0)


def _node_counts(stats: np.ndarray, regression: bool) -> np.ndarray:
    return stats[..., 0] if regression else stats.sum(axis=-1)


def split_score(L: np.ndarray, R: np.ndarray, regression: bool) -> np.ndarray:
    """N_l times impurity reduction of a split from its child statistics.

    Zero whenever either child is empty or the parent holds fewer than two
    observations.
    """
    P = L + R
    w = weighted_impurity_from_stats(P, regression) - weighted_impurity_from_stats(L, regression) \
        - weighted_impurity_from_stats(R, regression)
    nl, nr = _node_counts(L, regression), _node_counts(R, regression)
    ok = (nl > 0) & (nr > 0) & (nl + nr >= 2)
    return np.where(ok, np.maximum(w, 0.0), 0.0)


def split_reduction(L: np.ndarray, R: np.ndarray, regression: bool) -> np.ndarray:
    """Impurity reduction (not multiplied by node size), 0 for degenerate splits."""
    n = _node_counts(L, regression) + _node_counts(R, regression)
    return np.where(n > 0, split_score(L, R, regression) / np.where(n > 0, n, 1.0), 0.0)


def _collect(forest: Forest, dataset: Dataset, use_oob: bool, workers: int) -> SplitScores:
    forest.check_dataset(dataset)
    Xt, yc, yr, K = forest.encoded_inputs(dataset)
    regression = K == 0

    def one(t):
        tree = forest.trees[t]
        nodes = tree.internal_root_nodes()
        if len(nodes) == 0:
            return None
        L, R = K_.root_split_stats(tree.feature, tree.threshold, tree.left, tree.n_root,
                                   Xt, yc, yr, K, tree.oob if use_oob else tree.inbag)
        score = split_score(L[nodes], R[nodes], regression)
        return (np.full(len(nodes), t), nodes, tree.feature[nodes], tree.node_size[nodes], score)

    ids = range(forest.num_trees)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, ids))
    else:
        parts = [one(t) for t in ids]
    parts = [p for p in parts if p is not None]
    if not parts:
        e = np.empty(0, np.int64)
        return SplitScores(e, e, e, e, np.empty(0), "oob" if use_oob else "inbag")
    cols = [np.concatenate(c) for c in zip(*parts)]
    return SplitScores(
        cols[0].astype(np.int64), cols[1].astype(np.int64), cols[2].astype(np.int64),
        cols[3].astype(np.int64), cols[4].astype(np.float64), "oob" if use_oob else "inbag",
    )


def collect_inbag_split_scores(forest: Forest, dataset: Dataset, workers: int = 1) -> SplitScores:
    """In-bag split score of every internal root node in the forest."""
    return _collect(forest, dataset, False, workers)


def n_top_splits(m: int, prop_best_splits: float) -> int:
    """Size of the top-split set for a covariate with ``m`` root splits."""
    if m <= 0:
        return 0
    k = math.ceil(prop_best_splits * m - 1e-9)
    if k < MIN_TOP_SPLITS:
        k = min(MIN_TOP_SPLITS, m)
    return min(k, m)


def select_top_splits(records: SplitScores, j: int, prop_best_splits: float) -> np.ndarray:
    """Record indices of covariate j's top-scoring root splits.

    Highest score first; equal scores are ordered by (tree, node).
    """
    rows = records.for_covariate(j)
    k = n_top_splits(len(rows), prop_best_splits)
    if k == 0:
        return rows
    order = np.lexsort((records.node[rows], records.tree[rows], -records.score[rows]))
    return rows[order[:k]]


@dataclass(frozen=True)
class VimResult:
    names: tuple[str, ...]
    vim: np.ndarray
    top_splits: tuple[tuple[tuple[int, int], ...], ...]  # per covariate: (tree, node) pairs

    @property
    def n_top(self) -> np.ndarray:
        return np.array([len(b) for b in self.top_splits], dtype=np.int64)

    def ranks(self) -> np.ndarray:
        """1 = most important; ties keep covariate order."""
        order = np.lexsort((np.arange(len(self.vim)), -self.vim))
        r = np.empty(len(order), dtype=np.int64)
        r[order] = np.arange(1, len(order) + 1)
        return r


def _oob_reduction_at(Xt, yc, yr, K, rows, j, thr, x=None) -> float:
    """OOB impurity reduction of the split ``x_j <= thr`` on ``rows``."""
    if len(rows) < 2:
        return 0.0
    xv = Xt[j, rows] if x is None else x
    go = xv <= thr
    if K > 0:
        y = yc[rows]
        L = np.bincount(y[go], minlength=K).astype(np.float64)
        R = np.bincount(y[~go], minlength=K).astype(np.float64)
        return float(split_reduction(L, R, False))
    y = yr[rows]
    yl, yr_ = y[go], y[~go]
    L = np.array([len(yl), yl.sum(), (yl * yl).sum()])
    R = np.array([len(yr_), yr_.sum(), (yr_ * yr_).sum()])
    return float(split_reduction(L, R, True))


def unity_vim(
    forest: Forest,
    dataset: Dataset,
    seed: int | None = None,
    records: SplitScores | None = None,
    workers: int = 1,
) -> VimResult:
    """Unity importance of every covariate.

    For covariate j, sums ``N_l * (OOB_SC_l - OOB_SC_PERM_l)`` over its
    top-scoring root splits ``l``, where ``OOB_SC_l`` is the impurity reduction
    of the split on the OOB observations reaching ``l`` and ``OOB_SC_PERM_l``
    the same after permuting covariate j among them. ``seed`` drives only the
    permutations (defaults to the forest seed).
    """
    if records is None:
        records = collect_inbag_split_scores(forest, dataset, workers)
    seed = forest.hp.seed if seed is None else seed
    Xt, yc, yr, K = forest.encoded_inputs(dataset)
    p = forest.p

    def one(j):
        sel = select_top_splits(records, j, forest.hp.prop_best_splits)
        total = 0.0
        pairs = []
        for r in sel:
            t, v = int(records.tree[r]), int(records.node[r])
            pairs.append((t, v))
            tree = forest.trees[t]
            rows = K_.rows_at_node(tree.feature, tree.threshold, tree.left, v, Xt, tree.oob)
            if len(rows) < 2:
                continue
            base = _oob_reduction_at(Xt, yc, yr, K, rows, j, tree.threshold[v])
            perm = tree_rng(seed, _UNITY_STREAM, j, t, v).permutation(len(rows))
            permuted = _oob_reduction_at(Xt, yc, yr, K, rows, j, tree.threshold[v], Xt[j, rows[perm]])
            total += float(records.n_node[r]) * (base - permuted)
        return total, tuple(pairs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, range(p)))
    else:
        out = [one(j) for j in range(p)]
    return VimResult(tuple(forest.names), np.array([o[0] for o in out]), tuple(o[1] for o in out))


def permutation_vim_baseline(forest: Forest, dataset: Dataset, seed: int | None = None,
                             workers: int = 1) -> np.ndarray:
    """Classic OOB permutation importance: per covariate, the mean over trees of
    the OOB error increase after permuting it (misclassification or MSE)."""
    forest.check_dataset(dataset)
    seed = forest.hp.seed if seed is None else seed
    Xt, yc, yr, K = forest.encoded_inputs(dataset)
    p = forest.p

    def one(t):
        tree = forest.trees[t]
        if len(tree.oob) == 0:
            return None
        _, inc = K_.tree_permutation_errors(
            tree.feature, tree.threshold, tree.left, tree.value, K, Xt, yc, yr,
            tree.oob, tree.used_covariates(p), tree_rng(seed, _PERM_STREAM, t),
        )
        return inc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            incs = list(pool.map(one, range(forest.num_trees)))
    else:
        incs = [one(t) for t in range(forest.num_trees)]
    incs = [i for i in incs if i is not None]
    if not incs:
        return np.zeros(p)
    return np.mean(incs, axis=0)


def vim_table(result: VimResult, baseline: np.ndarray | None = None) -> list[list]:
    """Rows sorted by unity importance, highest first, with a header row."""
    header = ["covariate", "unity_vim", "rank", "n_top_splits"]
    if baseline is not None:
        header.append("perm_vim")
    ranks = result.ranks()
    n_top = result.n_top
    rows = [header]
    for j in np.argsort(ranks, kind="stable"):
        row = [result.names[j], repr(float(result.vim[j])), int(ranks[j]), int(n_top[j])]
        if baseline is not None:
            row.append(repr(float(baseline[j])))
        rows.append(row)
    return rows


def vim_csv(result: VimResult, baseline: np.ndarray | None = None) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(vim_table(result, baseline))
    return buf.getvalue()


def write_vim_csv(path: str | Path, result: VimResult, baseline: np.ndarray | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(vim_csv(result, baseline))
