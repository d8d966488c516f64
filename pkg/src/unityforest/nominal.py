"""Ordering of nominal categories so they can be split like ordered covariates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset


@dataclass(frozen=True)
class CategoryOrdering:
    """``rank[c - 1]`` is the ordered value (1..J) assigned to raw code ``c``."""

    covariate: int
    rank: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.rank) != list(range(1, len(self.rank) + 1)):
            raise ValueError(f"ordering for covariate {self.covariate} is not a permutation of 1..J")

    @property
    def n_categories(self) -> int:
        return len(self.rank)

    def encode(self, codes: np.ndarray) -> np.ndarray:
        lut = np.asarray((0,) + self.rank, dtype=np.float64)
        return lut[np.asarray(codes, dtype=np.int64)]

    def categories_in_order(self) -> list[int]:
        """Raw codes listed by ascending ordered value."""
        order = [0] * len(self.rank)
        for code, r in enumerate(self.rank, start=1):
            order[r - 1] = code
        return order

    @classmethod
    def identity(cls, covariate: int, J: int) -> "CategoryOrdering":
        return cls(covariate, tuple(range(1, J + 1)))


def _first_principal_coordinate(table: np.ndarray) -> np.ndarray:
    """Scores on the first principal axis of a (categories x classes) table."""
    centered = table - table.mean(axis=0)
    if not np.any(centered):
        return np.zeros(table.shape[0])
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axis = vt[0]
    # fix the arbitrary SVD sign so orderings are reproducible
    if axis[np.argmax(np.abs(axis))] < 0:
        axis = -axis
    return centered @ axis


def order_categories(
    column: np.ndarray, outcome: np.ndarray, n_categories: int, n_classes: int = 0, covariate: int = 0
) -> CategoryOrdering:
    """Order the categories of one nominal column by their outcome profile.

    ``n_classes`` is ``K`` for classification (outcome codes ``1..K``) and 0
    for regression. Binary outcomes sort by the within-category share of
    class 2, ``K > 2`` by the first principal coordinate of the
    category-by-class frequency table, regression by category mean. Ties keep
    raw code order; categories absent from ``column`` go last.
    """
    J = n_categories
    codes = np.asarray(column, dtype=np.int64)
    counts = np.bincount(codes, minlength=J + 1)[1:]
    present = counts > 0
    if J <= 1:
        return CategoryOrdering.identity(covariate, max(J, 1))

    if n_classes == 0:
        sums = np.bincount(codes, weights=np.asarray(outcome, dtype=np.float64), minlength=J + 1)[1:]
        key = np.divide(sums, counts, out=np.zeros(J), where=present)
    else:
        y = np.asarray(outcome, dtype=np.int64)
        table = np.zeros((J, n_classes))
        np.add.at(table, (codes - 1, y - 1), 1.0)
        props = np.divide(table, counts[:, None], out=np.zeros_like(table), where=present[:, None])
        if n_classes <= 2:
            key = props[:, 1] if n_classes == 2 else np.zeros(J)
        else:
            key = np.zeros(J)
            if present.sum() > 1:
                key[present] = _first_principal_coordinate(props[present])

    raw = np.arange(J)
    # lexsort: last key is primary
    order = np.lexsort((raw, key, ~present))
    rank = np.empty(J, dtype=np.int64)
    rank[order] = np.arange(1, J + 1)
    return CategoryOrdering(covariate, tuple(int(r) for r in rank))


def dataset_orderings(dataset: Dataset) -> dict[int, CategoryOrdering]:
    """Orderings for every nominal covariate, computed on the full dataset."""
    K = dataset.task.n_classes if dataset.task.is_classification else 0
    return {
        j: order_categories(dataset.X[:, j], dataset.y, cov.n_categories, K, covariate=j)
        for j, cov in enumerate(dataset.covariates)
        if cov.is_nominal
    }


def apply_orderings(X: np.ndarray, orderings: dict[int, CategoryOrdering]) -> np.ndarray:
    out = np.array(X, dtype=np.float64, copy=True)
    for j, ordering in orderings.items():
        out[:, j] = ordering.encode(out[:, j])
    return out
