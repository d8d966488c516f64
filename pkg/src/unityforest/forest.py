"""Forest training, prediction and model files."""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np

from . import _kernels as K_
from .core import Covariate, Dataset, Hyperparams, Task, ValidationError, schema_from_dict
from .nominal import CategoryOrdering, apply_orderings, dataset_orderings
from .splitter import assemble_tree, kernel_inputs
from .tree import Tree

logger = logging.getLogger(__name__)

MODEL_FORMAT = "unityforest-model"
SCHEMA_VERSION = 1
UFO = "ufo"
REFERENCE_RF = "rf"


class UnsupportedOperation(TypeError):
    pass


def tree_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for a stream identified by ``key``; independent of scheduling."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True, eq=False)
class Forest:
    trees: tuple[Tree, ...]
    hp: Hyperparams
    covariates: tuple[Covariate, ...]
    task: Task
    orderings: dict[int, CategoryOrdering] = field(default_factory=dict)
    n_train: int = 0
    method: str = UFO
    outcome: str = "y"  # outcome column name, for reading the training table back

    @property
    def num_trees(self) -> int:
        return len(self.trees)

    @property
    def p(self) -> int:
        return len(self.covariates)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.covariates]

    @cached_property
    def _packed(self):
        sizes = [t.n_nodes for t in self.trees]
        offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        inbag_off = np.concatenate([[0], np.cumsum([len(t.inbag) for t in self.trees])]).astype(np.int64)
        return (
            offsets,
            np.concatenate([t.feature for t in self.trees]),
            np.concatenate([t.threshold for t in self.trees]),
            np.concatenate([t.left for t in self.trees]),
            np.concatenate([t.value for t in self.trees]),
            inbag_off,
            np.concatenate([t.inbag for t in self.trees]),
        )

    def encode(self, X: np.ndarray) -> np.ndarray:
        """Map dataset-coded rows into the space the trees split on.

        Nominal codes must lie in ``1..J`` of the training categories.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.p:
            raise ValidationError(f"expected {self.p} covariates, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValidationError("prediction rows contain missing values")
        for j, cov in enumerate(self.covariates):
            if cov.is_nominal:
                col = X[:, j]
                bad = (col != np.round(col)) | (col < 1) | (col > cov.n_categories)
                if bad.any():
                    raise ValidationError(
                        f"unseen category {col[bad][0]!r} for nominal covariate {cov.name!r}"
                    )
        return apply_orderings(X, self.orderings)

    def encode_labels(self, rows: list[list]) -> np.ndarray:
        """Convert raw label rows (as read from CSV) into dataset coding."""
        from .core import _canonical_label

        X = np.empty((len(rows), self.p))
        for i, row in enumerate(rows):
            for j, cov in enumerate(self.covariates):
                v = row[j]
                if cov.is_nominal:
                    lab = _canonical_label(v)
                    if lab not in cov.categories:
                        raise ValidationError(f"unseen category {lab!r} for nominal covariate {cov.name!r}")
                    X[i, j] = cov.categories.index(lab) + 1
                else:
                    try:
                        X[i, j] = float(v)
                    except (TypeError, ValueError):
                        raise ValidationError(f"non-numeric value {v!r} in row {i + 1}, column {cov.name!r}") from None
        return X

    def _predict_raw(self, X: np.ndarray, rows=None, oob_only=False):
        off, feat, thr, left, value, ioff, inb = self._packed
        Xt = np.ascontiguousarray(X.T)
        rows = np.arange(X.shape[0], dtype=np.int64) if rows is None else np.asarray(rows, dtype=np.int64)
        K = self.task.n_classes if self.task.is_classification else 0
        return K_.forest_predict(off, feat, thr, left, value, K, Xt, rows, ioff, inb, oob_only)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.task.is_classification:
            raise UnsupportedOperation("class probabilities need a classification forest")
        return self._predict_raw(self.encode(X))[0]

    def predict_label(self, X: np.ndarray) -> np.ndarray:
        """Majority vote over per-tree leaf labels; ties go to the smallest class."""
        if not self.task.is_classification:
            raise UnsupportedOperation("label prediction needs a classification forest")
        Xe = self.encode(X)
        off, feat, thr, left, value, _, _ = self._packed
        votes = K_.forest_votes(
            off, feat, thr, left, value, self.task.n_classes,
            np.ascontiguousarray(Xe.T), np.arange(len(Xe), dtype=np.int64),
        )
        return np.argmax(votes, axis=1) + 1

    def predict_regression(self, X: np.ndarray) -> np.ndarray:
        if self.task.is_classification:
            raise UnsupportedOperation("numeric prediction needs a regression forest")
        return self._predict_raw(self.encode(X))[0][:, 0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_label(X) if self.task.is_classification else self.predict_regression(X)

    def oob_predict(self, dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
        """OOB class probabilities (or means) and the number of contributing trees."""
        out, cnt = self._predict_raw(self.encode(dataset.X), oob_only=True)
        return (out if self.task.is_classification else out[:, 0]), cnt

    def oob_error(self, dataset: Dataset) -> float:
        """Misclassification rate or MSE over rows with at least one OOB tree."""
        pred, cnt = self.oob_predict(dataset)
        ok = cnt > 0
        if not ok.any():
            return float("nan")
        if self.task.is_classification:
            return float(np.mean(np.argmax(pred[ok], axis=1) + 1 != dataset.y[ok]))
        return float(np.mean((pred[ok] - dataset.y[ok]) ** 2))

    def encoded_inputs(self, dataset: Dataset):
        return kernel_inputs(self.encode(dataset.X), dataset.y, dataset.task)

    def check_dataset(self, dataset: Dataset) -> None:
        if dataset.covariates != self.covariates or dataset.task != self.task:
            raise ValidationError("dataset schema does not match the forest")
        if dataset.n != self.n_train:
            raise ValidationError(f"forest was trained on {self.n_train} rows, dataset has {dataset.n}")


# ---------------------------------------------------------------------------
# training


def build_tree(inputs, hp: Hyperparams, t: int, method: str = UFO, expand: bool = True) -> Tree:
    """Build tree ``t``; the result depends only on (inputs, hp, t)."""
    Xt, yc, yr, K = inputs
    p, n = Xt.shape
    rng = tree_rng(hp.seed, t, 0)
    sample = np.sort(rng.choice(n, hp.n_tree_sample(n), replace=False)).astype(np.int64)
    subset = np.sort(rng.choice(p, hp.n_root_covariates(p), replace=False)).astype(np.int64)
    if method == UFO:
        feat, thr, left, depth, start, end, idx, _ = K_.best_random_root(
            Xt, yc, yr, K, sample, subset, hp.max_depth_root, hp.min_root_node, hp.n_cand_trees, rng
        )
    elif method == REFERENCE_RF:
        feat, thr, left, depth = (np.array([-1]), np.array([0.0]), np.array([-1]), np.array([0]))
        start, end, idx = np.array([0]), np.array([len(sample)]), sample.copy()
    else:
        raise ValueError(f"unknown method {method!r}")
    return assemble_tree(
        Xt, yc, yr, K, idx, feat, thr, left, depth, start, end, subset, hp, tree_rng(hp.seed, t, 1), expand
    )


def train(
    dataset: Dataset,
    hp: Hyperparams,
    workers: int = 1,
    expand: bool = True,
    method: str = UFO,
    on_tree: Callable[[int, float], None] | None = None,
) -> Forest:
    """Train ``hp.num_trees`` trees.

    Every tree subsamples ``floor(fract_n * n)`` rows without replacement and
    ``ceil(prop_var * p)`` covariates, keeps the best of ``n_cand_trees``
    random roots and grows CART below it (``method="rf"`` skips the root and
    grows CART from the top). ``expand=False`` stops at the root leaves,
    which is all the importance and CRTR computations need; the roots are
    identical either way because the body draws from its own stream.
    ``on_tree(t, seconds)`` is called after each tree is built.
    """
    hp.check_for(dataset.p)
    if hp.n_tree_sample(dataset.n) < 2:
        raise ValidationError(f"n={dataset.n} gives fewer than 2 in-bag observations per tree")
    orderings = dataset_orderings(dataset)
    inputs = kernel_inputs(apply_orderings(dataset.X, orderings), dataset.y, dataset.task)

    def job(t):
        start = time.perf_counter()
        tree = build_tree(inputs, hp, t, method, expand)
        if on_tree is not None:
            on_tree(t, time.perf_counter() - start)
        return tree

    if workers <= 1:
        trees = [job(t) for t in range(hp.num_trees)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(job, range(hp.num_trees)))
    return Forest(tuple(trees), hp, dataset.covariates, dataset.task, orderings, dataset.n, method)


def train_reference_rf(dataset: Dataset, hp: Hyperparams, workers: int = 1) -> Forest:
    """Conventional forest sharing every hyperparameter with the UFO setup."""
    return train(dataset, hp, workers=workers, method=REFERENCE_RF)


def predict_label(forest: Forest, X: np.ndarray) -> np.ndarray:
    return forest.predict_label(X)


def predict_proba(forest: Forest, X: np.ndarray) -> np.ndarray:
    return forest.predict_proba(X)


def predict_regression(forest: Forest, X: np.ndarray) -> np.ndarray:
    return forest.predict_regression(X)


# ---------------------------------------------------------------------------
# model files


def forest_to_dict(forest: Forest) -> dict:
    return {
        "format": MODEL_FORMAT,
        "schema_version": SCHEMA_VERSION,
        "method": forest.method,
        "outcome": forest.outcome,
        "n_train": forest.n_train,
        "hyperparams": forest.hp.to_dict(),
        "task": forest.task.kind,
        "classes": list(forest.task.classes),
        "covariates": [
            {"name": c.name, "kind": c.kind, "categories": None if c.categories is None else list(c.categories)}
            for c in forest.covariates
        ],
        "orderings": {str(j): list(o.rank) for j, o in sorted(forest.orderings.items())},
        "trees": [t.to_dict() for t in forest.trees],
    }


def forest_from_dict(d: dict) -> Forest:
    if d.get("format") != MODEL_FORMAT:
        raise ValidationError("not a unityforest model file")
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ValidationError(f"unsupported model schema version {d.get('schema_version')!r}")
    covs, task = schema_from_dict(d)
    hp = Hyperparams(**d["hyperparams"])
    orderings = {int(j): CategoryOrdering(int(j), tuple(r)) for j, r in d["orderings"].items()}
    n = int(d["n_train"])
    trees = tuple(Tree.from_dict(t, n, hp.max_depth_root) for t in d["trees"])
    return Forest(trees, hp, covs, task, orderings, n, d["method"], d.get("outcome", "y"))


def save_forest(forest: Forest, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(forest), fh, separators=(",", ":"))
        fh.write("\n")


def load_forest(path: str | Path) -> Forest:
    with open(path, encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
