"""Cross-validation and simulation harnesses."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import Dataset, Hyperparams, ValidationError, default_hyperparams
from .dgp import NOISE, DgpSpec
from .forest import REFERENCE_RF, UFO, train
from .importance import permutation_vim_baseline, unity_vim
from .metrics import accuracy, auc, brier, separation_auc

logger = logging.getLogger(__name__)

CI_Z = 1.96
UNITY = "unity"
PERM = "perm"


def derive_seed(seed: int, *key: int) -> int:
    """A 63-bit seed for the stream identified by ``key``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class MetricReport:
    brier: float
    auc: float
    acc: float
    fold: int
    repetition: int


def stratified_folds(labels: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Fold id per row. Each class is shuffled and dealt round-robin, the deal
    continuing across classes, so fold sizes differ by at most one both
    within every class and overall."""
    y = np.asarray(labels)
    classes, counts = np.unique(y, return_counts=True)
    if k < 2:
        raise ValidationError("need at least 2 folds")
    if counts.min() < k:
        small = classes[np.argmin(counts)]
        raise ValidationError(f"class {small!r} has {counts.min()} members, fewer than {k} folds")
    rng = np.random.default_rng(seed)
    fold = np.empty(len(y), dtype=np.int64)
    offset = 0
    for c in classes:
        rows = rng.permutation(np.flatnonzero(y == c))
        fold[rows] = (offset + np.arange(len(rows))) % k
        offset += len(rows)
    return fold


@dataclass(frozen=True)
class LearnerConfig:
    method: str = UFO  # "ufo" or "rf"
    overrides: dict = field(default_factory=dict)

    def hyperparams(self, p: int, seed: int) -> Hyperparams:
        return default_hyperparams(p, **{**self.overrides, "seed": seed})


def _class_auc(P: np.ndarray, y: np.ndarray, K: int) -> float:
    """Binary AUC of P(class 2); for K > 2 the mean one-vs-rest AUC over
    classes present with both labels. NaN when undefined."""
    if K == 2:
        if len(np.unique(y)) < 2:
            return float("nan")
        return auc(P[:, 1], y == 2)
    vals = [auc(P[:, k], y == k + 1) for k in range(K) if 0 < np.sum(y == k + 1) < len(y)]
    return float(np.mean(vals)) if vals else float("nan")


def cross_validate(
    dataset: Dataset,
    learner: LearnerConfig,
    folds: int = 5,
    repeats: int = 5,
    seed: int = 0,
    workers: int = 1,
) -> list[MetricReport]:
    """Repeated stratified k-fold CV; one report per (repetition, fold)."""
    if not dataset.task.is_classification:
        raise ValidationError("cross-validation metrics need a classification task")
    K = dataset.task.n_classes
    out = []
    for r in range(repeats):
        fold = stratified_folds(dataset.y, folds, derive_seed(seed, 0, r))
        for f in range(folds):
            test = np.flatnonzero(fold == f)
            tr = np.flatnonzero(fold != f)
            hp = learner.hyperparams(dataset.p, derive_seed(seed, 1, r, f))
            forest = train(dataset.subset(tr), hp, workers=workers, method=learner.method)
            Xte, yte = dataset.X[test], dataset.y[test]
            P = forest.predict_proba(Xte)
            pred = forest.predict_label(Xte)
            out.append(MetricReport(brier(P, yte), _class_auc(P, yte, K), accuracy(pred, yte), f, r))
    return out


def summarize_cv(reports: Sequence[MetricReport]) -> dict[str, float]:
    """Mean of each metric over folds and repetitions (NaN folds skipped)."""
    return {m: float(np.nanmean([getattr(r, m) for r in reports])) for m in ("brier", "auc", "acc")}


# ---------------------------------------------------------------------------
# VIM simulation


@dataclass(frozen=True)
class SimRow:
    replicate: int
    n: int
    method: str
    covariate_type: str
    auc: float
    rank: float  # mean rank (1 = largest VIM) of the type's covariates


@dataclass(frozen=True)
class TypeSummary:
    n: int
    method: str
    covariate_type: str
    mean_auc: float
    ci_low: float
    ci_high: float
    median_rank: float
    rank_q1: float
    rank_q3: float
    replicates: int


def type_aucs(vim: np.ndarray, names: Sequence[str], types: dict[str, str]) -> dict[str, tuple[float, float]]:
    """Per informative type: (AUC against the noise covariates, mean rank)."""
    vim = np.asarray(vim, dtype=np.float64)
    order = np.lexsort((np.arange(len(vim)), -vim))
    rank = np.empty(len(vim))
    rank[order] = np.arange(1, len(vim) + 1)
    idx = {nm: i for i, nm in enumerate(names)}
    noise = np.array([vim[idx[nm]] for nm, t in types.items() if t == NOISE])
    out = {}
    for t in sorted(set(types.values()) - {NOISE}):
        cols = [idx[nm] for nm, tt in types.items() if tt == t]
        out[t] = (separation_auc(vim[cols], noise), float(np.mean(rank[cols])))
    return out


def replicate_vims(
    dataset: Dataset, methods: Iterable[str], hp: Hyperparams, workers: int = 1
) -> dict[str, np.ndarray]:
    """VIM vectors of one simulated dataset for each requested method.

    ``unity`` trains a UFO that stops at the tree roots (all the unity
    importance reads); ``perm`` trains the reference forest and computes OOB
    permutation importance.
    """
    out = {}
    for m in methods:
        if m == UNITY:
            forest = train(dataset, hp, workers=workers, expand=False)
            out[m] = unity_vim(forest, dataset, workers=workers).vim
        elif m == PERM:
            forest = train(dataset, hp, workers=workers, method=REFERENCE_RF)
            out[m] = permutation_vim_baseline(forest, dataset, workers=workers)
        else:
            raise ValueError(f"unknown VIM method {m!r}")
    return out


def vim_auc_evaluation(
    family: str,
    sample_sizes: Sequence[int],
    replicates: int,
    methods: Sequence[str] = (UNITY,),
    seed: int = 0,
    overrides: dict | None = None,
    workers: int = 1,
    progress: Callable[[int, int, int], None] | None = None,
) -> list[SimRow]:
    """Tidy AUC/rank rows for every (sample size, replicate, method, informative type).

    Replicate ``r`` at size ``n`` uses data seed ``derive_seed(seed, n, r)``,
    so rows do not depend on which other sizes or replicates were requested.
    """
    if replicates < 1:
        raise ValueError("need at least one replicate")
    rows = []
    for n in sample_sizes:
        spec = DgpSpec(family, int(n))
        types = spec.covariate_types()
        for r in range(replicates):
            s = derive_seed(seed, n, r)
            ds = spec.generate(s)
            hp = default_hyperparams(ds.p, **{**(overrides or {}), "seed": s})
            vims = replicate_vims(ds, methods, hp, workers)
            for m in methods:
                for t, (a, rk) in type_aucs(vims[m], ds.names, types).items():
                    rows.append(SimRow(r, int(n), m, t, a, rk))
            if progress is not None:
                progress(int(n), r, replicates)
    return rows


def summarize_simulation(rows: Sequence[SimRow]) -> list[TypeSummary]:
    """Mean AUC with a normal-approximation 95% interval, and rank quartiles."""
    groups: dict[tuple, list[SimRow]] = {}
    for row in rows:
        groups.setdefault((row.n, row.method, row.covariate_type), []).append(row)
    out = []
    for (n, m, t), g in sorted(groups.items()):
        a = np.array([x.auc for x in g])
        rk = np.array([x.rank for x in g])
        se = a.std(ddof=1) / np.sqrt(len(a)) if len(a) > 1 else float("nan")
        q1, med, q3 = np.percentile(rk, [25, 50, 75])
        out.append(TypeSummary(n, m, t, float(a.mean()), float(a.mean() - CI_Z * se),
                               float(a.mean() + CI_Z * se), float(med), float(q1), float(q3), len(a)))
    return out


def write_rows_csv(path: str | Path, rows: Sequence) -> None:
    """Write dataclass rows as CSV, header from field names."""
    rows = list(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if not rows:
            return
        names = list(rows[0].__dataclass_fields__)
        w.writerow(names)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in (getattr(r, k) for k in names)])


# ---------------------------------------------------------------------------
# benchmark summaries

HIGHER_IS_BETTER = {"brier": False, "auc": True, "acc": True}


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    better: int
    equal: int
    worse: int
    n_effective: int
    p_value: float


def compare_methods(per_dataset: Sequence[dict[str, dict[str, float]]], a: str = UFO,
                    b: str = REFERENCE_RF) -> list[ComparisonRow]:
    """Count datasets where method ``a`` beats, ties or loses to ``b`` on each
    metric, with the sign-test p-value over the non-tied datasets."""
    from .metrics import binomial_sign_test

    out = []
    for metric, higher in HIGHER_IS_BETTER.items():
        better = equal = worse = 0
        for d in per_dataset:
            x, y = d[a][metric], d[b][metric]
            if x == y or (np.isnan(x) and np.isnan(y)):
                equal += 1
            elif (x > y) == higher:
                better += 1
            else:
                worse += 1
        out.append(ComparisonRow(metric, better, equal, worse, better + worse, binomial_sign_test(better, worse)))
    return out
