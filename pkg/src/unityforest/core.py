"""Shared data types: datasets, tasks, hyperparameters and tabular ingestion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
NOMINAL = "nominal"
CLASSIFICATION = "classification"
REGRESSION = "regression"


class ValidationError(ValueError):
    """Raised when input data or configuration violates a contract."""


@dataclass(frozen=True)
class Covariate:
    name: str
    kind: str = CONTINUOUS
    # raw category labels in code order; code c (1-based) is categories[c - 1]
    categories: tuple | None = None

    @property
    def n_categories(self) -> int | None:
        return None if self.categories is None else len(self.categories)

    @property
    def is_nominal(self) -> bool:
        return self.kind == NOMINAL


@dataclass(frozen=True)
class Task:
    kind: str
    classes: tuple = ()

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    @property
    def is_classification(self) -> bool:
        return self.kind == CLASSIFICATION

    @classmethod
    def classification(cls, classes: Iterable) -> "Task":
        return cls(CLASSIFICATION, tuple(classes))

    @classmethod
    def regression(cls) -> "Task":
        return cls(REGRESSION, ())


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated covariate matrix plus outcome.

    ``X`` holds continuous values as-is and nominal covariates as category
    codes ``1..J``. ``y`` holds class codes ``1..K`` for classification and
    real values for regression.
    """

    X: np.ndarray
    y: np.ndarray
    covariates: tuple[Covariate, ...]
    task: Task

    def __post_init__(self):
        X = np.ascontiguousarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValidationError(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValidationError(f"need n >= 1 and p >= 1, got n={n}, p={p}")
        if len(self.covariates) != p:
            raise ValidationError(f"{len(self.covariates)} covariates declared for {p} columns")
        if not np.all(np.isfinite(X)):
            r, c = np.argwhere(~np.isfinite(X))[0]
            raise ValidationError(f"missing or non-finite value at row {r}, column {self.covariates[c].name!r}")
        for j, cov in enumerate(self.covariates):
            if cov.is_nominal:
                col = X[:, j]
                J = cov.n_categories
                if np.any(col != np.round(col)) or col.min() < 1 or col.max() > J:
                    raise ValidationError(f"nominal column {cov.name!r} has codes outside 1..{J}")
        if self.task.is_classification:
            y = np.asarray(self.y, dtype=np.int64)
            K = self.task.n_classes
            if K < 1 or y.min() < 1 or y.max() > K:
                raise ValidationError(f"class codes must lie in 1..{K}")
        else:
            y = np.asarray(self.y, dtype=np.float64)
            if not np.all(np.isfinite(y)):
                raise ValidationError("outcome contains non-finite values")
        if y.shape != (n,):
            raise ValidationError(f"outcome has shape {y.shape}, expected ({n},)")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.covariates]

    def column_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no covariate named {name!r}") from None

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, X=self.X[rows], y=self.y[rows])

    def with_outcome(self, y: np.ndarray) -> "Dataset":
        return replace(self, y=y)

    def schema_dict(self) -> dict:
        return {
            "task": self.task.kind,
            "classes": list(self.task.classes),
            "covariates": [
                {"name": c.name, "kind": c.kind, "categories": None if c.categories is None else list(c.categories)}
                for c in self.covariates
            ],
        }

    def to_dict(self) -> dict:
        d = self.schema_dict()
        d["X"] = self.X.tolist()
        d["y"] = self.y.tolist()
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "Dataset":
        covs, task = schema_from_dict(d)
        X = np.array(d["X"], dtype=np.float64).reshape(-1, len(covs))
        dtype = np.int64 if task.is_classification else np.float64
        return cls(X, np.array(d["y"], dtype=dtype), covs, task)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.covariates == other.covariates
            and self.task == other.task
            and self.X.tobytes() == other.X.tobytes()
            and self.y.tobytes() == other.y.tobytes()
        )


def schema_from_dict(d: Mapping) -> tuple[tuple[Covariate, ...], Task]:
    covs = tuple(
        Covariate(c["name"], c["kind"], None if c.get("categories") is None else tuple(c["categories"]))
        for c in d["covariates"]
    )
    if d["task"] == CLASSIFICATION:
        task = Task.classification(d["classes"])
    else:
        task = Task.regression()
    return covs, task


@dataclass(frozen=True)
class Hyperparams:
    fract_n: float = 0.7
    prop_var: float = 1.0
    n_cand_trees: int = 500
    max_depth_root: int = 3
    mtry: int = 1
    prop_best_splits: float = 0.01
    num_trees: int = 500
    min_node_size: int = 5
    seed: int = 0

    def __post_init__(self):
        checks = [
            (0 < self.fract_n <= 1, "fract_n must be in (0, 1]"),
            (0 < self.prop_var <= 1, "prop_var must be in (0, 1]"),
            (self.n_cand_trees >= 1, "n_cand_trees must be >= 1"),
            (self.max_depth_root >= 1, "max_depth_root must be >= 1"),
            (self.mtry >= 1, "mtry must be >= 1"),
            (0 < self.prop_best_splits <= 1, "prop_best_splits must be in (0, 1]"),
            (self.num_trees >= 1, "num_trees must be >= 1"),
            (self.min_node_size >= 1, "min_node_size must be >= 1"),
            (0 <= self.seed < 2**64, "seed must be a non-negative 64-bit integer"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValidationError(msg)

    @property
    def min_root_node(self) -> int:
        """Smallest child size allowed for a split inside a tree root."""
        return max(self.min_node_size, 2)

    def check_for(self, p: int) -> "Hyperparams":
        if self.mtry > p:
            raise ValidationError(f"mtry={self.mtry} exceeds covariate count p={p}")
        return self

    def n_root_covariates(self, p: int) -> int:
        # ceiling guarantees at least one covariate; guard against 0.1 * 70 = 7.000000000000001
        return min(p, max(1, math.ceil(self.prop_var * p - 1e-9)))

    def n_tree_sample(self, n: int) -> int:
        return int(math.floor(self.fract_n * n + 1e-9))

    def update(self, **overrides) -> "Hyperparams":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def default_hyperparams(p: int, task: Task | str | None = None, **overrides) -> Hyperparams:
    """Defaults for ``p`` covariates; ``task`` does not change any default."""
    if p < 1:
        raise ValidationError("p must be >= 1")
    prop_var = math.sqrt(p) / p if p <= 100 else 0.1
    mtry = max(1, math.isqrt(p))
    return Hyperparams(prop_var=prop_var, mtry=mtry).update(**overrides)


# ---------------------------------------------------------------------------
# ingestion


def _sort_key(values: Sequence) -> list:
    try:
        return sorted(values, key=float)
    except (TypeError, ValueError):
        return sorted(values, key=str)


def _canonical_label(v: Any) -> Any:
    """Numeric-looking labels become int/float so CSV and array inputs agree."""
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return int(v) if float(v).is_integer() else float(v)
    s = str(v).strip()
    try:
        f = float(s)
    except ValueError:
        return s
    if math.isfinite(f) and f.is_integer() and "." not in s and "e" not in s.lower():
        return int(f)
    return f if math.isfinite(f) else s


def _is_missing(v: Any) -> bool:
    if v is None:
        return True
    if isinstance(v, str):
        return v.strip() in ("", "NA", "NaN", "nan", "null")
    try:
        return bool(np.isnan(v))
    except TypeError:
        return False


@dataclass
class Schema:
    """Column declaration for raw tables."""

    outcome: str | None = None
    task: str = CLASSIFICATION
    nominal: tuple[str, ...] = ()
    classes: tuple | None = None
    categories: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str | Path) -> "Schema":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        return cls(
            outcome=d.get("outcome"),
            task=d.get("task", CLASSIFICATION),
            nominal=tuple(d.get("nominal", ())),
            classes=None if d.get("classes") is None else tuple(_canonical_label(c) for c in d["classes"]),
            categories={k: tuple(_canonical_label(c) for c in v) for k, v in d.get("categories", {}).items()},
        )


def validate_dataset(header: Sequence[str], rows: Sequence[Sequence[Any]], schema: Schema) -> Dataset:
    """Check a raw table against ``schema`` and build a :class:`Dataset`.

    Nominal columns are re-coded to contiguous codes ``1..J`` following the
    sorted order of their raw labels (or the schema's declared categories).
    Rows are reported 1-based, counting data rows only.
    """
    header = [h.strip() for h in header]
    if schema.task not in (CLASSIFICATION, REGRESSION):
        raise ValidationError(f"unknown task {schema.task!r}")
    outcome = schema.outcome if schema.outcome is not None else header[-1]
    if outcome not in header:
        raise ValidationError(f"outcome column {outcome!r} not found")
    unknown = set(schema.nominal) - set(header)
    if unknown:
        raise ValidationError(f"nominal columns not in table: {sorted(unknown)}")
    if not rows:
        raise ValidationError("table has no data rows")
    width = len(header)
    for r, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValidationError(f"row {r} has {len(row)} fields, expected {width}")
        for c, v in enumerate(row):
            if _is_missing(v):
                raise ValidationError(f"missing value at row {r}, column {header[c]!r}")

    cov_idx = [c for c, h in enumerate(header) if h != outcome]
    if not cov_idx:
        raise ValidationError("table has no covariate columns")
    n = len(rows)
    X = np.empty((n, len(cov_idx)))
    covs = []
    for j, c in enumerate(cov_idx):
        name = header[c]
        raw = [row[c] for row in rows]
        if name in schema.nominal:
            labels = [_canonical_label(v) for v in raw]
            declared = schema.categories.get(name)
            cats = tuple(declared) if declared is not None else tuple(_sort_key(set(labels)))
            code = {lab: i + 1 for i, lab in enumerate(cats)}
            for r, lab in enumerate(labels, start=1):
                if lab not in code:
                    raise ValidationError(f"undeclared category {lab!r} at row {r}, column {name!r}")
                X[r - 1, j] = code[lab]
            covs.append(Covariate(name, NOMINAL, cats))
        else:
            for r, v in enumerate(raw, start=1):
                try:
                    X[r - 1, j] = float(v)
                except (TypeError, ValueError):
                    raise ValidationError(
                        f"non-numeric value {v!r} at row {r}, column {name!r} (declare it nominal?)"
                    ) from None
            covs.append(Covariate(name, CONTINUOUS))

    oc = header.index(outcome)
    raw_y = [row[oc] for row in rows]
    if schema.task == CLASSIFICATION:
        labels = [_canonical_label(v) for v in raw_y]
        classes = tuple(schema.classes) if schema.classes is not None else tuple(_sort_key(set(labels)))
        code = {lab: i + 1 for i, lab in enumerate(classes)}
        y = np.empty(n, dtype=np.int64)
        for r, lab in enumerate(labels, start=1):
            if lab not in code:
                raise ValidationError(f"label {lab!r} at row {r} is not a declared class")
            y[r - 1] = code[lab]
        task = Task.classification(classes)
    else:
        try:
            y = np.array([float(v) for v in raw_y])
        except (TypeError, ValueError):
            raise ValidationError("regression outcome must be numeric") from None
        task = Task.regression()
    return Dataset(X, y, tuple(covs), task)


def read_table(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        rows = [row for row in reader if row]
    return header, rows


def read_csv(path: str | Path, schema: Schema) -> Dataset:
    header, rows = read_table(path)
    return validate_dataset(header, rows, schema)


def write_csv(dataset: Dataset, path: str | Path, outcome_name: str = "y") -> None:
    """Write raw labels back out; floats use ``repr`` so values round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.names + [outcome_name])
        for i in range(dataset.n):
            row = []
            for j, cov in enumerate(dataset.covariates):
                v = dataset.X[i, j]
                row.append(cov.categories[int(v) - 1] if cov.is_nominal else repr(float(v)))
            y = dataset.y[i]
            row.append(dataset.task.classes[int(y) - 1] if dataset.task.is_classification else repr(float(y)))
            w.writerow(row)


def schema_of(dataset: Dataset, outcome_name: str = "y") -> Schema:
    """Schema that reproduces ``dataset`` when its CSV export is read back."""
    return Schema(
        outcome=outcome_name,
        task=dataset.task.kind,
        nominal=tuple(c.name for c in dataset.covariates if c.is_nominal),
        classes=dataset.task.classes if dataset.task.is_classification else None,
        categories={c.name: c.categories for c in dataset.covariates if c.is_nominal},
    )


def make_dataset(
    X: np.ndarray,
    y: np.ndarray,
    task: str = CLASSIFICATION,
    names: Sequence[str] | None = None,
    nominal: Mapping[int, int] | None = None,
    n_classes: int | None = None,
) -> Dataset:
    """Build a dataset from already-coded arrays.

    ``y`` holds class codes ``1..K`` for classification. ``nominal`` maps a
    column index to its category count ``J``; those columns must hold codes
    ``1..J``.
    """
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    names = list(names) if names is not None else [f"X{j + 1}" for j in range(p)]
    nominal = dict(nominal or {})
    covs = tuple(
        Covariate(names[j], NOMINAL, tuple(range(1, nominal[j] + 1))) if j in nominal else Covariate(names[j])
        for j in range(p)
    )
    if task == CLASSIFICATION:
        y = np.asarray(y, dtype=np.int64)
        t = Task.classification(range(1, (n_classes or int(y.max())) + 1))
    else:
        y = np.asarray(y, dtype=np.float64)
        t = Task.regression()
    return Dataset(X, y, covs, t)
