"""Regenerate the small binary benchmark tables in tests/data.

Needs scikit-learn (``pip install .[fixtures]``); the package itself does not.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
from sklearn import datasets

OUT = Path(__file__).resolve().parent.parent / "tests" / "data"


def _binary(name, X, y, names):
    y = np.asarray(y).astype(int)
    names = [n.replace(" ", "_").replace("(", "").replace(")", "").replace("/", "_") for n in names]
    with open(OUT / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(names) + ["label"])
        for row, lab in zip(X, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])
    schema = {"outcome": "label", "task": "classification", "classes": [0, 1]}
    (OUT / f"{name}.schema.json").write_text(json.dumps(schema, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    d = datasets.load_breast_cancer()
    _binary("breast_cancer", d.data, d.target, d.feature_names)
    d = datasets.load_wine()
    _binary("wine", d.data, d.target == 1, d.feature_names)
    d = datasets.load_iris()
    _binary("iris", d.data, d.target == 1, d.feature_names)
    d = datasets.load_diabetes()
    _binary("diabetes", d.data, d.target > np.median(d.target), d.feature_names)
    d = datasets.load_digits()
    keep = np.isin(d.target, (3, 8))
    X = d.data[keep]
    used = X.std(axis=0) > 0
    _binary("digits_3v8", X[:, used], d.target[keep] == 8, [f"px{i}" for i in np.flatnonzero(used)])


if __name__ == "__main__":
    main()
