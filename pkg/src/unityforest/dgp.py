"""Synthetic binary-outcome designs with marginal effects and interactions.

Every design draws a balanced outcome ``y`` (class 1 or 2 with probability
1/2) and writes ``s = +1`` for class 2, ``-1`` for class 1. Informative
covariates are standard normal noise plus a class-dependent mean shift:

* marginal: ``X = Z + s * delta / 2`` (class means differ by ``delta``);
* qualitative interaction: the sign of the shift flips with the partner, so
  neither covariate has a marginal effect;
* quantitative interaction: both covariates have an effect, and the partner
  modulates its strength (1.5x where the partner is small, 0.5x otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Covariate, Dataset, Task, CONTINUOUS, NOMINAL

STRENGTHS = {"s": 1.5, "m": 1.0, "w": 0.5}
N_NOISE = 50
NOISE = "noise"


@dataclass(frozen=True)
class DgpSpec:
    family: str  # "dgp1" or "dgp2"
    n: int
    deltas: dict = field(default_factory=lambda: dict(STRENGTHS))
    n_noise: int = N_NOISE

    def __post_init__(self):
        if self.family not in ("dgp1", "dgp2"):
            raise ValueError(f"unknown design {self.family!r}")
        if self.n < 4:
            raise ValueError("n must be at least 4")

    def generate(self, seed: int) -> Dataset:
        gen = generate_dgp1 if self.family == "dgp1" else generate_dgp2
        return gen(self.n, seed, deltas=self.deltas, n_noise=self.n_noise)

    def covariate_types(self) -> dict[str, str]:
        return covariate_types(self.family, self.n_noise)


def _outcome(rng, n):
    y = rng.integers(1, 3, size=n)
    return y, np.where(y == 2, 1.0, -1.0)


def _dataset(cols: dict[str, np.ndarray], y, nominal: dict[str, int]) -> Dataset:
    covs, X = [], []
    for name, col in cols.items():
        if name in nominal:
            J = nominal[name]
            covs.append(Covariate(name, NOMINAL, tuple(range(J))))
            X.append(col.astype(np.float64) + 1.0)  # raw level c is category code c + 1
        else:
            covs.append(Covariate(name, CONTINUOUS))
            X.append(col.astype(np.float64))
    return Dataset(np.column_stack(X), y.astype(np.float64), tuple(covs), Task.classification((1, 2)))


def generate_dgp1(n: int, seed: int, deltas: dict | None = None, n_noise: int = N_NOISE) -> Dataset:
    """68 continuous covariates: per strength tier two marginal covariates, one
    quantitative pair and one qualitative pair, then ``n_noise`` noise columns.

    Names: ``mrg_{t}_{1,2}``, ``qn_{t}_{1,2}``, ``ql_{t}_{1,2}`` for tier
    ``t`` in s/m/w, and ``no_1..``. In each pair ``_1`` carries the
    partner-dependent effect and ``_2`` is the partner.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    d = dict(STRENGTHS if deltas is None else deltas)
    rng = np.random.default_rng(seed)
    y, s = _outcome(rng, n)
    z = lambda: rng.standard_normal(n)  # noqa: E731
    cols = {}
    for t in "smw":
        cols[f"mrg_{t}_1"] = z() + s * d[t] / 2
        cols[f"mrg_{t}_2"] = z() + s * d[t] / 2
    for t in "smw":
        b = z() + s * d[t] / 2
        cols[f"qn_{t}_1"] = z() + s * d[t] / 2 * np.where(b < 0, 1.5, 0.5)
        cols[f"qn_{t}_2"] = b
    for t in "smw":
        b = z()
        cols[f"ql_{t}_1"] = z() + s * d[t] / 2 * np.sign(b)
        cols[f"ql_{t}_2"] = b
    for k in range(1, n_noise + 1):
        cols[f"no_{k}"] = z()
    return _dataset(cols, y, {})


def generate_dgp2(n: int, seed: int, deltas: dict | None = None, n_noise: int = N_NOISE) -> Dataset:
    """69 covariates with four categorical partners.

    * ``mrg_{t}``: marginal effect.
    * ``ql_bne_{t}``: shift flips with binary ``bne_ql`` (no marginal effect).
    * ``ql_be_{t}``: same with binary ``be_ql``, which itself has a moderate
      marginal effect (P(level 1) is 0.65 in class 2, 0.35 in class 1).
    * ``qn_bne_{t}``: effect of size ``delta`` only where binary ``bne_qn`` = 1.
    * ``ql_cne_{t}``: shift +, - or none by the first, second or third level
      of ``cne_ql``.
    * ``no_1..``: noise.
    """
    if n < 4:
        raise ValueError("n must be at least 4")
    d = dict(STRENGTHS if deltas is None else deltas)
    rng = np.random.default_rng(seed)
    y, s = _outcome(rng, n)
    z = lambda: rng.standard_normal(n)  # noqa: E731
    bne_ql = rng.integers(0, 2, size=n)
    be_ql = (rng.random(n) < np.where(y == 2, 0.65, 0.35)).astype(np.int64)
    bne_qn = rng.integers(0, 2, size=n)
    cne_ql = rng.integers(0, 3, size=n)
    flip3 = np.array([1.0, -1.0, 0.0])[cne_ql]
    cols = {}
    for t in "smw":
        cols[f"mrg_{t}"] = z() + s * d[t] / 2
    for t in "smw":
        cols[f"ql_bne_{t}"] = z() + s * d[t] / 2 * (2 * bne_ql - 1)
    for t in "smw":
        cols[f"ql_be_{t}"] = z() + s * d[t] / 2 * (2 * be_ql - 1)
    for t in "smw":
        cols[f"qn_bne_{t}"] = z() + s * d[t] * bne_qn
    for t in "smw":
        cols[f"ql_cne_{t}"] = z() + s * d[t] / 2 * flip3
    cols["bne_ql"] = bne_ql
    cols["be_ql"] = be_ql
    cols["bne_qn"] = bne_qn
    cols["cne_ql"] = cne_ql
    for k in range(1, n_noise + 1):
        cols[f"no_{k}"] = z()
    return _dataset(cols, y, {"bne_ql": 2, "be_ql": 2, "bne_qn": 2, "cne_ql": 3})


def covariate_types(family: str, n_noise: int = N_NOISE) -> dict[str, str]:
    """Covariate name -> type label; noise covariates map to ``"noise"``."""
    out = {}
    if family == "dgp1":
        for kind in ("mrg", "qn", "ql"):
            for t in "smw":
                out[f"{kind}_{t}_1"] = out[f"{kind}_{t}_2"] = f"{kind}_{t}"
    elif family == "dgp2":
        for t in "smw":
            out[f"mrg_{t}"] = f"mrg_{t}"
        for kind in ("ql_bne", "ql_be", "qn_bne", "ql_cne"):
            for t in "smw":
                out[f"{kind}_{t}"] = f"{kind}_{t}"
        for name in ("bne_ql", "be_ql", "bne_qn", "cne_ql"):
            out[name] = name
    else:
        raise ValueError(f"unknown design {family!r}")
    for k in range(1, n_noise + 1):
        out[f"no_{k}"] = NOISE
    return out
