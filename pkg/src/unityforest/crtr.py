"""Covariate-representative tree roots (CRTRs).

For a covariate j the forest's root splits on j are scored on out-of-bag
observations, the top-scoring ones are picked as for the unity importance,
and the roots containing them form the best roots of j. The CRTR is their
medoid under a depth-weighted distance that compares which covariate each
root uses at each position. Node summaries shown with a CRTR come from in-bag
observations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Dataset
from .forest import Forest
from .importance import SplitScores, _collect, select_top_splits
from .tree import TreeRoot

N_HIST_BINS = 25
_NONE = -1


def collect_oob_split_scores(forest: Forest, dataset: Dataset, workers: int = 1) -> SplitScores:
    """Split score of every internal root node, measured on the tree's OOB observations."""
    return _collect(forest, dataset, True, workers)


@dataclass(frozen=True)
class BestRootSet:
    covariate: int
    tree_ids: tuple[int, ...]
    nodes: tuple[tuple[int, int], ...]  # selected (tree, node) pairs

    def __len__(self) -> int:
        return len(self.tree_ids)

    def nodes_in(self, tree_id: int) -> list[int]:
        return sorted(v for t, v in self.nodes if t == tree_id)


def select_best_tree_roots(oob_records: SplitScores, j: int, prop_best_splits: float) -> BestRootSet:
    """Trees holding at least one of covariate j's top OOB-scoring root splits."""
    sel = select_top_splits(oob_records, j, prop_best_splits)
    nodes = tuple((int(oob_records.tree[r]), int(oob_records.node[r])) for r in sel)
    return BestRootSet(j, tuple(sorted({t for t, _ in nodes})), nodes)


def position_covariates(root: TreeRoot, max_depth: int) -> np.ndarray:
    """Split covariate at each internal position of a complete binary tree of
    depth ``max_depth`` (heap order), ``-1`` where the root has no split."""
    out = np.full(2**max_depth - 1, _NONE, dtype=np.int64)
    pos = root.heap_positions()
    for v in root.internal_nodes:
        if pos[v] < len(out):
            out[pos[v]] = root.feature[v]
    return out


def _position_weights(max_depth: int) -> np.ndarray:
    depth = np.floor(np.log2(np.arange(1, 2**max_depth))).astype(np.int64)
    return 2.0 ** (-depth)


def tree_root_distance(a: TreeRoot, b: TreeRoot, max_depth: int | None = None) -> float:
    """Share of position weight (``2**-depth`` per position) where the two roots
    split on different covariates; a missing split counts as its own covariate."""
    D = max_depth if max_depth is not None else max(a.max_depth, b.max_depth)
    w = _position_weights(D)
    mismatch = position_covariates(a, D) != position_covariates(b, D)
    return float(np.sum(w * mismatch) / np.sum(w))


def distance_matrix(roots: list[TreeRoot], max_depth: int) -> np.ndarray:
    codes = np.array([position_covariates(r, max_depth) for r in roots]).reshape(len(roots), -1)
    w = _position_weights(max_depth)
    mism = codes[:, None, :] != codes[None, :, :]
    return (mism * w).sum(axis=-1) / w.sum()


def medoid(roots: list[TreeRoot], max_depth: int) -> int:
    """Index of the root with the smallest mean distance to the others (first on ties)."""
    if not roots:
        raise ValueError("medoid of an empty set")
    means = distance_matrix(roots, max_depth).mean(axis=1)
    # exact ties come out of the float sums with rounding noise
    return int(np.flatnonzero(means <= means.min() + 1e-12)[0])


def covariate_frequencies(roots: list[TreeRoot], p: int) -> np.ndarray:
    """Relative frequency of each covariate among all internal nodes of ``roots``."""
    feats = [r.feature[r.feature >= 0] for r in roots]
    feats = np.concatenate(feats) if feats else np.empty(0, np.int64)
    if len(feats) == 0:
        return np.zeros(p)
    return np.bincount(feats, minlength=p) / len(feats)


def covariate_score(freq_best: float, freq_all: float) -> float:
    """Enrichment of a split covariate in the best roots: ``fb / (fb + fa)``, 0.5 if both vanish."""
    if freq_best + freq_all == 0:
        return 0.5
    return float(freq_best / (freq_best + freq_all))


@dataclass(frozen=True)
class NoCrtr:
    covariate: int
    name: str
    reason: str = "no CRTR available: covariate is never split on in any tree root"


@dataclass(frozen=True)
class CrtrReport:
    covariate: int
    name: str
    tree_id: int
    root: TreeRoot
    best_tree_ids: tuple[int, ...]
    top_nodes: tuple[int, ...]
    scores: dict  # internal node -> covariate score
    nodes: list = field(default_factory=list)  # per-node dicts, see select_crtr
    summaries: list = field(default_factory=list)  # per top node covariate summaries
    task: str = ""
    classes: tuple = ()

    def shaded(self) -> set[int]:
        """Nodes that are neither top-scoring nodes nor ancestors of one."""
        keep = set()
        par = self.root.parents()
        for v in self.top_nodes:
            while v >= 0:
                keep.add(int(v))
                v = par[v]
        return {v for v in range(self.root.n_nodes) if v not in keep}


def _condition(forest: Forest, j: int, thr: float) -> dict:
    cov = forest.covariates[j]
    out = {"covariate": cov.name, "threshold": float(thr)}
    if cov.is_nominal:
        ordering = forest.orderings[j]
        out["left_categories"] = [cov.categories[c - 1] for c in ordering.categories_in_order()
                                  if ordering.rank[c - 1] <= thr]
        out["right_categories"] = [cov.categories[c - 1] for c in ordering.categories_in_order()
                                   if ordering.rank[c - 1] > thr]
    return out


def _outcome_summary(dataset: Dataset, rows: np.ndarray) -> dict:
    n = len(rows)
    if dataset.task.is_classification:
        K = dataset.task.n_classes
        counts = np.bincount(dataset.y[rows].astype(np.int64) - 1, minlength=K) if n else np.zeros(K)
        props = counts / n if n else np.full(K, np.nan)
        return {"n": n, "class_proportions": {str(c): float(p) for c, p in zip(dataset.task.classes, props)}}
    return {"n": n, "mean": float(np.mean(dataset.y[rows])) if n else float("nan")}


def _covariate_summary(forest: Forest, dataset: Dataset, j: int, v: int, rows: np.ndarray) -> dict:
    cov = forest.covariates[j]
    x = dataset.X[rows, j]
    if dataset.task.is_classification:
        groups = [(str(c), dataset.y[rows] == k + 1) for k, c in enumerate(dataset.task.classes)]
    else:
        groups = [("all", np.ones(len(rows), bool))]
    out = {"node": v, "covariate": cov.name, "n": int(len(rows))}
    if cov.is_nominal:
        cats = list(cov.categories)
        out["kind"] = "categorical"
        out["categories"] = cats
        out["counts"] = {
            g: np.bincount(x[m].astype(np.int64) - 1, minlength=len(cats)).tolist() for g, m in groups
        }
    else:
        lo, hi = (float(x.min()), float(x.max())) if len(x) else (0.0, 1.0)
        edges = np.histogram_bin_edges(x, bins=N_HIST_BINS, range=(lo, hi))
        out["kind"] = "histogram"
        out["bin_edges"] = edges.tolist()
        out["counts"] = {g: np.histogram(x[m], bins=edges)[0].tolist() for g, m in groups}
    return out


def select_crtr(
    best: BestRootSet,
    forest: Forest,
    dataset: Dataset,
    all_freq: np.ndarray | None = None,
) -> CrtrReport | NoCrtr:
    """Medoid of the best roots, annotated for display.

    Every internal node gets the covariate score of its split covariate; the
    top-scoring nodes of the chosen tree are marked; node summaries use the
    tree's in-bag observations.
    """
    j = best.covariate
    name = forest.names[j]
    if len(best) == 0:
        return NoCrtr(j, name)
    D = forest.hp.max_depth_root
    roots = [forest.trees[t].root for t in best.tree_ids]
    tree_id = best.tree_ids[medoid(roots, D)]
    tree = forest.trees[tree_id]
    root = tree.root
    if all_freq is None:
        all_freq = covariate_frequencies([t.root for t in forest.trees], forest.p)
    best_freq = covariate_frequencies(roots, forest.p)
    scores = {int(v): covariate_score(best_freq[root.feature[v]], all_freq[root.feature[v]])
              for v in root.internal_nodes}

    Xe = forest.encode(dataset.X)
    members = root.route(Xe, tree.inbag)
    par = root.parents()
    pos = root.heap_positions()
    top = tuple(best.nodes_in(tree_id))
    nodes = []
    for v in range(root.n_nodes):
        info = {
            "id": v,
            "depth": int(root.depth[v]),
            "position": int(pos[v]),
            "parent": int(par[v]),
            **_outcome_summary(dataset, members[v]),
        }
        if root.feature[v] >= 0:
            a, b = root.children(v)
            info.update(split=_condition(forest, int(root.feature[v]), root.threshold[v]),
                        left=a, right=b, covariate_score=scores[v], top_split=v in top)
        nodes.append(info)
    summaries = [_covariate_summary(forest, dataset, j, v, members[v]) for v in top]
    return CrtrReport(
        covariate=j, name=name, tree_id=int(tree_id), root=root, best_tree_ids=best.tree_ids,
        top_nodes=top, scores=scores, nodes=nodes, summaries=summaries,
        task=dataset.task.kind, classes=tuple(str(c) for c in dataset.task.classes),
    )


def crtrs(forest: Forest, dataset: Dataset, covariates: list[int], workers: int = 1) -> list:
    """CRTR (or ``NoCrtr``) for each listed covariate, sharing the OOB scoring pass."""
    records = collect_oob_split_scores(forest, dataset, workers)
    all_freq = covariate_frequencies([t.root for t in forest.trees], forest.p)
    return [
        select_crtr(select_best_tree_roots(records, j, forest.hp.prop_best_splits), forest, dataset, all_freq)
        for j in covariates
    ]


# ---------------------------------------------------------------------------
# export


def report_dict(report: CrtrReport | NoCrtr) -> dict:
    if isinstance(report, NoCrtr):
        return {"covariate": report.name, "available": False, "reason": report.reason}
    shaded = report.shaded()
    nodes = [{**n, "shaded": n["id"] in shaded} for n in report.nodes]
    edges = []
    for n in report.nodes:
        if "split" in n:
            for child, side in ((n["left"], "left"), (n["right"], "right")):
                edges.append({"from": n["id"], "to": child, "side": side,
                              "covariate_score": n["covariate_score"], "top_split": n["top_split"]})
    return {
        "covariate": report.name,
        "available": True,
        "tree_id": report.tree_id,
        "task": report.task,
        "classes": list(report.classes),
        "best_tree_ids": list(report.best_tree_ids),
        "top_nodes": list(report.top_nodes),
        "nodes": nodes,
        "edges": edges,
        "top_node_summaries": report.summaries,
    }


def report_json(report: CrtrReport | NoCrtr) -> str:
    return json.dumps(report_dict(report), indent=2, sort_keys=True) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _esc(s: str) -> str:
    return str(s).replace("\\", "\\\\").replace('"', '\\"')


def _node_label(n: dict, classes: tuple) -> str:
    lines = []
    if "split" in n:
        sp = n["split"]
        if "left_categories" in sp:
            lines.append(f"{sp['covariate']} in {{{', '.join(map(str, sp['left_categories']))}}}")
        else:
            lines.append(f"{sp['covariate']} <= {_fmt(sp['threshold'])}")
    if "class_proportions" in n:
        lines.append(", ".join(f"P({c})={_fmt(p)}" for c, p in n["class_proportions"].items()))
    else:
        lines.append(f"mean={_fmt(n['mean'])}")
    lines.append(f"N={n['n']}")
    return "\\n".join(_esc(s) for s in lines)


def report_dot(report: CrtrReport) -> str:
    """Graph description: edge pen width follows the covariate score of the
    parent split, top-scoring splits are dashed, and nodes outside the paths
    to top-scoring nodes are filled gray."""
    shaded = report.shaded()
    out = [
        f'digraph "crtr_{_esc(report.name)}" {{',
        f'  label="CRTR of {_esc(report.name)} (tree {report.tree_id})";',
        '  node [shape=box, style="rounded,filled", fontname="Helvetica"];',
        '  edge [fontname="Helvetica"];',
    ]
    for n in report.nodes:
        fill = "gray80" if n["id"] in shaded else "white"
        out.append(f'  n{n["id"]} [label="{_node_label(n, report.classes)}", fillcolor="{fill}"];')
    for n in report.nodes:
        if "split" not in n:
            continue
        pw = 1.0 + 5.0 * n["covariate_score"]
        style = ', style="dashed"' if n["top_split"] else ""
        for child, lab in ((n["left"], "yes"), (n["right"], "no")):
            out.append(f'  n{n["id"]} -> n{child} [label="{lab}", penwidth={pw:.3f}{style}];')
    out.append("}")
    return "\n".join(out) + "\n"


def export_crtr(report: CrtrReport | NoCrtr, stem: str | Path) -> list[Path]:
    """Write ``<stem>.json`` and, when a CRTR exists, ``<stem>.dot``."""
    paths = [Path(f"{stem}.json")]
    paths[0].write_text(report_json(report), encoding="utf-8")
    if isinstance(report, CrtrReport):
        paths.append(Path(f"{stem}.dot"))
        paths[1].write_text(report_dot(report), encoding="utf-8")
    return paths
