"""Figures for the command-line reports (written to files, never shown)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .crtr import CrtrReport  # noqa: E402
from .importance import VimResult  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return Path(path)


def plot_vim(result: VimResult, path: str | Path, top: int = 20) -> Path:
    order = np.argsort(result.ranks())[:top][::-1]
    fig, ax = plt.subplots(figsize=(6, 0.3 * len(order) + 1.2))
    ax.barh([result.names[j] for j in order], result.vim[order], color="steelblue")
    ax.axvline(0, color="black", lw=0.8)
    ax.set_xlabel("unity importance")
    return _save(fig, path)


def _layout(report: CrtrReport):
    root = report.root
    xs = {}
    for i, v in enumerate(root.leaf_order()):
        xs[v] = float(i)
    for v in range(root.n_nodes - 1, -1, -1):
        if root.feature[v] >= 0:
            a, b = root.children(v)
            xs[v] = (xs[a] + xs[b]) / 2
    return xs


def _short_label(n: dict) -> str:
    if "class_proportions" in n:
        props = list(n["class_proportions"].items())
        c, p = props[-1]
        out = f"P({c})={p:.2f}\nN={n['n']}"
    else:
        out = f"mean={n['mean']:.3g}\nN={n['n']}"
    if "split" in n:
        sp = n["split"]
        cond = (f"{sp['covariate']} in {{{','.join(map(str, sp['left_categories']))}}}"
                if "left_categories" in sp else f"{sp['covariate']} <= {sp['threshold']:.3g}")
        out = cond + "\n" + out
    return out


def plot_crtr(report: CrtrReport, path: str | Path) -> Path:
    """Tree root on the left (line width = covariate score, dashed = top split,
    gray = away from top splits), class-conditional summaries of the top nodes on the right."""
    n_sum = len(report.summaries)
    fig = plt.figure(figsize=(11, max(4.0, 2.2 * max(n_sum, 1))))
    grid = fig.add_gridspec(max(n_sum, 1), 2, width_ratios=[2.2, 1])
    ax = fig.add_subplot(grid[:, 0])
    xs = _layout(report)
    shaded = report.shaded()
    for n in report.nodes:
        if "split" not in n:
            continue
        v = n["id"]
        for child in (n["left"], n["right"]):
            ax.plot([xs[v], xs[child]], [-n["depth"], -n["depth"] - 1], color="black",
                    lw=0.8 + 4 * n["covariate_score"], ls="--" if n["top_split"] else "-", zorder=1)
    for n in report.nodes:
        v = n["id"]
        ax.text(xs[v], -n["depth"], _short_label(n), ha="center", va="center", fontsize=7, zorder=2,
                bbox=dict(boxstyle="round", fc="0.82" if v in shaded else "white", ec="0.4"))
    ax.set_xlim(min(xs.values()) - 0.8, max(xs.values()) + 0.8)
    ax.set_ylim(-max(n["depth"] for n in report.nodes) - 0.6, 0.6)
    ax.axis("off")
    ax.set_title(f"CRTR of {report.name} (tree {report.tree_id})")
    for i, s in enumerate(report.summaries):
        sax = fig.add_subplot(grid[i, 1])
        if s["kind"] == "histogram":
            edges = np.asarray(s["bin_edges"])
            mids = (edges[:-1] + edges[1:]) / 2
            for g, c in s["counts"].items():
                c = np.asarray(c, float)
                dens = c / max(c.sum(), 1) / np.diff(edges)
                sax.plot(mids, dens, label=str(g))
        else:
            width = 0.8 / max(len(s["counts"]), 1)
            for k, (g, c) in enumerate(s["counts"].items()):
                sax.bar(np.arange(len(c)) + k * width, c, width=width, label=str(g))
            sax.set_xticks(np.arange(len(s["categories"])))
            sax.set_xticklabels(s["categories"])
        sax.set_title(f"node {s['node']}: {s['covariate']}", fontsize=8)
        sax.tick_params(labelsize=7)
        sax.legend(fontsize=6, title="class" if report.classes else None, title_fontsize=6)
    return _save(fig, path)


def plot_simulation(summaries: Sequence, path: str | Path) -> Path:
    """Mean AUC per covariate type with 95% intervals, one panel per sample size."""
    sizes = sorted({s.n for s in summaries})
    methods = sorted({s.method for s in summaries})
    types = sorted({s.covariate_type for s in summaries})
    fig, axes = plt.subplots(1, len(sizes), figsize=(4 + 3 * len(sizes), 0.3 * len(types) + 2),
                             sharey=True, squeeze=False)
    for ax, n in zip(axes[0], sizes):
        for k, m in enumerate(methods):
            rows = {s.covariate_type: s for s in summaries if s.n == n and s.method == m}
            y = np.arange(len(types)) + (k - (len(methods) - 1) / 2) * 0.25
            mean = np.array([rows[t].mean_auc if t in rows else np.nan for t in types])
            lo = np.array([rows[t].ci_low if t in rows else np.nan for t in types])
            hi = np.array([rows[t].ci_high if t in rows else np.nan for t in types])
            ax.errorbar(mean, y, xerr=[mean - lo, hi - mean], fmt="o", ms=3, capsize=2, label=m)
        ax.axvline(0.5, color="gray", lw=0.8, ls=":")
        ax.set_title(f"n = {n}")
        ax.set_xlabel("AUC vs noise")
        ax.set_yticks(np.arange(len(types)))
        ax.set_yticklabels(types, fontsize=7)
    axes[0][-1].legend(fontsize=7)
    return _save(fig, path)


def plot_benchmark(names: Sequence[str], a: Sequence[float], b: Sequence[float], metric: str,
                   path: str | Path, labels=("ufo", "rf")) -> Path:
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.scatter(b, a, s=18)
    for nm, x, y in zip(names, b, a):
        ax.annotate(nm, (x, y), fontsize=6, xytext=(2, 2), textcoords="offset points")
    lo = float(np.nanmin(np.concatenate([a, b])))
    hi = float(np.nanmax(np.concatenate([a, b])))
    ax.plot([lo, hi], [lo, hi], color="gray", lw=0.8, ls=":")
    ax.set_xlabel(f"{metric} ({labels[1]})")
    ax.set_ylabel(f"{metric} ({labels[0]})")
    return _save(fig, path)
