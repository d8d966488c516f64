"""Tree root and tree containers.

Nodes are stored as flat arrays in breadth-first order within the root and
appended afterwards for the CART-grown body, so ids ``0..n_root-1`` are always
the root nodes. The right child of node ``v`` is ``left[v] + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class TreeRoot:
    feature: np.ndarray  # -1 marks a root leaf
    threshold: np.ndarray
    left: np.ndarray
    depth: np.ndarray
    covariate_subset: np.ndarray
    max_depth: int
    members: tuple | None = None  # in-bag observation indices per node

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def is_leaf(self, v: int) -> bool:
        return self.feature[v] < 0

    def children(self, v: int) -> tuple[int, int] | None:
        if self.feature[v] < 0:
            return None
        return int(self.left[v]), int(self.left[v]) + 1

    @property
    def internal_nodes(self) -> list[int]:
        return [v for v in range(self.n_nodes) if self.feature[v] >= 0]

    @property
    def leaves(self) -> list[int]:
        return [v for v in range(self.n_nodes) if self.feature[v] < 0]

    def parents(self) -> np.ndarray:
        par = np.full(self.n_nodes, -1, dtype=np.int64)
        for v in self.internal_nodes:
            a, b = self.children(v)
            par[a] = par[b] = v
        return par

    def heap_positions(self) -> np.ndarray:
        """Position of each node in a complete binary tree (root 0, children 2q+1, 2q+2)."""
        pos = np.zeros(self.n_nodes, dtype=np.int64)
        for v in range(self.n_nodes):  # parents precede children in BFS order
            if self.feature[v] >= 0:
                a, b = self.children(v)
                pos[a] = 2 * pos[v] + 1
                pos[b] = 2 * pos[v] + 2
        return pos

    def leaf_order(self) -> list[int]:
        """Leaves from left to right."""
        out, stack = [], [0]
        while stack:
            v = stack.pop()
            if self.feature[v] < 0:
                out.append(v)
            else:
                a, b = self.children(v)
                stack.extend((b, a))
        return out

    def route(self, X: np.ndarray, rows: np.ndarray) -> list[np.ndarray]:
        """Rows of ``X`` reaching each root node."""
        rows = np.asarray(rows, dtype=np.int64)
        out = [np.empty(0, dtype=np.int64)] * self.n_nodes
        out[0] = rows
        for v in range(self.n_nodes):
            if self.feature[v] >= 0:
                a, b = self.children(v)
                r = out[v]
                go_left = X[r, self.feature[v]] <= self.threshold[v]
                out[a] = r[go_left]
                out[b] = r[~go_left]
        return out

    def with_members(self, X: np.ndarray, sample: np.ndarray) -> "TreeRoot":
        return TreeRoot(
            self.feature, self.threshold, self.left, self.depth, self.covariate_subset, self.max_depth,
            tuple(np.sort(m) for m in self.route(X, sample)),
        )


@dataclass(frozen=True, eq=False)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    depth: np.ndarray
    value: np.ndarray  # in-bag class counts per node, or node mean in column 0
    node_size: np.ndarray  # in-bag observations per node
    n_root: int
    inbag: np.ndarray  # sorted
    oob: np.ndarray  # sorted
    covariate_subset: np.ndarray
    max_depth_root: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def root(self) -> TreeRoot:
        """The tree root, with body subtrees cut off at the root leaves."""
        r = self.n_root
        feat = self.feature[:r].copy()
        left = self.left[:r].copy()
        thr = self.threshold[:r].copy()
        body = (feat >= 0) & (left >= r)
        feat[body] = -1
        left[body] = -1
        thr[body] = 0.0
        return TreeRoot(feat, thr, left, self.depth[:r].copy(),
                        self.covariate_subset, self.max_depth_root)

    def internal_root_nodes(self) -> np.ndarray:
        r = self.n_root
        f, lft = self.feature[:r], self.left[:r]
        return np.flatnonzero((f >= 0) & (lft < r))

    def terminal_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Terminal node id for each row of ``X`` (already order-encoded)."""
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            v = node[idx]
            go_left = X[idx, self.feature[v]] <= self.threshold[v]
            node[idx] = np.where(go_left, self.left[v], self.left[v] + 1)
            active = self.feature[node] >= 0
        return node

    def used_covariates(self, p: int) -> np.ndarray:
        used = np.zeros(p, dtype=bool)
        used[self.feature[self.feature >= 0]] = True
        return used

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "depth": self.depth.tolist(),
            "value": self.value.tolist(),
            "node_size": self.node_size.tolist(),
            "n_root": int(self.n_root),
            "inbag": self.inbag.tolist(),
            "covariate_subset": self.covariate_subset.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, n: int, max_depth_root: int) -> "Tree":
        inbag = np.asarray(d["inbag"], dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[inbag] = False
        value = np.asarray(d["value"], dtype=np.float64)
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            depth=np.asarray(d["depth"], dtype=np.int64),
            value=value.reshape(len(d["feature"]), -1),
            node_size=np.asarray(d["node_size"], dtype=np.int64),
            n_root=int(d["n_root"]),
            inbag=inbag,
            oob=np.flatnonzero(mask),
            covariate_subset=np.asarray(d["covariate_subset"], dtype=np.int64),
            max_depth_root=max_depth_root,
        )
