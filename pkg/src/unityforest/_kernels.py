"""Compiled inner loops.

Conventions shared by every kernel:

* ``Xt`` is the transposed covariate matrix, shape ``(p, n)``.
* ``yc`` holds 0-based class codes, ``yr`` real outcomes; ``K`` is the class
  count, 0 meaning regression (then ``yc`` is ignored, and vice versa).
* Trees are flat arrays; ``feat[v] == -1`` marks a terminal node and the right
  child of ``v`` is always ``left[v] + 1``.
* An observation goes left when ``x <= threshold``.
"""

import numpy as np
from numba import njit

MAX_ROOT_RETRIES = 10


@njit(nogil=True, cache=True)
def weighted_impurity(yc, yr, K, idx, start, end, cbuf):
    """Node size times impurity (Gini or population variance) of idx[start:end]."""
    n = end - start
    if n <= 0:
        return 0.0
    if K > 0:
        for k in range(K):
            cbuf[k] = 0.0
        for t in range(start, end):
            cbuf[yc[idx[t]]] += 1.0
        s = 0.0
        for k in range(K):
            s += cbuf[k] * cbuf[k]
        return n - s / n
    mean = 0.0
    for t in range(start, end):
        mean += yr[idx[t]]
    mean /= n
    s = 0.0
    for t in range(start, end):
        d = yr[idx[t]] - mean
        s += d * d
    return s


@njit(nogil=True, cache=True)
def is_pure(yc, yr, K, idx, start, end):
    if K > 0:
        first = yc[idx[start]]
        for t in range(start + 1, end):
            if yc[idx[t]] != first:
                return False
        return True
    first = yr[idx[start]]
    for t in range(start + 1, end):
        if yr[idx[t]] != first:
            return False
    return True


@njit(nogil=True, cache=True)
def _partition(Xt, j, c, idx, start, end, ibuf):
    """Stable in-place partition of idx[start:end] by Xt[j, i] <= c; returns split point."""
    nl = 0
    for t in range(start, end):
        i = idx[t]
        go = Xt[j, i] <= c
        idx[start + nl] = i
        ibuf[t - start - nl] = i
        nl += go
    nr = end - start - nl
    for t in range(nr):
        idx[start + nl + t] = ibuf[t]
    return start + nl


@njit(nogil=True, cache=True)
def _midpoint(a, b):
    c = 0.5 * (a + b)
    if c >= b or c < a:
        c = a
    return c


@njit(nogil=True, cache=True)
def rank_tables(Xt, subset, sample):
    """Dense ranks of the tree sample on each subset covariate.

    Returns ``(rank, uvals)``: ``rank[q, i]`` is the 0-based dense rank of
    observation ``i`` (meaningful for sampled ``i`` only) on covariate
    ``subset[q]``, and ``uvals[q, r]`` the value holding rank ``r``.
    """
    nq = subset.shape[0]
    m = sample.shape[0]
    n = Xt.shape[1]
    rank = np.zeros((nq, n), np.int64)
    uvals = np.zeros((nq, m), np.float64)
    vals = np.empty(m, np.float64)
    for q in range(nq):
        j = subset[q]
        for t in range(m):
            vals[t] = Xt[j, sample[t]]
        order = np.argsort(vals)
        r = -1
        prev = 0.0
        for t in range(m):
            v = vals[order[t]]
            if r < 0 or v > prev:
                r += 1
                uvals[q, r] = v
                prev = v
            rank[q, sample[order[t]]] = r
    return rank, uvals


@njit(nogil=True, cache=True)
def _draw_split(rank, uvals, q, idx, s, e, mark, blk, ibuf, rng):
    """Split node idx[s:e] at the midpoint of a gap drawn uniformly among the
    gaps between its consecutive distinct values on subset covariate q.

    Returns (threshold, left count), or (0.0, -1) with idx untouched when the
    node holds a single distinct value. ``mark`` and ``blk`` are zeroed
    scratch arrays (one flag per rank, one counter per 64 ranks) and are
    returned zeroed.
    """
    d = 0
    for t in range(s, e):
        r = rank[q, idx[t]]
        if mark[r] == 0:
            mark[r] = 1
            blk[r >> 6] += 1
            d += 1
    c = 0.0
    nl = -1
    if d > 1:
        k = rng.integers(0, d - 1)
        # locate the k-th and (k+1)-th smallest distinct ranks present
        b = 0
        while blk[b] <= k:
            k -= blk[b]
            b += 1
        r = b << 6
        while True:
            if mark[r]:
                if k == 0:
                    break
                k -= 1
            r += 1
        r2 = r + 1
        while mark[r2] == 0:
            if (r2 & 63) == 0 and blk[r2 >> 6] == 0:
                r2 += 64
            else:
                r2 += 1
        c = _midpoint(uvals[q, r], uvals[q, r2])
        nl = 0
        for t in range(s, e):
            i = idx[t]
            go = rank[q, i] <= r
            idx[s + nl] = i
            ibuf[t - s - nl] = i
            nl += go
        for t in range(e - s - nl):
            idx[s + nl + t] = ibuf[t]
    for t in range(s, e):
        r = rank[q, idx[t]]
        mark[r] = 0
        blk[r >> 6] = 0
    return c, nl


@njit(nogil=True, cache=True)
def grow_random_root(
    Xt, yc, yr, K, idx, subset, rank, uvals, max_depth, min_child, rng,
    feat, thr, left, depth, nstart, nend, mark, blk, ibuf, cbuf,
):
    """Grow one candidate root breadth-first with random covariates and midpoints.

    ``idx`` (the tree sample) is permuted in place so that each node owns
    ``idx[nstart[v]:nend[v]]``. ``rank``/``uvals`` come from ``rank_tables``.
    Returns ``(n_nodes, sum of leaf weighted impurities)``.
    """
    m = idx.shape[0]
    n_sub = subset.shape[0]
    feat[0] = -1
    thr[0] = 0.0
    left[0] = -1
    depth[0] = 0
    nstart[0] = 0
    nend[0] = m
    n_nodes = 1
    leaf_w = 0.0
    q = 0
    while q < n_nodes:
        s = nstart[q]
        e = nend[q]
        size = e - s
        done = False
        if depth[q] < max_depth and size >= 2 * min_child and not is_pure(yc, yr, K, idx, s, e):
            for _ in range(MAX_ROOT_RETRIES):
                jq = rng.integers(0, n_sub)
                c, nl = _draw_split(rank, uvals, jq, idx, s, e, mark, blk, ibuf, rng)
                if nl < min_child or size - nl < min_child:
                    continue
                feat[q] = subset[jq]
                thr[q] = c
                left[q] = n_nodes
                for child in range(2):
                    u = n_nodes + child
                    feat[u] = -1
                    thr[u] = 0.0
                    left[u] = -1
                    depth[u] = depth[q] + 1
                    nstart[u] = s if child == 0 else s + nl
                    nend[u] = s + nl if child == 0 else e
                n_nodes += 2
                done = True
                break
        if not done:
            leaf_w += weighted_impurity(yc, yr, K, idx, s, e, cbuf)
        q += 1
    return n_nodes, leaf_w


@njit(nogil=True, cache=True)
def best_random_root(Xt, yc, yr, K, sample, subset, max_depth, min_child, n_cand, rng):
    """Generate ``n_cand`` candidate roots and keep the one with the largest
    partition criterion (first one wins ties).

    Returns node arrays of the winner, its per-node ranges into the returned
    index permutation, and its criterion value.
    """
    m = sample.shape[0]
    cap = 2 ** (max_depth + 1) - 1
    feat = np.empty(cap, np.int64)
    thr = np.empty(cap, np.float64)
    left = np.empty(cap, np.int64)
    depth = np.empty(cap, np.int64)
    nstart = np.empty(cap, np.int64)
    nend = np.empty(cap, np.int64)
    b_feat = np.empty(cap, np.int64)
    b_thr = np.empty(cap, np.float64)
    b_left = np.empty(cap, np.int64)
    b_depth = np.empty(cap, np.int64)
    b_start = np.empty(cap, np.int64)
    b_end = np.empty(cap, np.int64)
    idx = sample.copy()
    b_idx = sample.copy()
    mark = np.zeros(m + 64, np.uint8)
    blk = np.zeros(m // 64 + 2, np.int64)
    ibuf = np.empty(m, np.int64)
    cbuf = np.empty(max(K, 1), np.float64)
    total_w = weighted_impurity(yc, yr, K, sample, 0, m, cbuf)
    rank, uvals = rank_tables(Xt, subset, sample)
    best = -np.inf
    b_n = 0
    for _ in range(n_cand):
        idx[:] = sample
        nn, lw = grow_random_root(
            Xt, yc, yr, K, idx, subset, rank, uvals, max_depth, min_child, rng,
            feat, thr, left, depth, nstart, nend, mark, blk, ibuf, cbuf,
        )
        score = (total_w - lw) / m
        if score > best:
            best = score
            b_n = nn
            b_feat[:nn] = feat[:nn]
            b_thr[:nn] = thr[:nn]
            b_left[:nn] = left[:nn]
            b_depth[:nn] = depth[:nn]
            b_start[:nn] = nstart[:nn]
            b_end[:nn] = nend[:nn]
            b_idx[:] = idx
    return (
        b_feat[:b_n].copy(), b_thr[:b_n].copy(), b_left[:b_n].copy(), b_depth[:b_n].copy(),
        b_start[:b_n].copy(), b_end[:b_n].copy(), b_idx, best,
    )


@njit(nogil=True, cache=True)
def grow_body(
    Xt, yc, yr, K, idx, r_feat, r_thr, r_left, r_depth, r_start, r_end,
    mtry, min_node_size, expand, rng,
):
    """Copy a root into fresh tree arrays and grow CART subtrees below its leaves.

    ``idx`` must be the index permutation matching ``r_start``/``r_end``; it is
    permuted further in place. Returns ``(feat, thr, left, depth, nstart, nend)``.
    """
    p = Xt.shape[0]
    m = idx.shape[0]
    n_root = r_feat.shape[0]
    cap = 2 * m + n_root + 1
    feat = np.full(cap, -1, np.int64)
    thr = np.zeros(cap, np.float64)
    left = np.full(cap, -1, np.int64)
    depth = np.zeros(cap, np.int64)
    nstart = np.zeros(cap, np.int64)
    nend = np.zeros(cap, np.int64)
    feat[:n_root] = r_feat
    thr[:n_root] = r_thr
    left[:n_root] = r_left
    depth[:n_root] = r_depth
    nstart[:n_root] = r_start
    nend[:n_root] = r_end
    n_nodes = n_root
    if not expand:
        return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], depth[:n_nodes], nstart[:n_nodes], nend[:n_nodes]

    queue = np.empty(cap, np.int64)
    qn = 0
    for v in range(n_root):
        if r_feat[v] < 0:
            queue[qn] = v
            qn += 1
    perm = np.arange(p)
    chosen = np.empty(mtry, np.int64)
    vals = np.empty(m, np.float64)
    ibuf = np.empty(m, np.int64)
    cbuf = np.empty(max(K, 1), np.float64)
    lc = np.empty(max(K, 1), np.float64)
    tc = np.empty(max(K, 1), np.float64)
    qi = 0
    while qi < qn:
        v = queue[qi]
        qi += 1
        s = nstart[v]
        e = nend[v]
        size = e - s
        if size < min_node_size or is_pure(yc, yr, K, idx, s, e):
            continue
        parent_w = weighted_impurity(yc, yr, K, idx, s, e, cbuf)
        for t in range(mtry):
            r = rng.integers(t, p)
            tmp = perm[t]
            perm[t] = perm[r]
            perm[r] = tmp
        chosen[:] = np.sort(perm[:mtry])
        best_w = parent_w - 1e-12 * size
        best_j = -1
        best_c = 0.0
        if K == 0:
            node_mean = 0.0
            for t in range(s, e):
                node_mean += yr[idx[t]]
            node_mean /= size
        for jj in range(mtry):
            j = chosen[jj]
            for t in range(size):
                vals[t] = Xt[j, idx[s + t]]
            order = np.argsort(vals[:size], kind="mergesort")
            if vals[order[0]] == vals[order[size - 1]]:
                continue
            if K > 0:
                for k in range(K):
                    lc[k] = 0.0
                    tc[k] = 0.0
                for t in range(size):
                    tc[yc[idx[s + t]]] += 1.0
                for t in range(size - 1):
                    lc[yc[idx[s + order[t]]]] += 1.0
                    if vals[order[t]] < vals[order[t + 1]]:
                        nl = t + 1.0
                        nr = size - nl
                        sl = 0.0
                        sr = 0.0
                        for k in range(K):
                            sl += lc[k] * lc[k]
                            rk = tc[k] - lc[k]
                            sr += rk * rk
                        w = (nl - sl / nl) + (nr - sr / nr)
                        if w < best_w:
                            best_w = w
                            best_j = j
                            best_c = _midpoint(vals[order[t]], vals[order[t + 1]])
            else:
                tot = 0.0
                totsq = 0.0
                for t in range(size):
                    d = yr[idx[s + t]] - node_mean
                    tot += d
                    totsq += d * d
                ls = 0.0
                lsq = 0.0
                for t in range(size - 1):
                    d = yr[idx[s + order[t]]] - node_mean
                    ls += d
                    lsq += d * d
                    if vals[order[t]] < vals[order[t + 1]]:
                        nl = t + 1.0
                        nr = size - nl
                        rs = tot - ls
                        rsq = totsq - lsq
                        w = (lsq - ls * ls / nl) + (rsq - rs * rs / nr)
                        if w < best_w:
                            best_w = w
                            best_j = j
                            best_c = _midpoint(vals[order[t]], vals[order[t + 1]])
        if best_j < 0:
            continue
        mid = _partition(Xt, best_j, best_c, idx, s, e, ibuf)
        feat[v] = best_j
        thr[v] = best_c
        left[v] = n_nodes
        for child in range(2):
            u = n_nodes + child
            depth[u] = depth[v] + 1
            nstart[u] = s if child == 0 else mid
            nend[u] = mid if child == 0 else e
            queue[qn] = u
            qn += 1
        n_nodes += 2
    return feat[:n_nodes], thr[:n_nodes], left[:n_nodes], depth[:n_nodes], nstart[:n_nodes], nend[:n_nodes]


@njit(nogil=True, cache=True)
def node_values(yc, yr, K, idx, nstart, nend):
    """In-bag class counts (or mean in column 0) and size of every node."""
    nn = nstart.shape[0]
    V = K if K > 0 else 1
    out = np.zeros((nn, V), np.float64)
    size = np.zeros(nn, np.int64)
    for v in range(nn):
        size[v] = nend[v] - nstart[v]
        if K > 0:
            for t in range(nstart[v], nend[v]):
                out[v, yc[idx[t]]] += 1.0
        else:
            s = 0.0
            for t in range(nstart[v], nend[v]):
                s += yr[idx[t]]
            if size[v] > 0:
                out[v, 0] = s / size[v]
    return out, size


@njit(nogil=True, cache=True)
def _leaf(feat, thr, left, base, Xt, i):
    v = 0
    while feat[base + v] >= 0:
        if Xt[feat[base + v], i] <= thr[base + v]:
            v = left[base + v]
        else:
            v = left[base + v] + 1
    return v


@njit(nogil=True, cache=True)
def forest_predict(offsets, feat, thr, left, value, K, Xt, rows, inbag_off, inbag, oob_only):
    """Average leaf distributions (or means) over trees for each row.

    With ``oob_only`` a tree only contributes to rows outside its in-bag set;
    the second return value counts contributing trees per row.
    """
    T = offsets.shape[0] - 1
    n = Xt.shape[1]
    V = K if K > 0 else 1
    nr = rows.shape[0]
    out = np.zeros((nr, V), np.float64)
    cnt = np.zeros(nr, np.int64)
    mask = np.zeros(n, np.bool_)
    for t in range(T):
        base = offsets[t]
        if oob_only:
            for q in range(inbag_off[t], inbag_off[t + 1]):
                mask[inbag[q]] = True
        for r in range(nr):
            i = rows[r]
            if oob_only and mask[i]:
                continue
            v = base + _leaf(feat, thr, left, base, Xt, i)
            if K > 0:
                tot = 0.0
                for k in range(K):
                    tot += value[v, k]
                for k in range(K):
                    out[r, k] += value[v, k] / tot
            else:
                out[r, 0] += value[v, 0]
            cnt[r] += 1
        if oob_only:
            for q in range(inbag_off[t], inbag_off[t + 1]):
                mask[inbag[q]] = False
    for r in range(nr):
        if cnt[r] > 0:
            for k in range(V):
                out[r, k] /= cnt[r]
    return out, cnt


@njit(nogil=True, cache=True)
def forest_votes(offsets, feat, thr, left, value, K, Xt, rows):
    """Per-row counts of per-tree majority labels (ties to the smallest class)."""
    T = offsets.shape[0] - 1
    nr = rows.shape[0]
    votes = np.zeros((nr, K), np.int64)
    for t in range(T):
        base = offsets[t]
        for r in range(nr):
            v = base + _leaf(feat, thr, left, base, Xt, rows[r])
            best = 0
            for k in range(1, K):
                if value[v, k] > value[v, best]:
                    best = k
            votes[r, best] += 1
    return votes


@njit(nogil=True, cache=True)
def root_split_stats(feat, thr, left, n_root, Xt, yc, yr, K, rows):
    """Child statistics at every internal root node for the given rows.

    Classification: class counts. Regression: (count, sum, sum of squares).
    """
    V = K if K > 0 else 3
    L = np.zeros((n_root, V), np.float64)
    R = np.zeros((n_root, V), np.float64)
    for q in range(rows.shape[0]):
        i = rows[q]
        v = 0
        while v < n_root and feat[v] >= 0 and left[v] < n_root:
            go_left = Xt[feat[v], i] <= thr[v]
            if K > 0:
                if go_left:
                    L[v, yc[i]] += 1.0
                else:
                    R[v, yc[i]] += 1.0
            else:
                y = yr[i]
                if go_left:
                    L[v, 0] += 1.0
                    L[v, 1] += y
                    L[v, 2] += y * y
                else:
                    R[v, 0] += 1.0
                    R[v, 1] += y
                    R[v, 2] += y * y
            v = left[v] if go_left else left[v] + 1
    return L, R


@njit(nogil=True, cache=True)
def rows_at_node(feat, thr, left, target, Xt, rows):
    """Subset of ``rows`` routed through node ``target``."""
    out = np.empty(rows.shape[0], np.int64)
    c = 0
    for q in range(rows.shape[0]):
        i = rows[q]
        v = 0
        while v != target and feat[v] >= 0:
            v = left[v] if Xt[feat[v], i] <= thr[v] else left[v] + 1
        if v == target:
            out[c] = i
            c += 1
    return out[:c]


@njit(nogil=True, cache=True)
def _tree_label(feat, thr, left, value, Xt, i, j, xj):
    v = 0
    while feat[v] >= 0:
        x = xj if feat[v] == j else Xt[feat[v], i]
        v = left[v] if x <= thr[v] else left[v] + 1
    return v


@njit(nogil=True, cache=True)
def tree_permutation_errors(feat, thr, left, value, K, Xt, yc, yr, oob, used, rng):
    """OOB error of one tree, and its increase after permuting each used covariate.

    Misclassification rate for classification, mean squared error for regression.
    Covariates the tree never splits on get exactly 0 and consume no randomness.
    """
    p = Xt.shape[0]
    no = oob.shape[0]
    inc = np.zeros(p, np.float64)
    if no == 0:
        return 0.0, inc
    pred = np.empty(no, np.float64)
    for r in range(no):
        v = _tree_label(feat, thr, left, value, Xt, oob[r], -1, 0.0)
        pred[r] = _node_prediction(value, K, v)
    base = _error(pred, oob, yc, yr, K)
    for j in range(p):
        if not used[j]:
            continue
        perm = rng.permutation(no)
        for r in range(no):
            v = _tree_label(feat, thr, left, value, Xt, oob[r], j, Xt[j, oob[perm[r]]])
            pred[r] = _node_prediction(value, K, v)
        inc[j] = _error(pred, oob, yc, yr, K) - base
    return base, inc


@njit(nogil=True, cache=True)
def _node_prediction(value, K, v):
    if K == 0:
        return value[v, 0]
    best = 0
    for k in range(1, K):
        if value[v, k] > value[v, best]:
            best = k
    return float(best)


@njit(nogil=True, cache=True)
def _error(pred, rows, yc, yr, K):
    s = 0.0
    for r in range(rows.shape[0]):
        if K > 0:
            if int(pred[r]) != yc[rows[r]]:
                s += 1.0
        else:
            d = pred[r] - yr[rows[r]]
            s += d * d
    return s / rows.shape[0]
