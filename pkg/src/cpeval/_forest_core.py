"""Compiled CART / random forest kernels.

The per-tree random stream (bootstrap draws, then per-node feature subsets)
comes from a splitmix64 generator seeded per tree, so training is a pure
function of the per-tree seeds regardless of scheduling.
"""

import numba as nb
import numpy as np

_C1 = np.uint64(0x9E3779B97F4A7C15)
_C2 = np.uint64(0xBF58476D1CE4E5B9)
_C3 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@nb.njit(cache=True, inline="always")
def _splitmix64(state):
    state = state + _C1
    z = state
    z = (z ^ (z >> _S30)) * _C2
    z = (z ^ (z >> _S27)) * _C3
    z = z ^ (z >> _S31)
    return state, z


@nb.njit(cache=True)
def build_tree(X, y, sample_idx, max_depth, min_leaf, k_feat,
               state, feature, threshold, left, right, value):
    """Grow one CART tree over X[sample_idx] in preallocated node arrays.

    Splits minimize the size-weighted Gini impurity of the children over
    midpoints of sorted distinct values of k_feat features sampled without
    replacement per node. Leaves store the positive-class proportion.
    Returns the number of nodes used.
    """
    m0 = sample_idx.shape[0]
    d = X.shape[1]
    idx = sample_idx.copy()
    buf = np.empty(m0, np.int64)
    vals = np.empty(m0, np.float64)
    feat_pool = np.arange(d)

    # stack of (node, start, end, depth)
    cap = feature.shape[0]
    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    sp = 0
    st_node[0], st_start[0], st_end[0], st_depth[0] = 0, 0, m0, 0
    sp = 1
    node_count = 1

    while sp > 0:
        sp -= 1
        node = st_node[sp]
        start = st_start[sp]
        end = st_end[sp]
        depth = st_depth[sp]
        m = end - start
        pos = 0
        for j in range(start, end):
            pos += y[idx[j]]

        if depth >= max_depth or pos == 0 or pos == m or m < 2 * min_leaf:
            feature[node] = -1
            value[node] = pos / m
            continue

        # partial Fisher-Yates: first k_feat entries become the sampled features
        for j in range(k_feat):
            state, z = _splitmix64(state)
            r = j + np.int64(z % np.uint64(d - j))
            tmp = feat_pool[j]
            feat_pool[j] = feat_pool[r]
            feat_pool[r] = tmp

        best_f = -1
        best_score = np.inf
        best_thr = 0.0
        for fj in range(k_feat):
            f = feat_pool[fj]
            for j in range(m):
                vals[j] = X[idx[start + j], f]
            order = np.argsort(vals[:m])
            pos_l = 0
            for s in range(1, m):
                pos_l += y[idx[start + order[s - 1]]]
                v_prev = vals[order[s - 1]]
                v_cur = vals[order[s]]
                if v_cur <= v_prev:
                    continue
                if s < min_leaf or m - s < min_leaf:
                    continue
                m_l = s
                m_r = m - s
                pos_r = pos - pos_l
                neg_l = m_l - pos_l
                neg_r = m_r - pos_r
                score = (m_l - (pos_l * pos_l + neg_l * neg_l) / m_l) + (
                    m_r - (pos_r * pos_r + neg_r * neg_r) / m_r
                )
                if score < best_score:
                    best_score = score
                    best_f = f
                    best_thr = 0.5 * (v_prev + v_cur)

        if best_f < 0:  # sampled features constant on this node
            feature[node] = -1
            value[node] = pos / m
            continue

        nl = 0
        for j in range(start, end):
            if X[idx[j], best_f] <= best_thr:
                buf[nl] = idx[j]
                nl += 1
        nr = nl
        for j in range(start, end):
            if X[idx[j], best_f] > best_thr:
                buf[nr] = idx[j]
                nr += 1
        for j in range(m):
            idx[start + j] = buf[j]

        lid = node_count
        rid = node_count + 1
        node_count += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lid
        right[node] = rid
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = lid, start, start + nl, depth + 1
        sp += 1
        st_node[sp], st_start[sp], st_end[sp], st_depth[sp] = rid, start + nl, end, depth + 1
        sp += 1

    return node_count


@nb.njit(cache=True)
def train_forest(X, y, n_trees, max_depth, min_leaf, k_feat, seeds):
    """Train n_trees CART trees on bootstrap samples (with replacement,
    size n) drawn from per-tree seeds. Returns packed node arrays."""
    n = X.shape[0]
    cap = 2 * n  # leaves <= n with min_leaf >= 1, so nodes <= 2n - 1
    feature = np.full((n_trees, cap), -1, np.int64)
    threshold = np.zeros((n_trees, cap), np.float64)
    left = np.full((n_trees, cap), -1, np.int64)
    right = np.full((n_trees, cap), -1, np.int64)
    value = np.zeros((n_trees, cap), np.float64)
    counts = np.zeros(n_trees, np.int64)
    boot = np.empty(n, np.int64)
    for t in range(n_trees):
        state = seeds[t]
        for i in range(n):
            state, z = _splitmix64(state)
            boot[i] = np.int64(z % np.uint64(n))
        counts[t] = build_tree(
            X, y, boot, max_depth, min_leaf, k_feat, state,
            feature[t], threshold[t], left[t], right[t], value[t],
        )
    return feature, threshold, left, right, value, counts


@nb.njit(cache=True)
def forest_proba(feature, threshold, left, right, value, X):
    """Mean over trees of the landed leaf's positive-class proportion."""
    n_trees = feature.shape[0]
    nq = X.shape[0]
    out = np.empty(nq, np.float64)
    for q in range(nq):
        acc = 0.0
        for t in range(n_trees):
            node = 0
            while feature[t, node] >= 0:
                if X[q, feature[t, node]] <= threshold[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            acc += value[t, node]
        out[q] = acc / n_trees
    return out


@nb.njit(cache=True)
def tree_depths(feature, left, right, counts):
    """Maximum leaf depth of each tree (root = depth 0)."""
    n_trees = feature.shape[0]
    out = np.zeros(n_trees, np.int64)
    for t in range(n_trees):
        depth = np.zeros(counts[t], np.int64)
        for node in range(counts[t]):
            if feature[t, node] >= 0:
                depth[left[t, node]] = depth[node] + 1
                depth[right[t, node]] = depth[node] + 1
            elif depth[node] > out[t]:
                out[t] = depth[node]
    return out
