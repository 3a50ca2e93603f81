"""Compiled CART kernel shared by every tree-based learner.

Trees are grown depth first over a presorted index matrix: ``order[f]``
lists the active samples sorted by feature ``f``, and each node owns the
same contiguous slice in every row. Splitting a node stably partitions that
slice, so no per-node sorting is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GINI, ENTROPY, MSE = 0, 1, 2
CRITERIA = {"gini": GINI, "entropy": ENTROPY, "mse": MSE}
UNLIMITED_DEPTH = 1 << 30


@njit(cache=True, nogil=True)
def _xlogx(a):
    return a * np.log(a) if a > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _score(criterion, wl, sl, wr, sr):
    # larger is better; equals minus the weighted child impurity up to a
    # node-constant term
    if criterion == MSE:
        return sl * sl / wl + sr * sr / wr
    if criterion == GINI:
        ol = wl - sl
        orr = wr - sr
        return (sl * sl + ol * ol) / wl + (sr * sr + orr * orr) / wr
    ol = wl - sl
    orr = wr - sr
    return _xlogx(sl) + _xlogx(ol) - _xlogx(wl) + _xlogx(sr) + _xlogx(orr) - _xlogx(wr)


@njit(cache=True, nogil=True)
def _grow(X, order, w, t, criterion, max_depth, min_leaf, mtry, seed):
    n, p = X.shape
    m = 0
    for i in range(n):
        if w[i] > 0.0:
            m += 1
    ordm = np.empty((p, m), dtype=np.int64)
    for f in range(p):
        k = 0
        for j in range(n):
            i = order[f, j]
            if w[i] > 0.0:
                ordm[f, k] = i
                k += 1

    cap = max(2 * m - 1, 1)
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    weight = np.zeros(cap)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    goes_left = np.zeros(n, dtype=np.bool_)
    buf = np.empty(max(m, 1), dtype=np.int64)
    pool = np.arange(p)
    cand = np.empty(p, dtype=np.int64)
    np.random.seed(seed)

    n_nodes = 1
    sp = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = st_node[sp]
        s = st_start[sp]
        e = st_end[sp]
        depth = st_depth[sp]

        W = 0.0
        S = 0.0
        tmin = np.inf
        tmax = -np.inf
        for j in range(s, e):
            i = ordm[0, j]
            W += w[i]
            S += w[i] * t[i]
            if t[i] < tmin:
                tmin = t[i]
            if t[i] > tmax:
                tmax = t[i]
        weight[node] = W
        if criterion == MSE:
            value[node] = S / W if W > 0.0 else 0.0
        else:
            value[node] = 1.0 if S > W - S else 0.0

        cnt = e - s
        if tmin == tmax or depth >= max_depth or cnt < 2 * min_leaf:
            continue

        if mtry < p:
            for k in range(mtry):
                r = k + np.random.randint(0, p - k)
                tmp = pool[k]
                pool[k] = pool[r]
                pool[r] = tmp
            for k in range(mtry):
                cand[k] = pool[k]
            cand[:mtry].sort()
            n_cand = mtry
        else:
            for k in range(p):
                cand[k] = k
            n_cand = p

        best_score = -np.inf
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        for c in range(n_cand):
            f = cand[c]
            wl = 0.0
            sl = 0.0
            for j in range(s, e - 1):
                i = ordm[f, j]
                wl += w[i]
                sl += w[i] * t[i]
                nl = j - s + 1
                if nl < min_leaf:
                    continue
                if cnt - nl < min_leaf:
                    break
                a = X[i, f]
                b = X[ordm[f, j + 1], f]
                if not b > a:
                    continue
                wr = W - wl
                if wr <= 0.0:
                    continue
                sc = _score(criterion, wl, sl, wr, S - sl)
                if sc > best_score:
                    best_score = sc
                    best_f = f
                    best_pos = j
                    mid = a + (b - a) / 2.0
                    if mid >= b:
                        mid = a
                    best_thr = mid
        if best_f < 0:
            continue

        for j in range(s, e):
            goes_left[ordm[best_f, j]] = j <= best_pos
        for f in range(p):
            a = 0
            b = 0
            nl = best_pos - s + 1
            for j in range(s, e):
                i = ordm[f, j]
                if goes_left[i]:
                    buf[a] = i
                    a += 1
                else:
                    buf[nl + b] = i
                    b += 1
            for j in range(cnt):
                ordm[f, s + j] = buf[j]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lc
        right[node] = rc
        mid_idx = best_pos + 1
        st_node[sp] = rc
        st_start[sp] = mid_idx
        st_end[sp] = e
        st_depth[sp] = depth + 1
        sp += 1
        st_node[sp] = lc
        st_start[sp] = s
        st_end[sp] = mid_idx
        st_depth[sp] = depth + 1
        sp += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        weight[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def _apply(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass
class Tree:
    """Flat binary tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    weight: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for node in range(self.n_nodes):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(X, self.feature, self.threshold, self.left, self.right)

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self, node: int = 0) -> dict:
        if self.feature[node] < 0:
            return {"value": repr(float(self.value[node])), "weight": repr(float(self.weight[node]))}
        return {
            "feature": int(self.feature[node]),
            "threshold": repr(float(self.threshold[node])),
            "weight": repr(float(self.weight[node])),
            "left": self.to_dict(int(self.left[node])),
            "right": self.to_dict(int(self.right[node])),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        feature, threshold, left, right, value, weight = [], [], [], [], [], []

        def visit(d):
            idx = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(float(d.get("value", "0.0")))
            weight.append(float(d["weight"]))
            if "feature" in d:
                feature[idx] = d["feature"]
                threshold[idx] = float(d["threshold"])
                left[idx] = visit(d["left"])
                right[idx] = visit(d["right"])
            return idx

        visit(doc)
        return cls(
            np.array(feature, dtype=np.int64),
            np.array(threshold),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value),
            np.array(weight),
        )


def gini_impurity(labels, weights=None) -> float:
    """Weighted Gini impurity of a node holding 0/1 ``labels``."""
    y = np.asarray(labels, dtype=np.float64)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        return 0.0
    p1 = float((w * y).sum() / total)
    return 1.0 - p1 * p1 - (1.0 - p1) ** 2


def presort(X: np.ndarray) -> np.ndarray:
    """Per-feature ascending sample order, shape ``(n_features, n_samples)``."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)


def grow_tree(
    X: np.ndarray,
    target: np.ndarray,
    sample_weight: np.ndarray | None = None,
    *,
    criterion: str = "gini",
    max_depth: int | None = None,
    min_leaf: int = 1,
    mtry: int | None = None,
    seed: int = 0,
    order: np.ndarray | None = None,
) -> Tree:
    """Grow one CART tree.

    ``target`` holds 0/1 labels for the classification criteria and real
    values for ``"mse"``. Samples with zero weight are ignored; ``min_leaf``
    counts samples, not weight. ``mtry`` features are drawn per node from a
    stream seeded by ``seed``; ``None`` evaluates all features.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, p = X.shape
    if n == 0 or p == 0:
        raise ValueError("cannot grow a tree on an empty dataset")
    w = np.ones(n) if sample_weight is None else np.ascontiguousarray(sample_weight, dtype=np.float64)
    if (w < 0).any() or not (w > 0).any():
        raise ValueError("sample weights must be non-negative and not all zero")
    if order is None:
        order = presort(X)
    if max_depth is None:
        max_depth = UNLIMITED_DEPTH
    mtry = p if mtry is None else min(int(mtry), p)
    arrays = _grow(
        X,
        order,
        w,
        np.ascontiguousarray(target, dtype=np.float64),
        CRITERIA[criterion],
        int(max_depth),
        int(min_leaf),
        int(mtry),
        int(seed) & 0x7FFFFFFF,
    )
    return Tree(*arrays)
