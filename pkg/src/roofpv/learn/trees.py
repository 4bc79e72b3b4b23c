"""Greedy regression-tree growing.

One grower serves both ensemble kinds. Split quality is variance reduction
for forest trees and the second-order gain
``0.5 * (S(G_L,H_L) + S(G_R,H_R) - S(G,H))`` with
``S(G,H) = soft(G, alpha)^2 / (H + lambda)`` for boosted trees, where
``soft`` is L1 soft-thresholding. A node splits only when the best gain is
positive and at least ``gamma``.

Candidate thresholds are frozen once per fit from the training matrix:
with ``max_bin == 0`` every midpoint between adjacent distinct feature
values is a candidate, otherwise the candidates are the midpoints sitting
above the ``max_bin``-quantile cut values. A quantile grid wide enough to
hold every distinct value degenerates to the full midpoint set, and in
that regime both modes run the same binned scan, so histogram training
with ``max_bin >= #distinct`` grows bit-identical trees to the exact scan
(a sorted scan handles exact mode on high-cardinality features, where a
per-node histogram would be wasteful).

Routing is always ``value < threshold`` to the left; values equal to the
threshold go right. Ties in gain resolve to the smallest threshold within
a feature and then to the smallest feature index.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .config import LearnerConfig


@dataclass
class TreeNode:
    """Binary-split node; ``feature < 0`` marks a leaf."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0
    gain: float = 0.0
    cover: float = 0.0  # hessian mass (row count when hessians are 1)

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def leaves(self):
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                yield node
            else:
                stack.append(node.right)
                stack.append(node.left)


# With at most this many bins per feature the exact candidate set also runs
# through the binned scan, making exact and histogram fits share one code
# path (bit-identical trees whenever the bin grid holds every distinct value).
_BINNED_SCAN_MAX_BINS = 256


class CandidateBins:
    """Per-feature candidate split thresholds, frozen from a training matrix."""

    def __init__(self, X: np.ndarray, max_bin: int):
        n, p = X.shape
        self.max_bin = max_bin
        self.edges: list[np.ndarray] = []
        for f in range(p):
            col = X[:, f]
            u = np.unique(col)
            if u.size < 2:
                edges = np.empty(0, dtype=np.float64)
            elif max_bin == 0 or u.size <= max_bin:
                edges = (u[:-1] + u[1:]) / 2.0
            else:
                cuts = np.unique(np.quantile(col, np.arange(1, max_bin) / max_bin, method="lower"))
                cuts = cuts[cuts < u[-1]]
                pos = np.searchsorted(u, cuts)
                edges = (u[pos] + u[pos + 1]) / 2.0
            self.edges.append(edges)
        self.n_edges = np.array([e.size for e in self.edges], dtype=np.int64)
        n_bins = int(self.n_edges.max()) + 1 if p else 1
        if max_bin > 0 or n_bins <= _BINNED_SCAN_MAX_BINS:
            codes = np.empty((n, p), dtype=np.int64)
            for f in range(p):
                codes[:, f] = np.searchsorted(self.edges[f], X[:, f], side="right")
            self.codes = codes
        else:
            self.codes = None


class VarianceCriterion:
    """Variance-reduction split score; leaves predict the target mean."""

    def gain(self, GL, HL, NL, GR, HR, NR):
        N = NL + NR
        G = GL + GR
        return (GL * GL / NL + GR * GR / NR - G * G / N) / N

    def leaf_value(self, G, H, N):
        return G / N


class SecondOrderCriterion:
    """Second-order (gradient/hessian) split score with L1/L2 shrinkage."""

    def __init__(self, reg_lambda: float, alpha: float):
        self.reg_lambda = reg_lambda
        self.alpha = alpha

    def _soft(self, G):
        return np.sign(G) * np.maximum(np.abs(G) - self.alpha, 0.0)

    def _score(self, G, H):
        T = self._soft(G)
        return T * T / (H + self.reg_lambda)

    def gain(self, GL, HL, NL, GR, HR, NR):
        return 0.5 * (self._score(GL, HL) + self._score(GR, HR) - self._score(GL + GR, HL + HR))

    def leaf_value(self, G, H, N):
        return -self._soft(G) / (H + self.reg_lambda)


@dataclass(frozen=True)
class _Split:
    gain: float
    feature: int
    threshold: float


class Grower:
    """Grows one tree over row indices of a fixed (X, g, h) triple."""

    def __init__(self, X, g, h, config: LearnerConfig, criterion, bins: CandidateBins, rng, feature_pool):
        self.X = X
        self.g = g
        self.h = h
        self.config = config
        self.criterion = criterion
        self.bins = bins
        self.rng = rng
        self.feature_pool = np.asarray(feature_pool, dtype=np.int64)
        self.max_depth = config.max_depth if config.max_depth > 0 else None

    def grow(self, rows: np.ndarray) -> TreeNode:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            raise ValueError("cannot grow a tree on zero rows")
        if self.config.growth == "leaf_wise":
            return self._grow_leaf_wise(rows)
        return self._grow_depth_wise(rows)

    # -- node construction ---------------------------------------------------

    def _new_node(self, rows) -> TreeNode:
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        value = float(self.criterion.leaf_value(G, H, float(rows.size)))
        return TreeNode(value=value, cover=H)

    def _split_features(self):
        pool = self.feature_pool
        if self.config.max_features != "sqrt" or pool.size <= 1:
            return pool
        k = max(1, math.ceil(math.sqrt(pool.size)))
        if k >= pool.size:
            return pool
        return np.sort(self.rng.choice(pool, size=k, replace=False))

    def _splittable(self, rows, depth) -> bool:
        if self.max_depth is not None and depth >= self.max_depth:
            return False
        return rows.size >= self.config.min_samples_split

    def _apply(self, node: TreeNode, rows, split: _Split):
        mask = self.X[rows, split.feature] < split.threshold
        rows_l = rows[mask]
        rows_r = rows[~mask]
        node.feature = split.feature
        node.threshold = split.threshold
        node.gain = split.gain
        node.left = self._new_node(rows_l)
        node.right = self._new_node(rows_r)
        return rows_l, rows_r

    def _grow_depth_wise(self, rows) -> TreeNode:
        root = self._new_node(rows)
        stack = [(root, rows, 0)]
        while stack:
            node, node_rows, depth = stack.pop()
            if not self._splittable(node_rows, depth):
                continue
            split = self.best_split(node_rows)
            if split is None:
                continue
            rows_l, rows_r = self._apply(node, node_rows, split)
            stack.append((node.right, rows_r, depth + 1))
            stack.append((node.left, rows_l, depth + 1))
        return root

    def _grow_leaf_wise(self, rows) -> TreeNode:
        root = self._new_node(rows)
        heap: list = []
        counter = itertools.count()

        def consider(node, node_rows, depth):
            if not self._splittable(node_rows, depth):
                return
            split = self.best_split(node_rows)
            if split is not None:
                heapq.heappush(heap, (-split.gain, next(counter), node, node_rows, split, depth))

        consider(root, rows, 0)
        n_leaves = 1
        while heap and n_leaves < self.config.num_leaves:
            _, _, node, node_rows, split, depth = heapq.heappop(heap)
            rows_l, rows_r = self._apply(node, node_rows, split)
            consider(node.left, rows_l, depth + 1)
            consider(node.right, rows_r, depth + 1)
            n_leaves += 1
        return root

    # -- candidate scanning ----------------------------------------------------

    def best_split(self, rows) -> _Split | None:
        feats = self._split_features()
        if feats.size == 0 or rows.size < 2 * self.config.min_samples_leaf:
            return None
        if self.bins.codes is None:
            found = self._scan_sorted(rows, feats)
        else:
            found = self._scan_binned(rows, feats)
        if found is None:
            return None
        gain, feature, threshold = found
        if gain <= 0.0 or gain < self.config.gamma:
            return None
        return _Split(gain, feature, threshold)

    def _scan_sorted(self, rows, feats):
        n = rows.size
        sub = self.X[np.ix_(rows, feats)]
        order = np.argsort(sub, axis=0, kind="stable")
        sv = np.take_along_axis(sub, order, axis=0)
        gs = self.g[rows][order]
        hs = self.h[rows][order]
        CG = np.cumsum(gs, axis=0)
        CH = np.cumsum(hs, axis=0)
        G = CG[-1]
        H = CH[-1]
        GL = CG[:-1]
        HL = CH[:-1]
        NL = np.arange(1, n, dtype=np.float64)[:, None]
        msl = self.config.min_samples_leaf
        ok = (sv[1:] > sv[:-1]) & (NL >= msl) & ((n - NL) >= msl)
        if not ok.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = self.criterion.gain(GL, HL, NL, G - GL, H - HL, n - NL)
        gains = np.where(ok, gains, -np.inf)
        col_best = np.argmax(gains, axis=0)  # first maximum: smallest threshold
        col_gain = gains[col_best, np.arange(feats.size)]
        j = int(np.argmax(col_gain))  # first maximum: smallest feature index
        best_gain = float(col_gain[j])
        if not np.isfinite(best_gain):
            return None
        feature = int(feats[j])
        v_low = sv[col_best[j], j]
        edges = self.bins.edges[feature]
        eidx = int(np.searchsorted(edges, v_low, side="right"))
        if eidx >= edges.size:
            return None
        return best_gain, feature, float(edges[eidx])

    def _scan_binned(self, rows, feats):
        n_edges = self.bins.n_edges[feats]
        width = int(n_edges.max()) + 1
        if width < 2:
            return None
        f = feats.size
        codes = self.bins.codes[np.ix_(rows, feats)]
        flat = codes + np.arange(f, dtype=np.int64) * width
        flat = flat.ravel()
        # row-major ravel interleaves features, so per-row weights repeat f times
        g_rows = np.repeat(self.g[rows], f)
        h_rows = np.repeat(self.h[rows], f)
        minlength = f * width
        gsum = np.bincount(flat, weights=g_rows, minlength=minlength).reshape(f, width)
        hsum = np.bincount(flat, weights=h_rows, minlength=minlength).reshape(f, width)
        csum = np.bincount(flat, minlength=minlength).reshape(f, width)
        GL = np.cumsum(gsum, axis=1)[:, :-1]
        HL = np.cumsum(hsum, axis=1)[:, :-1]
        NL = np.cumsum(csum, axis=1)[:, :-1].astype(np.float64)
        n = rows.size
        G = gsum.sum(axis=1, keepdims=True)
        H = hsum.sum(axis=1, keepdims=True)
        msl = self.config.min_samples_leaf
        edge_exists = np.arange(width - 1)[None, :] < n_edges[:, None]
        ok = edge_exists & (NL >= msl) & ((n - NL) >= msl)
        if not ok.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            gains = self.criterion.gain(GL, HL, NL, G - GL, H - HL, n - NL)
        gains = np.where(ok, gains, -np.inf)
        row_best = np.argmax(gains, axis=1)  # first maximum: smallest edge
        row_gain = gains[np.arange(f), row_best]
        j = int(np.argmax(row_gain))
        best_gain = float(row_gain[j])
        if not np.isfinite(best_gain):
            return None
        feature = int(feats[j])
        return best_gain, feature, float(self.bins.edges[feature][row_best[j]])


def fit_tree(
    X,
    y=None,
    config: LearnerConfig | None = None,
    *,
    gradients=None,
    hessians=None,
    rng=None,
    bins: CandidateBins | None = None,
    feature_pool=None,
    rows=None,
) -> TreeNode:
    """Fit one regression tree.

    For ``algorithm == "random_forest"`` the tree fits targets ``y`` with
    the variance criterion and mean-valued leaves. For ``"gbdt"`` the
    caller supplies per-row ``gradients`` (and optionally ``hessians``,
    default 1) and gets shrunken second-order leaves. Degenerate inputs
    never raise; a node that cannot split becomes a leaf.
    """
    config = config or LearnerConfig()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    n = X.shape[0]
    if config.algorithm == "random_forest":
        if y is None:
            raise ValueError("random_forest trees require targets y")
        g = np.asarray(y, dtype=np.float64)
        h = np.ones(n)
        criterion = VarianceCriterion()
    else:
        if gradients is None:
            raise ValueError("gbdt trees require gradients")
        g = np.asarray(gradients, dtype=np.float64)
        h = np.ones(n) if hessians is None else np.asarray(hessians, dtype=np.float64)
        criterion = SecondOrderCriterion(config.reg_lambda, config.alpha)
    if g.shape[0] != n or h.shape[0] != n:
        raise ValueError("row count mismatch between X and gradients/targets")
    if rows is None:
        rows = np.arange(n)
    if rows.size < config.min_samples_split and rows.size == 0:
        raise ValueError("cannot fit a tree on zero rows")
    bins = bins or CandidateBins(X, config.max_bin)
    pool = np.arange(X.shape[1]) if feature_pool is None else np.asarray(feature_pool)
    rng = rng or np.random.default_rng(config.seed)
    return Grower(X, g, h, config, criterion, bins, rng, pool).grow(rows)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    """Evaluate one tree on a 2-D matrix (values equal to a threshold go right)."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    stack = [(node, np.arange(n))]
    while stack:
        nd, idx = stack.pop()
        if idx.size == 0:
            continue
        if nd.is_leaf:
            out[idx] = nd.value
        else:
            mask = X[idx, nd.feature] < nd.threshold
            stack.append((nd.left, idx[mask]))
            stack.append((nd.right, idx[~mask]))
    return out
