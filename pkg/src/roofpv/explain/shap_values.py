"""Exact path-dependent TreeSHAP for the package's tree ensembles.

Per-feature attributions are Shapley values of the cover-conditional
expectation game: absent features are integrated out by descending both
children weighted by their training cover (hessian mass). The polynomial
algorithm propagates subset-weight prefixes along each unique decision
path (extend on descent, unwind when a feature repeats), which reproduces
exhaustive subset enumeration exactly while touching each node once.

The base value is the empty-set prediction: the cover-weighted mean leaf
value per tree, combined across trees with the ensemble's weighting, so
``base_value + sum(phi) == prediction`` holds to float precision. Passing
a ``background`` matrix recomputes node covers by routing those rows
through each tree instead of using the training covers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..learn.ensembles import TreeEnsemble, predict
from ..learn.trees import TreeNode


@dataclass
class ShapExplanation:
    instance_id: str
    base_value: float
    phi: np.ndarray
    feature_names: tuple[str, ...]


class _FlatTree:
    """Array form of one tree (children < 0 mark leaves)."""

    def __init__(self, root: TreeNode):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.cover: list[float] = []
        self._add(root)

    def _add(self, node: TreeNode) -> int:
        idx = len(self.feature)
        self.feature.append(node.feature)
        self.threshold.append(node.threshold)
        self.value.append(node.value)
        self.cover.append(node.cover)
        self.left.append(-1)
        self.right.append(-1)
        if not node.is_leaf:
            self.left[idx] = self._add(node.left)
            self.right[idx] = self._add(node.right)
        return idx

    def expected_value(self, cover) -> float:
        def rec(i):
            if self.left[i] < 0:
                return self.value[i]
            li, ri = self.left[i], self.right[i]
            return (cover[li] * rec(li) + cover[ri] * rec(ri)) / cover[i]

        return rec(0)

    def covers_from_data(self, X: np.ndarray) -> list[float]:
        counts = [0.0] * len(self.feature)

        def route(i, idx):
            counts[i] += idx.size
            if self.left[i] < 0 or idx.size == 0:
                return
            mask = X[idx, self.feature[i]] < self.threshold[i]
            route(self.left[i], idx[mask])
            route(self.right[i], idx[~mask])

        route(0, np.arange(X.shape[0]))
        if any(c <= 0 for c in counts):
            raise ValueError("background data leaves some nodes with zero cover")
        return counts


def _extend(path, pz, po, pi):
    length = len(path)
    path.append([pi, pz, po, 1.0 if length == 0 else 0.0])
    for i in range(length - 1, -1, -1):
        path[i + 1][3] += po * path[i][3] * (i + 1) / (length + 1)
        path[i][3] = pz * path[i][3] * (length - i) / (length + 1)


def _unwind(path, k):
    ud = len(path) - 1
    o = path[k][2]
    z = path[k][1]
    n = path[ud][3]
    out = [e[:] for e in path[:-1]]
    for j in range(ud - 1, -1, -1):
        if o != 0.0:
            t = out[j][3]
            out[j][3] = n * (ud + 1) / ((j + 1) * o)
            n = t - out[j][3] * z * (ud - j) / (ud + 1)
        else:
            out[j][3] = out[j][3] * (ud + 1) / (z * (ud - j))
    for j in range(k, ud):
        out[j][0] = path[j + 1][0]
        out[j][1] = path[j + 1][1]
        out[j][2] = path[j + 1][2]
    return out


def _unwound_sum(path, k):
    ud = len(path) - 1
    o = path[k][2]
    z = path[k][1]
    total = 0.0
    if o != 0.0:
        n = path[ud][3]
        for j in range(ud - 1, -1, -1):
            t = n * (ud + 1) / ((j + 1) * o)
            total += t
            n = path[j][3] - t * z * (ud - j) / (ud + 1)
    else:
        for j in range(ud - 1, -1, -1):
            total += path[j][3] * (ud + 1) / (z * (ud - j))
    return total


def _tree_phi(flat: _FlatTree, cover, x, phi, weight):
    def recurse(i, path, pz, po, pi):
        path = [e[:] for e in path]
        _extend(path, pz, po, pi)
        if flat.left[i] < 0:
            leaf = flat.value[i]
            for j in range(1, len(path)):
                w = _unwound_sum(path, j)
                el = path[j]
                phi[el[0]] += weight * w * (el[2] - el[1]) * leaf
            return
        feat = flat.feature[i]
        hot, cold = (
            (flat.left[i], flat.right[i])
            if x[feat] < flat.threshold[i]
            else (flat.right[i], flat.left[i])
        )
        iz = io = 1.0
        k = None
        for j in range(1, len(path)):
            if path[j][0] == feat:
                k = j
                break
        if k is not None:
            iz, io = path[k][1], path[k][2]
            path = _unwind(path, k)
        recurse(hot, path, iz * cover[hot] / cover[i], io, feat)
        recurse(cold, path, iz * cover[cold] / cover[i], 0.0, feat)

    recurse(0, [], 1.0, 1.0, -1)


def _flatten_ensemble(ensemble: TreeEnsemble, background=None):
    flats = [_FlatTree(t) for t in ensemble.trees]
    if background is None:
        covers = []
        for f in flats:
            if any(c <= 0 for c in f.cover):
                raise ValueError("ensemble carries no usable cover statistics")
            covers.append(f.cover)
    else:
        X = np.ascontiguousarray(background, dtype=np.float64)
        covers = [f.covers_from_data(X) for f in flats]
    return flats, covers


def expected_value(ensemble: TreeEnsemble, background=None) -> float:
    """Empty-feature-set prediction (cover-weighted leaf mean per tree)."""
    flats, covers = _flatten_ensemble(ensemble, background)
    w = ensemble.tree_weight()
    total = sum(f.expected_value(c) for f, c in zip(flats, covers))
    if ensemble.kind == "gbdt":
        return ensemble.base_score + w * total
    return w * total


def shap_matrix(ensemble: TreeEnsemble, X, background=None) -> tuple[float, np.ndarray]:
    """Base value and the (n, p) attribution matrix for a feature matrix."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != ensemble.n_features:
        raise ValueError(f"expected {ensemble.n_features} features, got {X.shape[1]}")
    flats, covers = _flatten_ensemble(ensemble, background)
    w = ensemble.tree_weight()
    base = sum(f.expected_value(c) for f, c in zip(flats, covers))
    base = ensemble.base_score + w * base if ensemble.kind == "gbdt" else w * base
    Phi = np.zeros_like(X)
    for r in range(X.shape[0]):
        phi = Phi[r]
        for f, c in zip(flats, covers):
            _tree_phi(f, c, X[r], phi, w)
    return float(base), Phi


def tree_shap(ensemble: TreeEnsemble, x, background=None, instance_id: str = "0") -> ShapExplanation:
    """Attributions for one instance; see module docstring for semantics."""
    base, Phi = shap_matrix(ensemble, np.asarray(x, dtype=np.float64)[None, :], background)
    return ShapExplanation(instance_id, base, Phi[0], ensemble.feature_names)


@dataclass
class FeatureShapSummary:
    feature: str
    mean_abs_phi: float
    phi: np.ndarray
    values: np.ndarray
    normalized_values: np.ndarray  # min-max per feature, for the color channel


def shap_summary(Phi, X, feature_names, top: int = 20) -> list[FeatureShapSummary]:
    """Beeswarm-plot data: features ranked by mean |phi|, with per-instance
    attributions paired to min-max-normalized feature values."""
    Phi = np.asarray(Phi, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if Phi.shape != X.shape:
        raise ValueError("Phi and X shapes differ")
    if Phi.shape[0] == 0:
        raise ValueError("no explanations to summarize")
    mean_abs = np.abs(Phi).mean(axis=0)
    ranked = sorted(range(len(feature_names)), key=lambda j: (-mean_abs[j], feature_names[j]))
    out = []
    for j in ranked[:top]:
        col = X[:, j]
        lo, hi = col.min(), col.max()
        norm = (col - lo) / (hi - lo) if hi > lo else np.zeros_like(col)
        out.append(
            FeatureShapSummary(feature_names[j], float(mean_abs[j]), Phi[:, j], col, norm)
        )
    return out
