"""Exponential-time Shapley oracle via subset enumeration.

Computes the Shapley value of every feature for the cover-conditional
expectation game directly from its definition: for a feature subset S the
model value is the tree descent that follows the instance on features in S
and averages children by cover otherwise; the attribution of feature i is
the factorial-weighted sum of its marginal contributions over all subsets.
Only feasible for small feature counts (p <= 12 or so).
"""

import itertools
import math

import numpy as np


def _tree_value(tree, x, subset):
    def rec(node):
        if node.is_leaf:
            return node.value
        if node.feature in subset:
            child = node.left if x[node.feature] < node.threshold else node.right
            return rec(child)
        return (node.left.cover * rec(node.left) + node.right.cover * rec(node.right)) / node.cover

    return rec(tree)


def _ensemble_value(ensemble, x, subset):
    total = sum(_tree_value(t, x, subset) for t in ensemble.trees)
    if ensemble.kind == "gbdt":
        return ensemble.base_score + ensemble.learning_rate * total
    return total / len(ensemble.trees)


def brute_force_shap(ensemble, x):
    """(base_value, phi) by exhaustive subset enumeration."""
    p = ensemble.n_features
    cache = {}

    def v(subset):
        key = frozenset(subset)
        if key not in cache:
            cache[key] = _ensemble_value(ensemble, x, key)
        return cache[key]

    phi = np.zeros(p)
    fact = math.factorial
    for i in range(p):
        others = [f for f in range(p) if f != i]
        for r in range(p):
            w = fact(r) * fact(p - r - 1) / fact(p)
            for S in itertools.combinations(others, r):
                phi[i] += w * (v(set(S) | {i}) - v(set(S)))
    return v(set()), phi
