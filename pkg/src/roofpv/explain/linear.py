"""OLS with heteroskedasticity-robust (HC1) standard errors and average
marginal effects over a moderator grid.

Model specs are term lists over named columns: raw features, squared
features, and pairwise interactions, with an optional intercept. The AME
of a focal feature is the analytic derivative of the fitted surface,
``b_f + 2 b_{f^2} x_f + sum_r b_{f x r} x_r``, averaged over the sample
with the moderator pinned to each grid value; its standard error comes
from the delta method on the robust covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy import stats


@dataclass(frozen=True)
class Term:
    kind: str  # "linear" | "squared" | "interaction"
    features: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("linear", "squared", "interaction"):
            raise ValueError(f"unknown term kind {self.kind!r}")
        want = 2 if self.kind == "interaction" else 1
        if len(self.features) != want:
            raise ValueError(f"{self.kind} term takes {want} feature(s), got {self.features}")

    @property
    def label(self) -> str:
        if self.kind == "linear":
            return self.features[0]
        if self.kind == "squared":
            return f"{self.features[0]}^2"
        return f"{self.features[0]} x {self.features[1]}"


@dataclass(frozen=True)
class LinearModelSpec:
    terms: tuple[Term, ...]
    intercept: bool = True

    def __post_init__(self):
        labels = [t.label for t in self.terms]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate terms in model spec")
        if not self.terms:
            raise ValueError("model spec needs at least one term")

    def required_features(self) -> tuple[str, ...]:
        seen: list[str] = []
        for t in self.terms:
            for f in t.features:
                if f not in seen:
                    seen.append(f)
        return tuple(seen)


def parse_terms(text: str) -> tuple[Term, ...]:
    """Terms from a '+'-separated spec, e.g.
    ``"Median HH Income + Median HH Income^2 + Median HH Income*% Asian"``."""
    terms = []
    for chunk in text.split("+"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "*" in chunk:
            a, b = (s.strip() for s in chunk.split("*", 1))
            terms.append(Term("interaction", (a, b)))
        elif chunk.endswith("^2"):
            terms.append(Term("squared", (chunk[:-2].strip(),)))
        else:
            terms.append(Term("linear", (chunk,)))
    return tuple(terms)


@dataclass
class OLSFit:
    spec: LinearModelSpec
    labels: tuple[str, ...]  # design column labels, intercept first
    beta: np.ndarray
    cov_robust: np.ndarray
    residuals: np.ndarray
    r2: float
    n: int
    data: dict[str, np.ndarray]  # raw feature columns used by the spec

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov_robust))

    @property
    def tvalues(self) -> np.ndarray:
        return self.beta / self.se

    @property
    def pvalues(self) -> np.ndarray:
        dof = self.n - len(self.beta)
        return 2.0 * stats.t.sf(np.abs(self.tvalues), dof)

    def coef(self, label: str) -> float:
        return float(self.beta[self.labels.index(label)])


def _columns(data, spec: LinearModelSpec) -> dict[str, np.ndarray]:
    cols = {}
    for name in spec.required_features():
        if hasattr(data, "column"):
            col = data.column(name)
        else:
            if name not in data:
                raise ValueError(f"feature {name!r} not found in data")
            col = data[name]
        cols[name] = np.asarray(col, dtype=np.float64)
    return cols


def _design(cols: dict[str, np.ndarray], spec: LinearModelSpec) -> tuple[np.ndarray, tuple[str, ...]]:
    n = len(next(iter(cols.values())))
    parts = []
    labels = []
    if spec.intercept:
        parts.append(np.ones(n))
        labels.append("(Intercept)")
    for t in spec.terms:
        if t.kind == "linear":
            parts.append(cols[t.features[0]])
        elif t.kind == "squared":
            parts.append(cols[t.features[0]] ** 2)
        else:
            parts.append(cols[t.features[0]] * cols[t.features[1]])
        labels.append(t.label)
    return np.column_stack(parts), tuple(labels)


def ols_fit(data, y, spec: LinearModelSpec) -> OLSFit:
    """Least squares with HC1 sandwich covariance.

    ``data`` is a mapping of column name to array (or anything with a
    ``column(name)`` accessor); ``y`` is the target vector. Rank-deficient
    designs raise with the offending (collinear) columns named.
    """
    cols = _columns(data, spec)
    y = np.asarray(y, dtype=np.float64)
    X, labels = _design(cols, spec)
    n, k = X.shape
    if n <= k:
        raise ValueError(f"need more observations ({n}) than terms ({k})")
    # Pivoted QR exposes which columns break full rank.
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = diag.max() * max(n, k) * np.finfo(float).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < k:
        collinear = sorted(labels[j] for j in piv[rank:])
        raise ValueError(f"design matrix is rank deficient; collinear terms: {collinear}")
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    XtX_inv = np.linalg.inv(X.T @ X)
    meat = X.T @ (X * (resid**2)[:, None])
    cov = XtX_inv @ meat @ XtX_inv * (n / (n - k))
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else 1.0
    return OLSFit(spec, labels, beta, cov, resid, r2, n, cols)


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    if p < 0.1:
        return "+"  # dagger in the text rendering
    return ""


_TEXT_STARS = {"+": "†"}


def ols_table_rows(fits: list[OLSFit], names: list[str]) -> list[list[str]]:
    """CSV rows mirroring the supplementary-regression layout: one column
    block per model with 'coef (robust se)stars' cells."""
    all_labels: list[str] = []
    for fit in fits:
        for label in fit.labels:
            if label not in all_labels:
                all_labels.append(label)
    rows = [["term", *names]]
    for label in all_labels:
        row = [label]
        for fit in fits:
            if label in fit.labels:
                j = fit.labels.index(label)
                stars = significance_stars(float(fit.pvalues[j]))
                row.append(f"{fit.beta[j]:.3f} ({fit.se[j]:.3f}){stars}")
            else:
                row.append("")
        rows.append(row)
    rows.append(["N", *[str(f.n) for f in fits]])
    rows.append(["R2", *[f"{f.r2:.3f}" for f in fits]])
    return rows


def ols_table_text(fits: list[OLSFit], names: list[str]) -> str:
    rows = ols_table_rows(fits, names)
    for row in rows:
        for i, cell in enumerate(row):
            for ascii_mark, glyph in _TEXT_STARS.items():
                if cell.endswith(ascii_mark):
                    row[i] = cell[: -len(ascii_mark)] + glyph
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows]
    legend = "*** p<0.001, ** p<0.01, * p<0.05, † p<0.1. Robust standard errors in parentheses."
    return "\n".join(lines + [legend]) + "\n"


@dataclass
class AMEReport:
    focal: str
    moderator: str
    grid: np.ndarray
    ame: np.ndarray
    se: np.ndarray


def ame(fit: OLSFit, focal: str, moderator: str, grid=None, n_points: int = 20) -> AMEReport:
    """Average marginal effect of the focal feature across a moderator grid.

    Default grid: ``n_points`` evenly spaced values spanning the
    moderator's observed range. Non-moderator interaction partners stay at
    their per-observation sample values.
    """
    terms = fit.spec.terms
    if not any(focal in t.features for t in terms):
        raise ValueError(f"focal feature {focal!r} absent from the model spec")
    if moderator not in fit.data:
        raise ValueError(f"moderator {moderator!r} absent from the model data")
    if grid is None:
        col = fit.data[moderator]
        grid = np.linspace(col.min(), col.max(), n_points)
    grid = np.asarray(grid, dtype=np.float64)
    n = fit.n
    k = len(fit.beta)
    ames = np.empty(grid.size)
    ses = np.empty(grid.size)
    for gi, gval in enumerate(grid):
        # gradient of the AME w.r.t. beta: AME = c . beta
        c = np.zeros(k)
        for j, label in enumerate(fit.labels):
            if label == "(Intercept)":
                continue
            t = terms[j - 1] if fit.spec.intercept else terms[j]
            if t.kind == "linear" and t.features[0] == focal:
                c[j] = 1.0
            elif t.kind == "squared" and t.features[0] == focal:
                xf = fit.data[focal]
                c[j] = 2.0 * float(np.mean(xf))
            elif t.kind == "interaction" and focal in t.features:
                other = t.features[0] if t.features[1] == focal else t.features[1]
                if other == moderator:
                    c[j] = gval
                else:
                    c[j] = float(np.mean(fit.data[other]))
        ames[gi] = float(c @ fit.beta)
        ses[gi] = float(np.sqrt(c @ fit.cov_robust @ c))
    return AMEReport(focal, moderator, grid, ames, ses)
