"""Datasets, feature scaling and multi-label stratified k-fold splitting.

Native file format (UTF-8 text)::

    #MLL n=<n> d=<d> q=<q>
    #labels name_1,...,name_q        (optional)
    x_1,...,x_d|y_1,...,y_q          (n lines)
"""

import re
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionError, DomainError, ParseError

_HEADER = re.compile(r"^#MLL\s+n=(\d+)\s+d=(\d+)\s+q=(\d+)\s*$")


@dataclass
class MultiLabelDataset:
    X: np.ndarray
    Y: np.ndarray
    label_names: list = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y)
        if self.X.ndim != 2 or self.Y.ndim != 2 or self.X.shape[0] != self.Y.shape[0]:
            raise DimensionError(f"X {self.X.shape} and Y {self.Y.shape} do not pair up")
        if min(self.X.shape + self.Y.shape) < 1:
            raise DimensionError("n, d and q must all be positive")
        if not np.all(np.isin(self.Y, (0, 1))):
            raise DomainError("labels must be 0/1")
        if not np.all(np.isfinite(self.X)):
            raise DomainError("features contain NaN or infinity")
        self.Y = self.Y.astype(np.int8)
        if self.label_names is None:
            self.label_names = [f"label{j}" for j in range(self.q)]
        elif len(self.label_names) != self.q:
            raise DimensionError(f"{len(self.label_names)} label names for q={self.q}")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def q(self):
        return self.Y.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices)
        return MultiLabelDataset(self.X[indices], self.Y[indices], list(self.label_names))


def load_dataset(path, format="mll"):
    if format != "mll":
        raise ParseError(f"unsupported dataset format {format!r}; only 'mll' is built in", path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    m = _HEADER.match(lines[0].strip())
    if m is None:
        raise ParseError("header must read '#MLL n=<n> d=<d> q=<q>'", path, 1)
    n, d, q = (int(g) for g in m.groups())
    body_start = 1
    names = None
    if len(lines) > 1 and lines[1].startswith("#labels"):
        names = [s.strip() for s in lines[1][len("#labels") :].split(",")]
        if len(names) != q:
            raise ParseError(f"{len(names)} label names but header says q={q}", path, 2)
        body_start = 2
    rows = [(k + 1, ln) for k, ln in enumerate(lines) if k >= body_start and ln.strip()]
    if len(rows) != n:
        raise ParseError(f"header declares n={n} rows but file has {len(rows)}", path)
    X = np.empty((n, d))
    Y = np.empty((n, q), dtype=np.int8)
    for i, (lineno, ln) in enumerate(rows):
        feat, sep, lab = ln.partition("|")
        if not sep:
            raise ParseError("missing '|' between features and labels", path, lineno)
        fvals = feat.split(",")
        lvals = lab.split(",")
        if len(fvals) != d:
            raise ParseError(f"expected {d} features, found {len(fvals)}", path, lineno)
        if len(lvals) != q:
            raise ParseError(f"expected {q} labels, found {len(lvals)}", path, lineno)
        try:
            X[i] = [float(v) for v in fvals]
        except ValueError as exc:
            raise ParseError(f"bad feature value ({exc})", path, lineno) from None
        for j, v in enumerate(lvals):
            v = v.strip()
            if v not in ("0", "1"):
                raise ParseError(f"label {j} is {v!r}, expected 0 or 1", path, lineno)
            Y[i, j] = int(v)
        if not np.all(np.isfinite(X[i])):
            raise ParseError("non-finite feature value", path, lineno)
    return MultiLabelDataset(X, Y, names)


def save_dataset(ds, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"#MLL n={ds.n} d={ds.d} q={ds.q}\n")
        fh.write("#labels " + ",".join(ds.label_names) + "\n")
        for x, y in zip(ds.X, ds.Y):
            fh.write(",".join(repr(float(v)) for v in x))
            fh.write("|" + ",".join(str(int(v)) for v in y) + "\n")


class FeatureScaler(TransformerMixin, BaseEstimator):
    """Min-max scaling to [0, 1] learned on the training rows.

    Constant training features map to 0; rows transformed later may fall
    outside [0, 1].
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        self.min_ = X.min(axis=0)
        span = X.max(axis=0) - self.min_
        self.scale_ = np.where(span > 0, span, 1.0)
        self.constant_ = span == 0
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "min_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise DimensionError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        out = (X - self.min_) / self.scale_
        out[:, self.constant_] = 0.0
        return out


def scale_features(ds, train_indices):
    """Copy of ``ds`` with every feature min-max scaled on the training rows."""
    train_indices = np.asarray(train_indices)
    if train_indices.size == 0:
        raise DimensionError("training fold is empty")
    scaler = FeatureScaler().fit(ds.X[train_indices])
    return MultiLabelDataset(scaler.transform(ds.X), ds.Y.copy(), list(ds.label_names))


@dataclass
class FoldPlan:
    folds: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.folds)

    def split(self, round_):
        """(train, validation, test) for one CV round.

        Fold ``round_`` is the test set, the next fold (cyclically) validates
        and the remaining ``k - 2`` folds train.
        """
        if self.k < 3:
            raise DomainError("train/validation/test rotation needs k >= 3")
        test = self.folds[round_ % self.k]
        val = self.folds[(round_ + 1) % self.k]
        train = np.sort(
            np.concatenate([f for j, f in enumerate(self.folds) if j not in (round_ % self.k, (round_ + 1) % self.k)])
        )
        return train, val, test


def stratified_kfold(labels, k, rng):
    """First-order iterative stratification into ``k`` folds.

    The rarest remaining label is handled first; each of its instances goes
    to the fold that most wants that label, breaking ties by remaining fold
    capacity and then by fold index. Instances without labels fill the
    folds with the most remaining capacity.
    """
    Y = np.asarray(labels).astype(bool)
    if Y.ndim != 2:
        raise DimensionError("labels must be an n x q matrix")
    n, q = Y.shape
    k = int(k)
    if k < 2 or n < k:
        raise DomainError(f"need 2 <= k <= n, got k={k}, n={n}")
    order = rng.permutation(n)
    capacity = np.full(k, n / k)
    demand = np.outer(np.full(k, 1.0 / k), Y.sum(axis=0).astype(np.float64))  # (k, q)
    assign = np.full(n, -1, dtype=np.int64)
    remaining = Y[order].copy()
    unassigned = np.ones(n, dtype=bool)

    def choose(scores_primary):
        best = scores_primary.max()
        cand = np.flatnonzero(scores_primary == best)
        if cand.size > 1:
            cap = capacity[cand]
            cand = cand[cap == cap.max()]
        return int(cand[0])

    while True:
        counts = remaining[unassigned].sum(axis=0)
        live = np.flatnonzero(counts > 0)
        if live.size == 0:
            break
        label = int(live[np.argmin(counts[live])])
        for pos in np.flatnonzero(unassigned & remaining[:, label]):
            fold = choose(demand[:, label])
            inst = order[pos]
            assign[inst] = fold
            unassigned[pos] = False
            demand[fold] -= Y[inst]
            capacity[fold] -= 1
    for pos in np.flatnonzero(unassigned):
        fold = choose(capacity)
        assign[order[pos]] = fold
        capacity[fold] -= 1
    return FoldPlan([np.flatnonzero(assign == f) for f in range(k)])


def make_synthetic(n, d, q, seed=0, density=0.2, noise=0.5):
    """Correlated multi-label data from a noisy low-rank linear model."""
    rng = np.random.default_rng(seed)
    rank = max(1, min(d, q, 4))
    X = rng.standard_normal((n, d))
    basis = rng.standard_normal((d, rank))
    mix = rng.standard_normal((rank, q))
    logits = (X @ basis) @ mix / np.sqrt(d * rank) * 3.0
    logits += noise * rng.standard_normal((n, q))
    cut = np.quantile(logits, 1.0 - density, axis=0)
    Y = (logits > cut).astype(np.int8)
    return MultiLabelDataset(X, Y)
