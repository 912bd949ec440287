"""Mini-batch selection strategies.

Every selector follows the same protocol, driven by the training loop::

    sel.setup(labels, n_epochs)
    for epoch in 1..n_epochs:
        sel.on_epoch_start(epoch, rng)
        for _ in range(sel.batches_per_epoch):
            idx = sel.next_batch(rng)
            ...forward...
            sel.on_batch_forward(idx, probs)

Uncertainty-driven selectors run in plain shuffled mode for the first
``warmup`` epochs; that mode consumes the generator exactly like
:class:`RandomSelector`, so both produce the same warm-up batches.
"""

import csv
import logging

import numpy as np

from .correlation import (
    DEFAULT_BINS,
    correlation_matrix,
    minmax_normalize,
    sample_weights,
    weighted_uncertainty,
)
from .exceptions import ConfigError, DimensionError, DomainError, ParseError, PreconditionError
from .sampler import PressureSchedule, draw_batch, quantize, selection_probabilities
from .uncertainty import PredictionHistory, window_binary_entropy

logger = logging.getLogger(__name__)

SELECTOR_NAMES = ("ours", "random", "balance", "active", "recency", "external")


class BatchSelector:
    name = "base"
    # Whether the loop should forward instances dropped from warm-up epochs.
    wants_full_coverage = False

    def __init__(self, batch_size=128):
        if int(batch_size) < 1:
            raise DomainError(f"batch size must be >= 1, got {batch_size}")
        self.batch_size = int(batch_size)

    def setup(self, labels, n_epochs):
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise DimensionError("labels must be an n x q matrix")
        self.labels_ = labels.astype(np.int8)
        self.n_, self.q_ = labels.shape
        self.b_ = min(self.batch_size, self.n_)
        self.n_epochs_ = int(n_epochs)
        self._queue = []
        self._uncovered = np.empty(0, dtype=np.int64)
        return self

    @property
    def batches_per_epoch(self):
        return self.n_ // self.b_

    @property
    def pressure(self):
        """Selection pressure of the current epoch; NaN when not applicable."""
        return float("nan")

    def _shuffle_epoch(self, rng):
        perm = rng.permutation(self.n_)
        m = self.batches_per_epoch
        self._queue = [perm[k * self.b_ : (k + 1) * self.b_] for k in range(m)]
        self._uncovered = np.sort(perm[m * self.b_ :])

    def on_epoch_start(self, epoch, rng):
        raise NotImplementedError

    def next_batch(self, rng):
        if not self._queue:
            raise PreconditionError("no batches left in this epoch")
        return self._queue.pop(0)

    def on_batch_forward(self, indices, probs):
        pass

    def uncovered(self):
        """Indices skipped this epoch (the remainder of the shuffle)."""
        return self._uncovered

    def snapshot(self):
        return {}


class RandomSelector(BatchSelector):
    """Fresh permutation per epoch, cut into consecutive chunks."""

    name = "random"

    def on_epoch_start(self, epoch, rng):
        self._shuffle_epoch(rng)


class BalanceSelector(BatchSelector):
    """Greedy label-proportion balancing.

    Instances are shuffled; the first ``m * b`` are placed one at a time into
    the non-full batch whose label counts, after placement, deviate least (in
    L1) from the global label means scaled to that batch's new size. Ties go
    to the lowest batch index.
    """

    name = "balance"

    def on_epoch_start(self, epoch, rng):
        perm = rng.permutation(self.n_)
        m, b = self.batches_per_epoch, self.b_
        take = perm[: m * b]
        self._uncovered = np.sort(perm[m * b :])
        self._queue = [np.asarray(batch, dtype=np.int64) for batch in balance_batches(self.labels_, take, m, b)]


def balance_batches(labels, order, m, b):
    """Assign ``order`` (length ``m * b``) to ``m`` batches of size ``b``."""
    Y = np.asarray(labels, dtype=np.float64)
    mu = Y.mean(axis=0)
    counts = np.zeros((m, Y.shape[1]))
    sizes = np.zeros(m, dtype=np.int64)
    batches = [[] for _ in range(m)]
    for i in order:
        y = Y[i]
        # The target is prorated so early placements spread across batches.
        dev = np.abs(counts + y - np.outer(sizes + 1, mu)).sum(axis=1)
        dev[sizes >= b] = np.inf
        k = int(np.argmin(dev))
        batches[k].append(int(i))
        counts[k] += y
        sizes[k] += 1
    return batches


class _ScoredSelector(BatchSelector):
    """Warm-up shuffling, then sampling from pressure-decayed probabilities."""

    wants_full_coverage = True

    def __init__(self, batch_size=128, warmup=5, window=5, s0=100.0):
        super().__init__(batch_size)
        self.warmup = int(warmup)
        self.window = int(window)
        self.s0 = float(s0)
        if self.warmup < 0:
            raise DomainError("warm-up must be >= 0 epochs")
        if self.window < 1:
            raise DomainError("window must be >= 1")

    def setup(self, labels, n_epochs):
        super().setup(labels, n_epochs)
        self.history_ = PredictionHistory(self.n_, self.q_, self.window)
        self.schedule_ = None
        if self.n_epochs_ > self.warmup:
            self.schedule_ = PressureSchedule(self.s0, self.warmup, self.n_epochs_)
        self.weights_ = None
        self.P_ = None
        self.pressure_ = float("nan")
        self.active_ = False
        return self

    @property
    def pressure(self):
        return self.pressure_

    def on_epoch_start(self, epoch, rng):
        if epoch <= self.warmup:
            self.active_ = False
            self.pressure_ = float("nan")
            self._shuffle_epoch(rng)
            return
        self.active_ = True
        self._uncovered = np.empty(0, dtype=np.int64)
        self.pressure_ = self.schedule_(epoch)
        self.weights_ = self._weights()
        self.P_ = selection_probabilities(self.weights_, self.pressure_)
        self._cdf = np.cumsum(self.P_)

    def next_batch(self, rng):
        if not self.active_:
            return super().next_batch(rng)
        return draw_batch(self.P_, self.b_, rng, self._cdf)

    def on_batch_forward(self, indices, probs):
        self.history_.push(indices, probs)

    def _weights(self):
        raise NotImplementedError

    def snapshot(self):
        out = {}
        if self.weights_ is not None:
            out["w"] = self.weights_
            out["Q"] = quantize(self.weights_, self.n_)
            out["P"] = self.P_
        return out


class OursSelector(_ScoredSelector):
    """Uncertainty from entropy plus window fluctuation, re-weighted by label MI."""

    name = "ours"

    def __init__(self, batch_size=128, warmup=5, window=5, s0=100.0, lam=0.5,
                 bins=DEFAULT_BINS, use_correlation=True):
        super().__init__(batch_size, warmup, window, s0)
        if not 0.0 <= float(lam) <= 1.0:
            raise DomainError(f"lambda must lie in [0, 1], got {lam}")
        if self.window < 2:
            raise DomainError("the fluctuation term needs a window of at least 2")
        self.lam = float(lam)
        self.bins = int(bins)
        self.use_correlation = bool(use_correlation)

    def setup(self, labels, n_epochs):
        super().setup(labels, n_epochs)
        self.history_.track_moments = False
        self._U = np.zeros((self.n_, self.q_))
        self._dirty = np.zeros(self.n_, dtype=bool)
        self.C_ = np.eye(self.q_)
        return self

    @property
    def U_(self):
        """Current uncertainty matrix; rows are refreshed lazily from their windows."""
        stale = np.flatnonzero(self._dirty)
        if stale.size:
            stale = stale[self.history_.is_full(stale)]
            if stale.size:
                every = stale.size == self.n_
                self._U[stale] = self.history_.uncertainty(self.lam, None if every else stale)
                self._dirty[stale] = False
        return self._U

    def on_batch_forward(self, indices, probs):
        self.history_.push(indices, probs)
        self._dirty[indices] = True

    def _weights(self):
        if not np.all(self.history_.is_full()):
            short = int(np.sum(~self.history_.is_full()))
            raise PreconditionError(
                f"{short} instance(s) lack a full window of {self.window} predictions "
                f"after {self.warmup} warm-up epoch(s)"
            )
        U = self.U_
        if self.use_correlation and self.q_ > 1:
            self.C_ = correlation_matrix(U, self.bins)
        else:
            self.C_ = np.eye(self.q_)
        return sample_weights(weighted_uncertainty(U, self.C_))

    def snapshot(self):
        out = {"U": self.U_.copy()}
        if self.active_:
            out["C"] = self.C_.copy()
        out.update(super().snapshot())
        return out


class ActiveBiasSelector(_ScoredSelector):
    """Sum over labels of the full-history prediction std."""

    name = "active"

    def _weights(self):
        if np.any(self.history_.count < 2):
            raise PreconditionError("active-bias scores need at least 2 predictions per instance")
        return minmax_normalize(self.history_.history_std().sum(axis=1))


class RecencyBiasSelector(_ScoredSelector):
    """Sum over labels of the binarised-window entropy."""

    name = "recency"

    def _weights(self):
        return minmax_normalize(window_binary_entropy(self.history_.windows()).sum(axis=1))


class ExternalScoreSelector(_ScoredSelector):
    """Scores supplied per epoch by a CSV with columns ``epoch,instance,score``.

    ``instance`` refers to dataset rows; ``ids`` maps the selector's local
    positions to those rows. An epoch without rows reuses the latest earlier
    epoch in the file.
    """

    name = "external"
    wants_full_coverage = False

    def __init__(self, path, batch_size=128, warmup=5, s0=100.0, ids=None):
        super().__init__(batch_size, warmup, 1, s0)
        self.path = path
        self.ids = ids
        self._scores = read_score_csv(path)

    def _weights(self):
        ids = np.arange(self.n_) if self.ids is None else np.asarray(self.ids)
        if ids.size != self.n_:
            raise DimensionError(f"{ids.size} ids for {self.n_} instances")
        epoch = self._current_epoch
        usable = [e for e in self._scores if e <= epoch]
        if not usable:
            raise PreconditionError(f"score file has no rows for epoch <= {epoch}")
        table = self._scores[max(usable)]
        try:
            raw = np.array([table[int(i)] for i in ids])
        except KeyError as exc:
            raise PreconditionError(f"no score for instance {exc.args[0]} (epoch {max(usable)})") from None
        return minmax_normalize(raw)

    def on_epoch_start(self, epoch, rng):
        self._current_epoch = epoch
        super().on_epoch_start(epoch, rng)


def read_score_csv(path):
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"epoch", "instance", "score"} <= set(reader.fieldnames):
            raise ParseError("score CSV needs columns epoch,instance,score", path, 1)
        for lineno, row in enumerate(reader, start=2):
            try:
                e, i, s = int(row["epoch"]), int(row["instance"]), float(row["score"])
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), path, lineno) from None
            scores.setdefault(e, {})[i] = s
    return scores


def make_selector(name, batch_size=128, warmup=5, window=5, s0=100.0, lam=0.5,
                  bins=DEFAULT_BINS, use_correlation=True, score_path=None, ids=None):
    if name == "random":
        return RandomSelector(batch_size)
    if name == "balance":
        return BalanceSelector(batch_size)
    if name == "ours":
        return OursSelector(batch_size, warmup, window, s0, lam, bins, use_correlation)
    if name == "active":
        return ActiveBiasSelector(batch_size, warmup, window, s0)
    if name == "recency":
        return RecencyBiasSelector(batch_size, warmup, window, s0)
    if name == "external":
        if score_path is None:
            raise ConfigError("the external selector needs a score file")
        return ExternalScoreSelector(score_path, batch_size, warmup, s0, ids)
    raise ConfigError(f"unknown selector {name!r}; choose from {', '.join(SELECTOR_NAMES)}")
