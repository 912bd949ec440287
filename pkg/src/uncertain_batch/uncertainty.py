"""Per-(instance, label) uncertainty measures and the prediction history store.

All measure functions are vectorised: windows are arrays whose last axis
holds the predictions ordered oldest to newest.
"""

import numpy as np

from .exceptions import DimensionError, DomainError, PreconditionError

BINARIZE_THRESHOLD = 0.5


def _check_unit(x, name):
    x = np.asarray(x, dtype=np.float64)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


def _binary_entropy(p):
    """H(p) in bits with 0 log 0 = 0; ``p`` already validated."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    inner = (p > 0.0) & (p < 1.0)
    # Evaluate on the smaller tail so that H(p) and H(1 - p) agree to rounding.
    r = np.minimum(p[inner], 1.0 - p[inner])
    out[inner] = -(r * np.log(r) + (1.0 - r) * np.log1p(-r)) / np.log(2.0)
    return out


def current_entropy(p):
    """Entropy (bits) of the current prediction; 1 at p = 0.5, 0 at p in {0, 1}."""
    p = _check_unit(p, "probability")
    out = _binary_entropy(p)
    return float(out) if out.ndim == 0 else out


def window_abs_diff(window):
    """Mean absolute difference between adjacent predictions in the window."""
    w = _check_unit(window, "window entries")
    if w.ndim == 0 or w.shape[-1] < 2:
        raise PreconditionError("window_abs_diff needs a window of at least 2 predictions")
    out = np.abs(np.diff(w, axis=-1)).mean(axis=-1)
    return float(out) if out.ndim == 0 else out


def combined_uncertainty(d, e, lam):
    """Convex combination ``lam * d + (1 - lam) * e``."""
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    out = _combine(_check_unit(d, "fluctuation term"), _check_unit(e, "entropy term"), lam)
    return float(out) if out.ndim == 0 else out


def _combine(d, e, lam):
    # Exact endpoints so the ablation variants return their input bit-for-bit.
    if lam == 0.0:
        return e.copy()
    if lam == 1.0:
        return d.copy()
    return lam * d + (1.0 - lam) * e


def window_binary_entropy(window, threshold=BINARIZE_THRESHOLD):
    """Entropy of the thresholded predictions in the window (>= threshold is 1)."""
    w = _check_unit(window, "window entries")
    if w.ndim == 0 or w.shape[-1] < 1:
        raise PreconditionError("window_binary_entropy needs a non-empty window")
    frac = (w >= threshold).mean(axis=-1)
    out = _binary_entropy(frac)
    return float(out) if out.ndim == 0 else out


def std_from_variance(var, count):
    """``sqrt(var + var**2 / (count - 1))`` for a history of ``count`` predictions."""
    var = np.asarray(var, dtype=np.float64)
    count = np.asarray(count)
    if np.any(count < 2):
        raise PreconditionError("history standard deviation needs at least 2 predictions")
    out = np.sqrt(var + var * var / (count - 1))
    return float(out) if out.ndim == 0 else out


def window_std(window):
    """The same std measure restricted to the sliding window (population variance)."""
    w = _check_unit(window, "window entries")
    return std_from_variance(w.var(axis=-1), w.shape[-1])


class PredictionHistory:
    """Ring buffers of the last ``window`` probabilities for an n x q grid.

    All q labels of an instance are pushed together, so fill level and ring
    position are tracked per instance. Alongside the ring a running
    (count, mean, M2) accumulator covers every prediction ever pushed;
    ``track_moments=False`` skips it when only the window is needed.
    """

    def __init__(self, n, q, window, track_moments=True):
        if n < 1 or q < 1:
            raise DimensionError(f"need n, q >= 1, got n={n}, q={q}")
        if window < 1:
            raise DomainError(f"window size must be >= 1, got {window}")
        self.n, self.q, self.window = int(n), int(q), int(window)
        self.track_moments = bool(track_moments)
        self._buf = np.zeros((self.n, self.q, self.window))
        self._pos = np.zeros(self.n, dtype=np.int64)
        self.fill = np.zeros(self.n, dtype=np.int64)
        self.count = np.zeros(self.n, dtype=np.int64)
        self.mean = np.zeros((self.n, self.q))
        self._m2 = np.zeros((self.n, self.q))

    @classmethod
    def from_values(cls, values, window=None):
        """Single (instance, label) history built by pushing ``values`` in order."""
        values = list(values)
        h = cls(1, 1, window or max(len(values), 1))
        for v in values:
            h.push([0], [[v]])
        return h

    def push(self, indices, probs):
        """Append one prediction row per index; repeated indices push repeatedly."""
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        probs = _check_unit(probs, "probabilities")
        if probs.shape != (indices.size, self.q):
            raise DimensionError(f"probs shape {probs.shape}, expected ({indices.size}, {self.q})")
        if indices.size and (indices.min() < 0 or indices.max() >= self.n):
            raise DimensionError("instance index out of range")
        # Sequential so duplicates within one call behave like separate pushes.
        if np.unique(indices).size == indices.size:
            self._push_unique(indices, probs)
        else:
            for k in range(indices.size):
                self._push_unique(indices[k : k + 1], probs[k : k + 1])

    def _push_unique(self, idx, p):
        self._buf[idx, :, self._pos[idx]] = p
        self._pos[idx] = (self._pos[idx] + 1) % self.window
        self.fill[idx] = np.minimum(self.fill[idx] + 1, self.window)
        self.count[idx] += 1
        if not self.track_moments:
            return
        c = self.count[idx][:, None]
        delta = p - self.mean[idx]
        self.mean[idx] += delta / c
        self._m2[idx] += delta * (p - self.mean[idx])

    def is_full(self, indices=None):
        fill = self.fill if indices is None else self.fill[np.asarray(indices)]
        return fill == self.window

    def windows(self, indices=None):
        """Windows as ``(k, q, T)``, oldest to newest; all must be full."""
        idx = np.arange(self.n) if indices is None else np.asarray(indices, dtype=np.int64)
        if not np.all(self.fill[idx] == self.window):
            short = idx[self.fill[idx] < self.window]
            raise PreconditionError(
                f"{short.size} instance(s) have fewer than {self.window} predictions "
                f"(first: {int(short[0])})"
            )
        order = (self._pos[idx, None] + np.arange(self.window)) % self.window
        return np.take_along_axis(self._buf[idx], order[:, None, :], axis=2)

    def fluctuation(self, indices=None):
        """Window fluctuation ``d`` and newest prediction, both ``(k, q)``.

        Same values as ``window_abs_diff(windows(idx))`` up to rounding, but
        read straight off the ring: the cyclic sum of adjacent differences
        minus the wrap-around pair (newest, oldest).
        """
        idx = np.arange(self.n) if indices is None else np.asarray(indices, dtype=np.int64)
        if self.window < 2:
            raise PreconditionError("window_abs_diff needs a window of at least 2 predictions")
        if not np.all(self.fill[idx] == self.window):
            raise PreconditionError(f"some instances have fewer than {self.window} predictions")
        B = self._buf if indices is None else self._buf[idx]
        rows = np.arange(idx.size)
        oldest = B[rows, :, self._pos[idx]]
        newest = B[rows, :, (self._pos[idx] - 1) % self.window]
        cyclic = np.abs(np.diff(B, axis=2)).sum(axis=2) + np.abs(B[:, :, 0] - B[:, :, -1])
        d = (cyclic - np.abs(oldest - newest)) / (self.window - 1)
        return np.clip(d, 0.0, 1.0), newest

    def uncertainty(self, lam, indices=None):
        """Combined uncertainty of full windows, ``(k, q)``.

        Stored predictions were validated on push, so no re-checking here.
        """
        d, newest = self.fluctuation(indices)
        return _combine(d, _binary_entropy(newest), float(lam))

    def latest(self, indices=None):
        idx = np.arange(self.n) if indices is None else np.asarray(indices, dtype=np.int64)
        if np.any(self.fill[idx] == 0):
            raise PreconditionError("no prediction recorded yet")
        return self._buf[idx, :, (self._pos[idx] - 1) % self.window]

    def variance(self, indices=None):
        """Population variance of the full history, ``(k, q)``."""
        idx = np.arange(self.n) if indices is None else np.asarray(indices, dtype=np.int64)
        if not self.track_moments:
            raise PreconditionError("this history does not track moments")
        c = self.count[idx]
        if np.any(c == 0):
            raise PreconditionError("no prediction recorded yet")
        return self._m2[idx] / c[:, None]

    def history_std(self, indices=None):
        """Std measure over the entire history (not just the window), ``(k, q)``."""
        idx = np.arange(self.n) if indices is None else np.asarray(indices, dtype=np.int64)
        if np.any(self.count[idx] < 2):
            raise PreconditionError("history standard deviation needs at least 2 predictions")
        return std_from_variance(self.variance(idx), self.count[idx][:, None])


def history_std(h):
    """Full-history std for a single-pair history, as a float."""
    return float(h.history_std()[0, 0])


def label_uncertainty(windows, lam):
    """Combined uncertainty for full windows ``(..., T)``.

    The entropy term uses the newest window entry as the current prediction.
    """
    windows = np.asarray(windows, dtype=np.float64)
    d = window_abs_diff(windows)
    e = current_entropy(windows[..., -1])
    return combined_uncertainty(d, e, lam)
