"""Weights to sampling distribution: quantizer, pressure law and batch draws."""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, DomainError

logger = logging.getLogger(__name__)


def quantize(w, n):
    """Quantization index ``floor((1 - w) * n)``, in ``[0, n]``.

    ``w`` may be a scalar or an array of weights in [0, 1].
    """
    n = int(n)
    if n < 1:
        raise DomainError(f"sample count must be >= 1, got {n}")
    w = np.asarray(w, dtype=np.float64)
    if np.any(~np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
        raise DomainError("weights must lie in [0, 1]")
    q = np.floor((1.0 - w) * n).astype(np.int64)
    q = np.clip(q, 0, n)
    return int(q) if q.ndim == 0 else q


def selection_probabilities(w, pressure):
    """Sampling distribution ``P_i ~ pressure ** (-Q(w_i) / n)``.

    ``n`` is the number of weights. With ``pressure == 1`` the result is
    exactly uniform.
    """
    pressure = float(pressure)
    if not np.isfinite(pressure) or pressure < 1.0:
        raise DomainError(f"selection pressure must be >= 1, got {pressure}")
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n = w.size
    if n == 0:
        raise DimensionError("need at least one weight")
    Q = quantize(w, n)
    if pressure == 1.0:
        return np.full(n, 1.0 / n)
    logits = -(Q - Q.min()) * (np.log(pressure) / n)
    p = np.exp(logits)
    return p / p.sum()


@dataclass(frozen=True)
class PressureSchedule:
    """Exponential decay of the selection pressure from ``s0`` down to 1."""

    s0: float
    t_start: int
    t_end: int

    def __post_init__(self):
        if not self.s0 >= 1.0:
            raise DomainError(f"initial pressure must be >= 1, got {self.s0}")
        if not self.t_start < self.t_end:
            raise DomainError(f"need t_start < t_end, got {self.t_start}, {self.t_end}")

    def __call__(self, t_now):
        return decay_pressure(self, t_now)


def decay_pressure(sched, t_now):
    """``s0 ** (1 - (t_now - t_start) / (t_end - t_start))``, clamped to the range."""
    t = t_now
    if t < sched.t_start or t > sched.t_end:
        t = min(max(t, sched.t_start), sched.t_end)
        logger.warning(
            "epoch %s outside pressure schedule [%s, %s]; clamped",
            t_now, sched.t_start, sched.t_end,
        )
    frac = (t - sched.t_start) / (sched.t_end - sched.t_start)
    return float(sched.s0 ** (1.0 - frac))


def _check_distribution(P):
    P = np.asarray(P, dtype=np.float64).reshape(-1)
    if not (P.size and np.isfinite(P).all() and P.min() >= 0.0 and P.sum() > 0.0):
        raise DomainError("sampling distribution must be finite, nonnegative and non-zero")
    return P


def draw_batch(P, b, rng, cdf=None):
    """Draw ``b`` distinct indices, weighted by ``P``, without replacement.

    The law is that of picking one index at a time from ``P`` renormalised
    over the indices not yet taken; the result is in selection order.

    For ``b <= n / 4`` each pick inverts the cumulative distribution and
    repeats are rejected, which is the same law at O(b log n) per batch once
    ``cdf = np.cumsum(P)`` is known (pass it in to reuse it across batches).
    Larger batches use exponential race keys ``E_i / P_i`` (the ``b``
    smallest win), at O(n) per batch.
    """
    P = _check_distribution(P)
    n = P.size
    b = int(b)
    if b < 1 or b > n:
        raise DimensionError(f"batch size {b} not in [1, {n}]")
    if np.count_nonzero(P) < b:
        raise DomainError(f"only {np.count_nonzero(P)} indices have positive probability, need {b}")
    if 4 * b <= n:
        if cdf is None:
            cdf = np.cumsum(P)
        return _draw_rejecting(cdf, b, rng)
    with np.errstate(divide="ignore"):
        keys = rng.standard_exponential(n) / P
    if b == n:
        return np.argsort(keys, kind="stable")
    pick = np.argpartition(keys, b - 1)[:b]
    return pick[np.argsort(keys[pick], kind="stable")]


def _draw_rejecting(cdf, b, rng):
    # Scan an i.i.d. stream from P and keep the first b distinct indices; the
    # stream is generated in oversized rounds and its unused tail discarded.
    total = cdf[-1]
    last = cdf.size - 1
    taken = np.zeros(cdf.size, dtype=bool)
    parts = []
    need = b
    while need:
        u = rng.random(1 if b == 1 else 2 * need + 8) * total
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), last)
        _, first = np.unique(idx, return_index=True)
        idx = idx[np.sort(first)]
        idx = idx[~taken[idx]][:need]
        taken[idx] = True
        parts.append(idx)
        need -= idx.size
    return np.concatenate(parts)


def draw_batches(P, b, m, rng):
    """``m`` independent batches as an ``(m, b)`` array.

    Consumes the generator exactly like ``m`` successive :func:`draw_batch`
    calls, so both give identical batches for the same seed. Single draws
    (``b == 1``) are fully vectorised.
    """
    P = _check_distribution(P)
    b, m = int(b), int(m)
    if b == 1 and 4 <= P.size:
        cdf = np.cumsum(P)
        u = rng.random(m) * cdf[-1]
        return np.minimum(np.searchsorted(cdf, u, side="right"), P.size - 1)[:, None]
    cdf = np.cumsum(P)
    out = np.empty((m, b), dtype=np.int64)
    for k in range(m):
        out[k] = draw_batch(P, b, rng, cdf)
    return out
