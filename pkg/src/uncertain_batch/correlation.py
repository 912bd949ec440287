"""Uncertainty-based label correlation.

Columns of the uncertainty matrix are histogrammed into ``tau`` equal-width
bins on [0, 1]; pairwise mutual information between the binned columns forms
the correlation matrix, which then re-weights the uncertainties.
"""

import math

import numpy as np

from .exceptions import DimensionError, DomainError

DEFAULT_BINS = 10


def _check_bins(tau):
    tau = int(tau)
    if tau < 2:
        raise DomainError(f"need at least 2 bins, got {tau}")
    return tau


def bin_column(u, tau):
    """Bin indices ``min(floor(u * tau), tau - 1)``; works on any array shape."""
    tau = _check_bins(tau)
    u = np.asarray(u, dtype=np.float64)
    if np.any(~np.isfinite(u)) or np.any(u < 0.0) or np.any(u > 1.0):
        raise DomainError("uncertainty values must lie in [0, 1]")
    return np.minimum(np.floor(u * tau).astype(np.int64), tau - 1)


def joint_marginal(bins_a, bins_b, tau):
    """Joint ``(tau, tau)`` and marginal distributions of two bin-index vectors."""
    tau = _check_bins(tau)
    bins_a = np.asarray(bins_a, dtype=np.int64)
    bins_b = np.asarray(bins_b, dtype=np.int64)
    if bins_a.shape != bins_b.shape or bins_a.ndim != 1:
        raise DimensionError(f"bin vectors differ in shape: {bins_a.shape} vs {bins_b.shape}")
    n = bins_a.size
    if n == 0:
        raise DimensionError("empty bin vectors")
    counts = np.bincount(bins_a * tau + bins_b, minlength=tau * tau).reshape(tau, tau)
    # Marginals from integer counts, so they equal the joint entries exactly
    # whenever one column is constant.
    return counts / n, counts.sum(axis=1) / n, counts.sum(axis=0) / n


def _mi_from_joint(joint, pa, pb):
    mask = joint > 0.0
    outer = np.multiply.outer(pa, pb)
    # fsum is exactly rounded, hence independent of term order: MI(a, b) == MI(b, a).
    return math.fsum((joint[mask] * np.log2(joint[mask] / outer[mask])).tolist())


def mutual_information(col_a, col_b, tau=DEFAULT_BINS):
    """Histogram mutual information (bits) between two uncertainty columns."""
    joint, pa, pb = joint_marginal(bin_column(col_a, tau), bin_column(col_b, tau), tau)
    return max(_mi_from_joint(joint, pa, pb), 0.0)


def correlation_matrix(U, tau=DEFAULT_BINS):
    """Symmetric label-correlation matrix with unit diagonal.

    All pairwise joint histograms come from one Gram product of the one-hot
    bin encoding, so cost is O(n q^2 tau^2) in a single BLAS call.
    """
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2:
        raise DimensionError(f"U must be 2-D, got shape {U.shape}")
    n, q = U.shape
    if n < 2:
        raise DimensionError("correlation needs at least 2 instances")
    tau = _check_bins(tau)
    bins = bin_column(U, tau)
    onehot = np.zeros((n, q * tau))
    onehot[np.arange(n)[:, None], np.arange(q) * tau + bins] = 1.0
    joint = (onehot.T @ onehot).reshape(q, tau, q, tau) / n
    marg = np.einsum("aiai->ai", joint)
    outer = marg[:, :, None, None] * marg[None, None, :, :]  # (q, tau, q, tau)
    pos = joint > 0.0
    ratio = np.divide(joint, outer, out=np.ones_like(joint), where=pos)
    mi = np.maximum((joint * np.log2(ratio)).sum(axis=(1, 3)), 0.0)
    # Mirror the upper triangle so C is exactly symmetric.
    C = np.triu(mi, 1)
    C = C + C.T
    np.fill_diagonal(C, 1.0)
    return C


def weighted_uncertainty(U, C):
    """Correlation-weighted uncertainty ``U @ C``."""
    U = np.asarray(U, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    if U.ndim != 2 or C.ndim != 2 or U.shape[1] != C.shape[0]:
        raise DimensionError(f"cannot multiply U {U.shape} by C {C.shape}")
    return U @ C


def minmax_normalize(raw):
    """Scale to [0, 1]; a constant vector maps to 0.5 everywhere."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.size == 0:
        raise DimensionError("need at least one weight")
    if not np.all(np.isfinite(raw)):
        raise DomainError("weights contain non-finite entries")
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.full(raw.shape, 0.5)
    return (raw - lo) / (hi - lo)


def sample_weights(U_bar):
    """Per-instance weights: row sums of the re-weighted matrix, min-max scaled."""
    U_bar = np.asarray(U_bar, dtype=np.float64)
    if U_bar.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {U_bar.shape}")
    return minmax_normalize(U_bar.sum(axis=1))
