"""Multi-label evaluation metrics: Macro-AUC, Ranking Loss and Hamming Loss.

Tie conventions: a tied (positive, negative) pair counts 0.5 towards AUC,
and a tied (relevant, irrelevant) pair counts as a ranking error.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .exceptions import DimensionError, MetricUndefinedError


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim == 1:
        scores = scores[:, None]
    if labels.ndim == 1:
        labels = labels[:, None]
    if scores.shape != labels.shape:
        raise DimensionError(f"scores {scores.shape} vs labels {labels.shape}")
    return scores, labels.astype(bool)


def per_label_auc(scores, labels):
    """AUC of every label; NaN where a label lacks positives or negatives."""
    scores, labels = _check(scores, labels)
    n, q = labels.shape
    out = np.full(q, np.nan)
    n_pos = labels.sum(axis=0)
    for j in range(q):
        npos = int(n_pos[j])
        nneg = n - npos
        if npos == 0 or nneg == 0:
            continue
        ranks = rankdata(scores[:, j])
        out[j] = (ranks[labels[:, j]].sum() - npos * (npos + 1) / 2.0) / (npos * nneg)
    return out


def macro_auc(scores, labels):
    aucs = per_label_auc(scores, labels)
    if np.all(np.isnan(aucs)):
        raise MetricUndefinedError("every label lacks either positives or negatives")
    return float(np.nanmean(aucs))


def _ranking_errors(scores, labels):
    n, q = labels.shape
    n_rel = labels.sum(axis=1)
    eligible = (n_rel > 0) & (n_rel < q)
    losses = np.full(n, np.nan)
    chunk = max(1, int(4_000_000 // max(q * q, 1)))
    for start in range(0, n, chunk):
        s = scores[start : start + chunk]
        y = labels[start : start + chunk]
        # bad[i, r, k]: relevant r, irrelevant k, score(k) >= score(r)
        bad = (s[:, None, :] >= s[:, :, None]) & y[:, :, None] & ~y[:, None, :]
        pairs = y.sum(axis=1) * (~y).sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            losses[start : start + chunk] = bad.sum(axis=(1, 2)) / pairs
    losses[~eligible] = np.nan
    return losses


def ranking_loss(scores, labels):
    scores, labels = _check(scores, labels)
    losses = _ranking_errors(scores, labels)
    if np.all(np.isnan(losses)):
        raise MetricUndefinedError("no instance has both relevant and irrelevant labels")
    return float(np.nanmean(losses))


def hamming_loss(scores, labels, threshold=0.5):
    scores, labels = _check(scores, labels)
    return float(np.mean((scores >= threshold) != labels))


@dataclass
class EvaluationReport:
    macro_auc: float
    ranking_loss: float
    hamming_loss: float
    per_label_auc: np.ndarray = field(repr=False)
    skipped_labels: int = 0
    skipped_instances: int = 0

    def as_dict(self):
        return {
            "macro_auc": self.macro_auc,
            "ranking_loss": self.ranking_loss,
            "hamming_loss": self.hamming_loss,
            "skipped_labels": self.skipped_labels,
            "skipped_instances": self.skipped_instances,
        }


def evaluate(scores, labels, threshold=0.5):
    """All three metrics; undefined ones are reported as NaN."""
    scores, labels = _check(scores, labels)
    aucs = per_label_auc(scores, labels)
    losses = _ranking_errors(scores, labels)
    return EvaluationReport(
        macro_auc=float(np.nanmean(aucs)) if not np.all(np.isnan(aucs)) else float("nan"),
        ranking_loss=float(np.nanmean(losses)) if not np.all(np.isnan(losses)) else float("nan"),
        hamming_loss=hamming_loss(scores, labels, threshold),
        per_label_auc=aucs,
        skipped_labels=int(np.isnan(aucs).sum()),
        skipped_instances=int(np.isnan(losses).sum()),
    )
