"""scikit-learn compatible multi-label MLP trained with pluggable batch selection."""

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .correlation import DEFAULT_BINS
from .exceptions import DimensionError, NumericError
from .metrics import evaluate
from .model import AdamState, adam_step, backward, bce_loss, forward, init_mlp
from .selectors import make_selector


@dataclass
class EpochRecord:
    epoch: int
    selector: str
    fold: int
    train_loss: float
    val_macro_auc: float
    val_ranking_loss: float
    val_hamming_loss: float
    pressure: float
    wall_seconds: float
    selector_seconds: float

    # Columns excluded from byte-level reproducibility checks.
    TIMING_FIELDS = ("wall_seconds", "selector_seconds")


def rng_streams(random_state):
    """Independent (init, batch) generators derived from one seed or seed tuple."""
    if isinstance(random_state, np.random.SeedSequence):
        ss = random_state
    elif isinstance(random_state, (tuple, list)):
        ss = np.random.SeedSequence([int(v) for v in random_state])
    else:
        ss = np.random.SeedSequence(int(random_state))
    init_ss, batch_ss = ss.spawn(2)
    return np.random.default_rng(init_ss), np.random.default_rng(batch_ss)


class UncertainBatchClassifier(ClassifierMixin, BaseEstimator):
    """Multi-label MLP (ReLU hidden layers, sigmoid outputs) fitted with Adam.

    Mini-batches come from the strategy named by ``selector``: ``"ours"``
    (entropy plus window fluctuation re-weighted by label mutual
    information), ``"random"``, ``"balance"``, ``"active"``, ``"recency"`` or
    ``"external"``.

    Parameters
    ----------
    selector : str
        Batch selection strategy.
    hidden_layer_sizes : tuple of int
        Widths of the hidden layers.
    batch_size, epochs, learning_rate, weight_decay, beta1, beta2
        Optimisation settings.
    warmup : int
        Number of initial epochs with plain shuffled batches.
    window : int
        Sliding-window length of the prediction history.
    lam : float
        Weight of the fluctuation term against the entropy term.
    s0 : float
        Initial selection pressure, decayed to 1 at the final epoch.
    bins : int
        Histogram bins for the label mutual information.
    use_correlation : bool
        If False the correlation matrix is the identity.
    refresh_full_epoch : bool
        Forward the whole training set after every epoch so that histories of
        unselected instances stay current.
    restore_best : bool
        Keep the parameters of the best validation epoch when ``eval_set`` is
        given to :meth:`fit`.
    random_state : int or tuple of int
        Seed for initialisation and batch drawing.
    score_path : str, optional
        Score CSV for the ``"external"`` selector.
    """

    def __init__(self, selector="ours", hidden_layer_sizes=(128,), batch_size=128, epochs=100,
                 learning_rate=1e-3, weight_decay=1e-4, beta1=0.9, beta2=0.999, warmup=5,
                 window=5, lam=0.5, s0=100.0, bins=DEFAULT_BINS, use_correlation=True,
                 refresh_full_epoch=False, restore_best=True, random_state=0, score_path=None):
        self.selector = selector
        self.hidden_layer_sizes = hidden_layer_sizes
        self.batch_size = batch_size
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1 = beta1
        self.beta2 = beta2
        self.warmup = warmup
        self.window = window
        self.lam = lam
        self.s0 = s0
        self.bins = bins
        self.use_correlation = use_correlation
        self.refresh_full_epoch = refresh_full_epoch
        self.restore_best = restore_best
        self.random_state = random_state
        self.score_path = score_path

    def _make_selector(self, instance_ids):
        return make_selector(
            self.selector, batch_size=self.batch_size, warmup=self.warmup, window=self.window,
            s0=self.s0, lam=self.lam, bins=self.bins, use_correlation=self.use_correlation,
            score_path=self.score_path, ids=instance_ids,
        )

    def fit(self, X, Y, eval_set=None, instance_ids=None, epoch_callback=None):
        """Train for ``epochs`` epochs.

        ``eval_set`` is an optional ``(X_val, Y_val)`` pair scored after every
        epoch. ``epoch_callback(epoch, estimator)`` runs at the end of each
        epoch, after validation.
        """
        X, Y = check_X_y(X, Y, multi_output=True, dtype=np.float64)
        if Y.ndim == 1:
            Y = Y[:, None]
        if not np.all(np.isin(Y, (0, 1))):
            raise ValueError("Y must be a 0/1 indicator matrix")
        if eval_set is not None:
            Xv = check_array(eval_set[0], dtype=np.float64)
            Yv = np.asarray(eval_set[1], dtype=np.float64)
            if Yv.ndim == 1:
                Yv = Yv[:, None]
            if Xv.shape[1] != X.shape[1] or Yv.shape != (Xv.shape[0], Y.shape[1]):
                raise DimensionError("eval_set shapes do not match the training data")
        n, d = X.shape
        q = Y.shape[1]
        self.n_features_in_ = d
        self.n_outputs_ = q

        init_rng, batch_rng = rng_streams(self.random_state)
        params = init_mlp([d, *self.hidden_layer_sizes, q], init_rng)
        opt = AdamState.for_params(
            params, lr=self.learning_rate, beta1=self.beta1, beta2=self.beta2,
            weight_decay=self.weight_decay,
        )
        sel = self._make_selector(instance_ids).setup(Y, self.epochs)
        self.selector_ = sel
        self.params_ = params
        self.history_ = []
        self.best_epoch_ = None
        best_auc = -np.inf
        best_params = None
        all_idx = np.arange(n)

        for epoch in range(1, self.epochs + 1):
            start = time.perf_counter()
            sel_time = 0.0
            t = time.perf_counter()
            sel.on_epoch_start(epoch, batch_rng)
            sel_time += time.perf_counter() - t
            losses = []
            for _ in range(sel.batches_per_epoch):
                t = time.perf_counter()
                idx = sel.next_batch(batch_rng)
                sel_time += time.perf_counter() - t
                probs = forward(params, X[idx])
                t = time.perf_counter()
                sel.on_batch_forward(idx, probs)
                sel_time += time.perf_counter() - t
                loss = bce_loss(probs, Y[idx])
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite training loss at epoch {epoch}")
                losses.append(loss)
                adam_step(opt, params, backward(params, X[idx], Y[idx]))
            if sel.wants_full_coverage:
                # Inference-only passes: they fill histories but never touch parameters.
                extra = sel.uncovered()
                if extra.size:
                    sel.on_batch_forward(extra, forward(params, X[extra]))
                if self.refresh_full_epoch:
                    sel.on_batch_forward(all_idx, forward(params, X))

            val = [float("nan")] * 3
            if eval_set is not None:
                rep = evaluate(forward(params, Xv), Yv)
                val = [rep.macro_auc, rep.ranking_loss, rep.hamming_loss]
                if rep.macro_auc > best_auc:
                    best_auc = rep.macro_auc
                    self.best_epoch_ = epoch
                    best_params = params.copy()
            self.history_.append(EpochRecord(
                epoch=epoch, selector=self.selector, fold=0,
                train_loss=float(np.mean(losses)) if losses else float("nan"),
                val_macro_auc=val[0], val_ranking_loss=val[1], val_hamming_loss=val[2],
                pressure=sel.pressure, wall_seconds=time.perf_counter() - start,
                selector_seconds=sel_time,
            ))
            if epoch_callback is not None:
                epoch_callback(epoch, self)

        if self.best_epoch_ is None:
            self.best_epoch_ = self.epochs
        elif self.restore_best:
            self.params_ = best_params
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.params_, X)

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X) >= threshold).astype(np.int8)
