"""Run the estimator on the tiny trace setting and record the selector stream."""

import numpy as np

from uncertain_batch.estimator import UncertainBatchClassifier
from uncertain_batch.selectors import OursSelector

TRACE_SETTINGS = dict(n=4, q=2, window=2, warmup=1, bins=2, lam=0.5, s0=4.0, epochs=3, batch_size=2)

TRACE_X = 3.0 * np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 0.25], [0.5, 0.5, 1.0], [0.2, 0.9, 0.0]]) - 1.5
TRACE_Y = np.array([[1, 0], [0, 1], [1, 1], [0, 0]])


class RecordingOurs(OursSelector):
    """Ours selector that logs every push and every epoch-start distribution."""

    def setup(self, labels, n_epochs):
        self.events = []
        return super().setup(labels, n_epochs)

    def on_epoch_start(self, epoch, rng):
        super().on_epoch_start(epoch, rng)
        ev = {"kind": "epoch", "epoch": epoch, "active": self.active_}
        if self.active_:
            ev.update(s=self.pressure_, C=self.C_.tolist(), w=self.weights_.tolist(), P=self.P_.tolist())
        self.events.append(ev)

    def on_batch_forward(self, indices, probs):
        super().on_batch_forward(indices, probs)
        self.events.append({"kind": "push", "indices": [int(i) for i in indices],
                            "probs": np.asarray(probs).tolist(), "U": self.U_.tolist()})


class _TraceClassifier(UncertainBatchClassifier):
    def _make_selector(self, instance_ids):
        return RecordingOurs(self.batch_size, self.warmup, self.window, self.s0, self.lam, self.bins)


def record_trace(seed=6):
    s = TRACE_SETTINGS
    est = _TraceClassifier(
        selector="ours", hidden_layer_sizes=(3,), batch_size=s["batch_size"], epochs=s["epochs"],
        warmup=s["warmup"], window=s["window"], lam=s["lam"], s0=s["s0"], bins=s["bins"],
        refresh_full_epoch=True, learning_rate=0.05, random_state=seed,
    )
    est.fit(TRACE_X, TRACE_Y)
    return est.selector_.events
