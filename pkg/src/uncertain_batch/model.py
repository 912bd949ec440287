"""Feed-forward multi-label network with sigmoid outputs, BCE loss and Adam.

Everything is plain numpy in float64. Parameters are held in an
:class:`MlpParams` container so gradients and optimizer moments can share
the same layout.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .exceptions import DimensionError, NumericError, ParseError

LOSS_EPS = 1e-12

# Largest float64 strictly below 1 and smallest positive normal.
_P_HI = 1.0 - 2.0**-53
_P_LO = np.finfo(np.float64).tiny


@dataclass
class MlpParams:
    weights: list
    biases: list

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    @property
    def n_outputs(self):
        return self.weights[-1].shape[1]

    def arrays(self):
        """All parameter arrays, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self):
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self):
        return MlpParams(
            [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases]
        )

    def is_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_mlp(layer_sizes, rng):
    """Uniform Glorot initialisation, zero biases.

    ``layer_sizes`` runs from the input width to the output width, e.g.
    ``[d, 128, q]``.
    """
    if len(layer_sizes) < 2 or any(int(s) < 1 for s in layer_sizes):
        raise DimensionError(f"invalid layer sizes {layer_sizes!r}")
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def _check_input(params, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.n_inputs:
        raise DimensionError(
            f"expected input of shape (b, {params.n_inputs}), got {X.shape}"
        )
    return X


def _forward_cache(params, X):
    activations = [X]
    pre = []
    a = X
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        pre.append(z)
        a = expit(z) if k == last else np.maximum(z, 0.0)
        activations.append(a)
    return pre, activations


def forward(params, X):
    """Label probabilities, shape ``(b, q)``, strictly inside (0, 1)."""
    X = _check_input(params, X)
    _, activations = _forward_cache(params, X)
    return np.clip(activations[-1], _P_LO, _P_HI)


def bce_loss(probs, labels):
    """Mean binary cross-entropy over all entries."""
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if probs.shape != labels.shape:
        raise DimensionError(f"probs {probs.shape} vs labels {labels.shape}")
    p = np.clip(probs, LOSS_EPS, 1.0 - LOSS_EPS)
    return float(np.mean(-(labels * np.log(p) + (1.0 - labels) * np.log1p(-p))))


def l2_penalty(params, weight_decay):
    return 0.5 * weight_decay * sum(float(np.sum(a * a)) for a in params.arrays())


def backward(params, X, labels, weight_decay=0.0):
    """Gradient of ``bce_loss(forward(X), labels) + l2_penalty``.

    The output-layer delta uses the sigmoid/BCE identity ``p - y``; it is
    exact as long as no probability hits the loss clamp.
    """
    X = _check_input(params, X)
    labels = np.asarray(labels, dtype=np.float64)
    if labels.shape != (X.shape[0], params.n_outputs):
        raise DimensionError(
            f"labels shape {labels.shape} does not match ({X.shape[0]}, {params.n_outputs})"
        )
    pre, activations = _forward_cache(params, X)
    delta = (activations[-1] - labels) / labels.size
    grads = params.zeros_like()
    for k in range(len(params.weights) - 1, -1, -1):
        grads.weights[k] = activations[k].T @ delta
        grads.biases[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k].T) * (pre[k - 1] > 0.0)
    if weight_decay:
        for g, p in zip(grads.arrays(), params.arrays()):
            g += weight_decay * p
    return grads


@dataclass
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0

    @classmethod
    def for_params(cls, params, **kwargs):
        return cls(m=params.zeros_like(), v=params.zeros_like(), **kwargs)


def adam_step(state, params, grads):
    """One in-place Adam update with bias-corrected moments.

    Weight decay is coupled (added to the gradient), as in classic Adam.
    Returns ``(params, state)`` for convenience.
    """
    for k, g in enumerate(grads.arrays()):
        if not np.all(np.isfinite(g)):
            bad = int(np.sum(~np.isfinite(g)))
            raise NumericError(
                f"non-finite gradient in parameter array {k} ({bad} entries) at step {state.t + 1}"
            )
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for p, g, m, v in zip(params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()):
        if state.weight_decay:
            g = g + state.weight_decay * p
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def save_params(params, path):
    """Write parameters as text: a header line per array, then row-major values."""
    lines = [f"MLP {len(params.weights)}"]
    for w, b in zip(params.weights, params.biases):
        lines.append(f"W {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(repr(float(x)) for x in row) for row in w)
        lines.append(f"b {b.shape[0]}")
        lines.append(" ".join(repr(float(x)) for x in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise ParseError("unexpected end of file", path, pos + 1)
        pos += 1
        return lines[pos - 1].split()

    def floats(tokens, expected):
        try:
            vals = [float(t) for t in tokens]
        except ValueError as exc:
            raise ParseError(str(exc), path, pos) from None
        if len(vals) != expected:
            raise ParseError(f"expected {expected} values, got {len(vals)}", path, pos)
        return vals

    head = take()
    if len(head) != 2 or head[0] != "MLP":
        raise ParseError("missing 'MLP <layers>' header", path, 1)
    weights, biases = [], []
    for _ in range(int(head[1])):
        tag = take()
        if len(tag) != 3 or tag[0] != "W":
            raise ParseError("expected 'W rows cols'", path, pos)
        rows, cols = int(tag[1]), int(tag[2])
        weights.append(np.array([floats(take(), cols) for _ in range(rows)]).reshape(rows, cols))
        tag = take()
        if len(tag) != 2 or tag[0] != "b" or int(tag[1]) != cols:
            raise ParseError(f"expected 'b {cols}'", path, pos)
        biases.append(np.array(floats(take(), cols)))
    return MlpParams(weights, biases)
