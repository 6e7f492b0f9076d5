"""Plain numpy multilayer perceptron with hand-written backprop.

Layers are affine maps with ReLU between them and a linear output head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class QNetworkParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    def copy(self) -> "QNetworkParams":
        return QNetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def equals(self, other: "QNetworkParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def init_params(dims: list[int], rng: np.random.Generator, dtype=np.float64) -> QNetworkParams:
    """Uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = 1.0 / math.sqrt(fan_in)
        ws.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)).astype(dtype))
        bs.append(rng.uniform(-lim, lim, size=fan_out).astype(dtype))
    return QNetworkParams(ws, bs)


def zeros_like(params: QNetworkParams) -> QNetworkParams:
    return QNetworkParams([np.zeros_like(w) for w in params.weights], [np.zeros_like(b) for b in params.biases])


def forward(params: QNetworkParams, x: np.ndarray, keep: bool = False):
    """Batch forward pass. Returns outputs, plus activations when ``keep``."""
    h = np.asarray(x, dtype=params.dtype)
    acts = [h]
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0)
        acts.append(h)
    return (h, acts) if keep else h


def q_forward(params: QNetworkParams, state) -> np.ndarray:
    if not params.is_finite():
        raise FloatingPointError("non-finite network parameter")
    out = forward(params, np.asarray(state)[None, :])
    return out[0]


def backward(params: QNetworkParams, acts: list[np.ndarray], dout: np.ndarray) -> QNetworkParams:
    """Gradients of sum(dout * output) with respect to every parameter."""
    gw: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]
    g = dout
    for i in range(len(params.weights) - 1, -1, -1):
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = g @ params.weights[i].T
            g = g * (acts[i] > 0)
    return QNetworkParams(gw, gb)


def td_targets(params: QNetworkParams, rewards: np.ndarray, next_states: np.ndarray, gamma: float) -> np.ndarray:
    q_next = forward(params, next_states)
    return np.asarray(rewards, dtype=params.dtype) + gamma * q_next.max(axis=1)


def td_loss_and_grad(params: QNetworkParams, states, actions, rewards, next_states,
                     gamma: float, targets: np.ndarray | None = None) -> tuple[float, QNetworkParams]:
    """Mean squared TD error and its gradient; targets are treated as constants."""
    states = np.asarray(states, dtype=params.dtype)
    actions = np.asarray(actions, dtype=np.int64)
    n = len(actions)
    if targets is None:
        targets = td_targets(params, rewards, next_states, gamma)
    q, acts = forward(params, states, keep=True)
    idx = np.arange(n)
    err = q[idx, actions] - targets
    # fsum keeps the loss independent of minibatch order
    loss = math.fsum(float(e) * float(e) for e in err) / n
    dout = np.zeros_like(q)
    dout[idx, actions] = 2.0 * err / n
    return loss, backward(params, acts, dout)


def sgd_step(params: QNetworkParams, grads: QNetworkParams, lr: float) -> QNetworkParams:
    lr_t = params.dtype.type(lr)
    return QNetworkParams([w - lr_t * g for w, g in zip(params.weights, grads.weights)],
                          [b - lr_t * g for b, g in zip(params.biases, grads.biases)])


def clip_by_norm(grads: QNetworkParams, max_norm: float) -> QNetworkParams:
    """Rescale so the global L2 norm is at most ``max_norm``."""
    norm = math.sqrt(math.fsum(float(np.sum(np.square(a, dtype=np.float64))) for a in grads.arrays()))
    if norm <= max_norm or norm == 0.0:
        return grads
    k = grads.dtype.type(max_norm / norm)
    return QNetworkParams([w * k for w in grads.weights], [b * k for b in grads.biases])


def dqn_update(params: QNetworkParams, batch, gamma: float, lr: float,
               max_grad_norm: float | None = None) -> tuple[QNetworkParams, float]:
    """One SGD step on a minibatch ``(states, actions, rewards, next_states)``.

    Targets use the parameters as they were before the step. With
    ``max_grad_norm`` set, the step direction is kept but its length capped.
    """
    states, actions, rewards, next_states = batch
    if len(actions) == 0:
        return params, 0.0
    frozen = params
    targets = td_targets(frozen, rewards, next_states, gamma)
    loss, grads = td_loss_and_grad(params, states, actions, rewards, next_states, gamma, targets)
    if max_grad_norm is not None:
        grads = clip_by_norm(grads, max_grad_norm)
    return sgd_step(params, grads, lr), loss
