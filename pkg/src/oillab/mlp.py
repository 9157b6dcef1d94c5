"""Fully connected control policy trained by hand-rolled backprop and Adam.

Float64 throughout: the network is tiny, and exact gradient checks matter
more than speed here. Hidden layers use tanh, the output layer is linear;
training applies inverted dropout to the second hidden layer only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HIDDEN_DIMS = (64, 32, 16)
DROPOUT_LAYER = 2  # 1-based hidden layer index that receives dropout
DEFAULT_DROPOUT = 0.5
DEFAULT_BATCH = 64

ADAM_LR = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class TrainingDivergenceError(RuntimeError):
    """Raised when a training step produces a non-finite loss."""


@dataclass
class Mlp:
    """Weights and biases of the feedforward policy network."""

    dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    output_activation: str = "identity"  # "identity" or "tanh"

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(
            dims=list(self.dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            output_activation=self.output_activation,
        )


@dataclass
class AdamState:
    """First/second moment accumulators mirroring the parameter shapes."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    step: int = 0
    lr: float = ADAM_LR
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS


def init_weights(dims: list[int], seed: int, output_activation: str = "identity") -> Mlp:
    """Uniform init with per-layer standard deviation 1/sqrt(fan_in); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(3.0 / fan_in)  # U(-b, b) has std b/sqrt(3)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims=list(dims), weights=weights, biases=biases, output_activation=output_activation)


def make_adam(net: Mlp, lr: float = ADAM_LR) -> AdamState:
    return AdamState(
        m_w=[np.zeros_like(w) for w in net.weights],
        v_w=[np.zeros_like(w) for w in net.weights],
        m_b=[np.zeros_like(b) for b in net.biases],
        v_b=[np.zeros_like(b) for b in net.biases],
        lr=lr,
    )


def _forward_pass(
    net: Mlp, x: np.ndarray, dropout_mask: np.ndarray | None = None
) -> tuple[np.ndarray, list[np.ndarray], np.ndarray | None]:
    """Run the affine+tanh chain.

    Returns (output, per-layer activations, pre-mask tanh of the dropout
    layer). ``activations[0]`` is the input; hidden activations are post-tanh
    and, for the dropout layer, post-mask (they feed the next affine).
    """
    acts = [x]
    pre_mask = None
    a = x
    for i in range(net.n_layers):
        z = a @ net.weights[i].T + net.biases[i]
        if i < net.n_layers - 1:
            a = np.tanh(z)
            if dropout_mask is not None and i == DROPOUT_LAYER - 1:
                pre_mask = a
                a = a * dropout_mask
        elif net.output_activation == "tanh":
            a = np.tanh(z)
        else:
            a = z
        acts.append(a)
    return a, acts, pre_mask


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Deterministic inference pass (no dropout)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.dims[0]:
        raise ValueError(f"input dim {x.shape[-1]} != network input dim {net.dims[0]}")
    out, _, _ = _forward_pass(net, x)
    return out


def l2_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over the batch of the summed squared error per sample."""
    pred = np.atleast_2d(pred)
    target = np.atleast_2d(target)
    return float(np.mean(np.sum((pred - target) ** 2, axis=1)))


def _backprop(
    net: Mlp,
    acts: list[np.ndarray],
    pre_mask: np.ndarray | None,
    delta: np.ndarray,
    dropout_mask: np.ndarray | None,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients given dL/d(pre-activation of the output layer)."""
    grad_w = [np.empty(0)] * net.n_layers
    grad_b = [np.empty(0)] * net.n_layers
    for i in reversed(range(net.n_layers)):
        grad_w[i] = delta.T @ acts[i]
        grad_b[i] = delta.sum(axis=0)
        if i == 0:
            break
        delta = delta @ net.weights[i]
        if dropout_mask is not None and i - 1 == DROPOUT_LAYER - 1:
            # tanh' needs the unmasked activation here
            delta = delta * dropout_mask * (1.0 - pre_mask**2)
        else:
            delta = delta * (1.0 - acts[i] ** 2)  # tanh'(z) in terms of activation
    return grad_w, grad_b


def loss_gradients(
    net: Mlp,
    inputs: np.ndarray,
    targets: np.ndarray,
    dropout_mask: np.ndarray | None = None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """L2 loss and parameter gradients for one batch (backprop).

    The optional mask (already inverted-scaled) multiplies the second hidden
    layer's activations on both the forward and backward pass.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    batch = inputs.shape[0]

    pred, acts, pre_mask = _forward_pass(net, inputs, dropout_mask)
    loss = l2_loss(pred, targets)

    delta = 2.0 * (pred - targets) / batch  # dL/d(output)
    if net.output_activation == "tanh":
        delta = delta * (1.0 - acts[-1] ** 2)
    grad_w, grad_b = _backprop(net, acts, pre_mask, delta, dropout_mask)
    return loss, grad_w, grad_b


def output_gradients(
    net: Mlp, inputs: np.ndarray, dl_dout: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Parameter gradients given an arbitrary upstream dL/d(output) batch."""
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    dl_dout = np.atleast_2d(np.asarray(dl_dout, dtype=float))
    _, acts, _ = _forward_pass(net, inputs)
    delta = dl_dout
    if net.output_activation == "tanh":
        delta = delta * (1.0 - acts[-1] ** 2)
    return _backprop(net, acts, None, delta, None)


def input_gradient(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Gradient of sum(upstream * output) with respect to the input batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=float))
    _, acts, _ = _forward_pass(net, x)
    delta = upstream.copy()
    if net.output_activation == "tanh":
        delta = delta * (1.0 - acts[-1] ** 2)
    for i in reversed(range(net.n_layers)):
        delta = delta @ net.weights[i]
        if i > 0:
            delta = delta * (1.0 - acts[i] ** 2)
    return delta


def adam_update(net: Mlp, adam: AdamState, grad_w: list[np.ndarray], grad_b: list[np.ndarray]) -> None:
    """One Adam step, in place."""
    adam.step += 1
    t = adam.step
    b1, b2 = adam.beta1, adam.beta2
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for i in range(net.n_layers):
        for params, grads, m, v in (
            (net.weights[i], grad_w[i], adam.m_w[i], adam.v_w[i]),
            (net.biases[i], grad_b[i], adam.m_b[i], adam.v_b[i]),
        ):
            m *= b1
            m += (1.0 - b1) * grads
            v *= b2
            v += (1.0 - b2) * grads**2
            params -= adam.lr * (m / bias1) / (np.sqrt(v / bias2) + adam.eps)


def train_minibatch(
    net: Mlp,
    adam: AdamState,
    inputs: np.ndarray,
    targets: np.ndarray,
    dropout_rate: float = DEFAULT_DROPOUT,
    rng: np.random.Generator | None = None,
) -> float:
    """One supervised step: dropout forward, backprop, Adam update.

    Mutates net and adam in place and returns the batch loss (evaluated with
    the dropout mask applied).
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[0] == 0:
        raise ValueError("batch must be nonempty")
    mask = None
    if dropout_rate > 0.0:
        if rng is None:
            raise ValueError("dropout requires an rng")
        keep = 1.0 - dropout_rate
        layer_dim = net.dims[DROPOUT_LAYER]
        mask = (rng.random(layer_dim) < keep) / keep  # inverted dropout
    loss, grad_w, grad_b = loss_gradients(net, inputs, targets, mask)
    if not np.isfinite(loss):
        raise TrainingDivergenceError(f"non-finite loss {loss}")
    adam_update(net, adam, grad_w, grad_b)
    return loss


@dataclass
class Dataset:
    """Append-only store of (feature vector, target action) pairs.

    Each entry carries the index of the teacher that produced its label so
    training logs can assert label provenance. An optional FIFO capacity
    evicts the oldest pairs.
    """

    capacity: int | None = None
    _inputs: list[np.ndarray] = field(default_factory=list)
    _targets: list[np.ndarray] = field(default_factory=list)
    _sources: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self._inputs)

    def add(self, features: np.ndarray, action: np.ndarray, source: int = -1) -> None:
        self._inputs.append(np.asarray(features, dtype=float).copy())
        self._targets.append(np.asarray(action, dtype=float).copy())
        self._sources.append(source)
        if self.capacity is not None and len(self._inputs) > self.capacity:
            self._inputs.pop(0)
            self._targets.pop(0)
            self._sources.pop(0)

    def sources(self) -> list[int]:
        return list(self._sources)

    def sample(self, batch_size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Uniform sample with replacement over the current contents."""
        if not self._inputs:
            raise ValueError("cannot sample from an empty dataset")
        idx = rng.integers(0, len(self._inputs), size=batch_size)
        return (
            np.stack([self._inputs[i] for i in idx]),
            np.stack([self._targets[i] for i in idx]),
        )


def save_checkpoint(path: str | Path, net: Mlp, adam: AdamState | None = None, meta: dict | None = None) -> None:
    """Write net (and optionally Adam state) as JSON with exact float round trip."""
    doc: dict = {
        "version": CHECKPOINT_VERSION,
        "dims": net.dims,
        "output_activation": net.output_activation,
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if adam is not None:
        doc["adam"] = {
            "m_w": [m.tolist() for m in adam.m_w],
            "v_w": [v.tolist() for v in adam.v_w],
            "m_b": [m.tolist() for m in adam.m_b],
            "v_b": [v.tolist() for v in adam.v_b],
            "step": adam.step,
            "lr": adam.lr,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "eps": adam.eps,
        }
    if meta:
        doc["meta"] = meta
    Path(path).write_text(json.dumps(doc) + "\n")


def load_checkpoint(path: str | Path) -> tuple[Mlp, AdamState | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    net = Mlp(
        dims=list(doc["dims"]),
        weights=[np.asarray(w, dtype=float) for w in doc["weights"]],
        biases=[np.asarray(b, dtype=float) for b in doc["biases"]],
        output_activation=doc.get("output_activation", "identity"),
    )
    adam = None
    if "adam" in doc:
        a = doc["adam"]
        adam = AdamState(
            m_w=[np.asarray(m, dtype=float) for m in a["m_w"]],
            v_w=[np.asarray(v, dtype=float) for v in a["v_w"]],
            m_b=[np.asarray(m, dtype=float) for m in a["m_b"]],
            v_b=[np.asarray(v, dtype=float) for v in a["v_b"]],
            step=int(a["step"]),
            lr=float(a["lr"]),
            beta1=float(a["beta1"]),
            beta2=float(a["beta2"]),
            eps=float(a["eps"]),
        )
    return net, adam


class MlpPolicy:
    """Inference-only policy view of an Mlp for rollouts and evaluation."""

    def __init__(self, net: Mlp):
        self.net = net

    def reset(self) -> None:
        pass

    def act(self, obs) -> np.ndarray:
        return np.clip(forward(self.net, obs.features), -1.0, 1.0)
