"""Small dense networks with hand-written backprop and Adam.

Weights are stored as ``(fan_in, fan_out)`` arrays so a batch ``X`` of shape
``(n, fan_in)`` maps to ``X @ W + b``. Hidden layers use ReLU, the output
layer is linear. Everything is float64.

Checkpoint format (text, one value per token, ``repr`` precision so floats
round-trip exactly)::

    densenet 1
    layer_sizes <n0> <n1> ... <nk>
    W0 <fan_in*fan_out values, row-major>
    b0 <fan_out values>
    W1 ...
    ...
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, NumericError, ShapeError

_net_ids = itertools.count()


class DenseNet:
    """Multi-layer perceptron: ReLU hidden layers, identity output."""

    def __init__(self, layer_sizes, rng=None, zero=False):
        layer_sizes = [int(n) for n in layer_sizes]
        if len(layer_sizes) < 2 or min(layer_sizes) < 1:
            raise ShapeError(f"invalid layer sizes {layer_sizes}")
        self.layer_sizes = layer_sizes
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            if zero:
                w = np.zeros((fan_in, fan_out))
            else:
                if rng is None:
                    raise ValueError("rng is required unless zero=True")
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
            self.weights.append(w)
            self.biases.append(np.zeros(fan_out))
        self._id = next(_net_ids)
        self.version = 0

    @property
    def n_in(self):
        return self.layer_sizes[0]

    @property
    def n_out(self):
        return self.layer_sizes[-1]

    def params(self):
        """Parameters in layer order: ``[W0, b0, W1, b1, ...]`` (live views)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def mark_updated(self):
        self.version += 1

    def copy(self):
        clone = DenseNet(self.layer_sizes, zero=True)
        clone.load_params(self.params())
        return clone

    def load_params(self, params):
        for dst, src in zip(self.params(), params, strict=True):
            if dst.shape != np.shape(src):
                raise ShapeError(f"parameter shape {np.shape(src)} != {dst.shape}")
            dst[...] = src
        self.mark_updated()

    def num_params(self):
        return sum(p.size for p in self.params())

    def __repr__(self):
        return f"DenseNet({self.layer_sizes})"


@dataclass
class ForwardCache:
    net_id: int
    version: int
    squeeze: bool
    inputs: list  # input to each layer
    preacts: list  # pre-activation of each hidden layer


def forward(net: DenseNet, x):
    """Run the network on one input vector or a batch of row vectors.

    Returns ``(output, cache)``. The cache is only valid for ``backward`` on the
    same network until its parameters change.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.n_in:
        raise ShapeError(f"expected input width {net.n_in}, got shape {x.shape}")
    inputs, preacts = [], []
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        inputs.append(h)
        z = h @ w + b
        if k < last:
            preacts.append(z)
            h = np.maximum(z, 0.0)
        else:
            h = z
    cache = ForwardCache(net._id, net.version, squeeze, inputs, preacts)
    return (h[0] if squeeze else h), cache


def backward(net: DenseNet, cache: ForwardCache, output_gradient):
    """Backpropagate ``d loss / d output`` through the cached forward pass.

    Returns ``(weight_grads, bias_grads, input_grad)``; gradients are summed
    over the batch. ReLU's subgradient at 0 is taken to be 0.
    """
    if cache.net_id != net._id or cache.version != net.version:
        raise ContractError("forward cache does not belong to the current network state")
    g = np.asarray(output_gradient, dtype=np.float64)
    if cache.squeeze:
        g = g[None, :]
    n = cache.inputs[0].shape[0]
    if g.shape != (n, net.n_out):
        raise ShapeError(f"output gradient shape {g.shape} != {(n, net.n_out)}")
    n_layers = len(net.weights)
    w_grads = [None] * n_layers
    b_grads = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        w_grads[k] = cache.inputs[k].T @ g
        b_grads[k] = g.sum(axis=0)
        g = g @ net.weights[k].T
        if k > 0:
            g = g * (cache.preacts[k - 1] > 0.0)
    return w_grads, b_grads, (g[0] if cache.squeeze else g)


def interleave(w_grads, b_grads):
    """Gradient list aligned with ``DenseNet.params()``."""
    out = []
    for gw, gb in zip(w_grads, b_grads):
        out.extend((gw, gb))
    return out


@dataclass
class AdamState:
    first_moment: list
    second_moment: list
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8

    @classmethod
    def for_params(cls, params, **kw):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], **kw)


def adam_step(params, grads, state: AdamState, learning_rate):
    """Bias-corrected Adam update, applied in place. Returns ``(params, state)``."""
    if not learning_rate >= 0:
        raise ValueError(f"learning_rate must be non-negative, got {learning_rate}")
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("params, grads and optimizer state disagree in length")
    for idx, g in enumerate(grads):
        if g.shape != params[idx].shape:
            raise ShapeError(f"gradient {idx} has shape {g.shape}, parameter {params[idx].shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in parameter {idx}")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step_count
    c2 = 1.0 - b2**state.step_count
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon_hat)
    return params, state


@dataclass
class Optimized:
    """A network bundled with its Adam state."""

    net: DenseNet
    adam: AdamState = field(default=None)

    def __post_init__(self):
        if self.adam is None:
            self.adam = AdamState.for_params(self.net.params())

    def step(self, grads, learning_rate):
        adam_step(self.net.params(), grads, self.adam, learning_rate)
        self.net.mark_updated()


# -- checkpoints ------------------------------------------------------------

def dumps_net(net: DenseNet) -> str:
    lines = ["densenet 1", "layer_sizes " + " ".join(str(n) for n in net.layer_sizes)]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{k} " + " ".join(repr(float(v)) for v in w.ravel()))
        lines.append(f"b{k} " + " ".join(repr(float(v)) for v in b))
    return "\n".join(lines) + "\n"


def loads_net(text: str) -> DenseNet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split() != ["densenet", "1"]:
        raise ValueError("not a densenet checkpoint")
    head, *sizes = lines[1].split()
    if head != "layer_sizes":
        raise ValueError("missing layer_sizes record")
    net = DenseNet([int(s) for s in sizes], zero=True)
    body = lines[2:]
    if len(body) != 2 * len(net.weights):
        raise ValueError("wrong number of parameter records")
    params = net.params()
    for k, (line, p) in enumerate(zip(body, params)):
        tag, *vals = line.split()
        expect = f"{'W' if k % 2 == 0 else 'b'}{k // 2}"
        if tag != expect or len(vals) != p.size:
            raise ValueError(f"bad record {tag!r}, expected {expect} with {p.size} values")
        p[...] = np.array([float(v) for v in vals]).reshape(p.shape)
    net.mark_updated()
    return net
