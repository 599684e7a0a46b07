"""Small dense networks with hand-written reverse-mode gradients.

Inputs are batched as ``(n, width)`` arrays; a 1-D vector is treated as a
batch of one and returned with the same rank it came in with.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass
class MLP:
    """Affine layers with SiLU between them; the last layer is affine only."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("need one bias per weight matrix")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.ndim != 2 or b.shape != (W.shape[1],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not fit weight {W.shape}")
            if i and W.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i}: input width {W.shape[0]} != previous output")

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MLP":
        return MLP([W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def __call__(self, x):
        return forward(self, x)


def init_mlp(widths, rng: np.random.Generator) -> MLP:
    """He-style initialisation; the output layer starts at zero."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError(f"bad layer widths {widths}")
    weights, biases = [], []
    for i, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        if i == len(widths) - 2:
            W = np.zeros((a, b))
        else:
            W = rng.standard_normal((a, b)) * np.sqrt(2.0 / a)
        weights.append(W)
        biases.append(np.zeros(b))
    return MLP(weights, biases)


def _as_batch(net: MLP, x):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    x2 = x[None, :] if squeeze else x
    if x2.ndim != 2 or x2.shape[1] != net.in_dim:
        raise ValueError(f"input width {x2.shape[-1]} does not match network input {net.in_dim}")
    return x2, squeeze


def _forward_cache(net: MLP, x2):
    pre, acts = [], [x2]
    h = x2
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        a = h @ W + b
        pre.append(a)
        h = a if i == last else silu(a)
        acts.append(h)
    return pre, acts


def forward(net: MLP, x):
    x2, squeeze = _as_batch(net, x)
    out = _forward_cache(net, x2)[1][-1]
    return out[0] if squeeze else out


def _backward(net: MLP, x2, upstream, need_params=True):
    pre, acts = _forward_cache(net, x2)
    g = upstream
    grads = []
    for i in range(len(net.weights) - 1, -1, -1):
        if i != len(net.weights) - 1:
            g = g * silu_grad(pre[i])
        if need_params:
            grads.append((acts[i].T @ g, g.sum(axis=0)))
        g = g @ net.weights[i].T
    grads.reverse()
    flat = []
    for gW, gb in grads:
        flat += [gW, gb]
    return flat, g


def _upstream_batch(net: MLP, upstream, n, squeeze):
    u = np.asarray(upstream, dtype=float)
    u2 = u[None, :] if squeeze and u.ndim == 1 else u
    if u2.shape != (n, net.out_dim):
        raise ValueError(f"upstream shape {u.shape} does not match output ({n}, {net.out_dim})")
    return u2


def param_gradients(net: MLP, x, upstream) -> list[np.ndarray]:
    """Gradients of ``sum(upstream * forward(net, x))`` w.r.t. every parameter.

    Returned in the order of ``net.params()``; batch rows are summed.
    """
    x2, squeeze = _as_batch(net, x)
    u2 = _upstream_batch(net, upstream, x2.shape[0], squeeze)
    return _backward(net, x2, u2)[0]


def input_vjp(net: MLP, x, upstream):
    """Vector-Jacobian product w.r.t. the input, row by row."""
    x2, squeeze = _as_batch(net, x)
    u2 = _upstream_batch(net, upstream, x2.shape[0], squeeze)
    g = _backward(net, x2, u2, need_params=False)[1]
    return g[0] if squeeze else g


def log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class LogSoftmaxHead:
    """Scalar head ``log softmax(logits)[index]``."""

    def __init__(self, index: int):
        self.index = int(index)

    def _check(self, logits):
        if not 0 <= self.index < logits.shape[-1]:
            raise ValueError(f"class index {self.index} outside 0..{logits.shape[-1] - 1}")

    def value(self, logits):
        self._check(logits)
        return log_softmax(logits)[..., self.index]

    def grad(self, logits):
        self._check(logits)
        g = -np.exp(log_softmax(logits))
        g[..., self.index] += 1.0
        return g


class LogMixtureHead:
    """Scalar head ``log sum_i c_i softmax_i(logits)`` for positive ``c``."""

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.ndim != 1 or np.any(c <= 0):
            raise ValueError("mixture coefficients must be a positive vector")
        self.log_c = np.log(c)

    def _check(self, logits):
        if logits.shape[-1] != self.log_c.size:
            raise ValueError(f"{self.log_c.size} coefficients for {logits.shape[-1]} classes")

    def value(self, logits):
        self._check(logits)
        a = log_softmax(logits) + self.log_c
        m = a.max(axis=-1, keepdims=True)
        return (m + np.log(np.exp(a - m).sum(axis=-1, keepdims=True)))[..., 0]

    def grad(self, logits):
        # d/dz log sum_i c_i p_i = r - p with r_i = c_i p_i / sum_j c_j p_j
        self._check(logits)
        lp = log_softmax(logits)
        a = lp + self.log_c
        r = np.exp(a - a.max(axis=-1, keepdims=True))
        r /= r.sum(axis=-1, keepdims=True)
        return r - np.exp(lp)


def input_gradient(net: MLP, x, head):
    """Gradient of ``head.value(forward(net, x))`` w.r.t. the input."""
    x2, squeeze = _as_batch(net, x)
    logits = _forward_cache(net, x2)[1][-1]
    g = _backward(net, x2, head.grad(logits), need_params=False)[1]
    return g[0] if squeeze else g


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_net(cls, net: MLP, **kwargs) -> "AdamState":
        ps = net.params()
        return cls(m=[np.zeros_like(p) for p in ps], v=[np.zeros_like(p) for p in ps], **kwargs)


def optimizer_step(net: MLP, state: AdamState, gradients) -> tuple[MLP, AdamState]:
    """One Adam update, applied in place; returns ``(net, state)`` for chaining."""
    params = net.params()
    if len(gradients) != len(params) or any(g.shape != p.shape for g, p in zip(gradients, params)):
        raise ValueError("gradient shapes do not mirror the network parameters")
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, gradients, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return net, state


def flat_params(net: MLP) -> np.ndarray:
    return np.concatenate([p.ravel() for p in net.params()])


def set_flat_params(net: MLP, flat) -> MLP:
    flat = np.asarray(flat, dtype=float)
    sizes = [p.size for p in net.params()]
    if flat.size != sum(sizes):
        raise ValueError(f"expected {sum(sizes)} parameters, got {flat.size}")
    i = 0
    for p in net.params():
        p[...] = flat[i:i + p.size].reshape(p.shape)
        i += p.size
    return net


def time_features(t, T: int, width: int = 8):
    """Noise-level features: ``t/T`` followed by low-frequency sinusoids.

    ``t`` may be a scalar or an integer array; the result has one extra
    trailing axis of size ``width``.
    """
    t = np.asarray(t)
    if width < 1:
        raise ValueError("width must be positive")
    if np.any(t < 1) or np.any(t > T):
        raise ValueError(f"step index outside 1..{T}")
    s = t.astype(float) / T
    cols = [s]
    k = 0
    while len(cols) < width:
        freq = np.pi * 2.0 ** (k // 2)
        cols.append(np.sin(freq * s) if k % 2 == 0 else np.cos(freq * s))
        k += 1
    return np.stack(cols, axis=-1)
