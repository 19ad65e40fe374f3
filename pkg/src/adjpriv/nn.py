"""Small dense feed-forward network engine.

Networks are described by a :class:`NetworkSpec` (an ordered list of affine
layers, each with an activation and an optional input dropout) and carry their
weights in a :class:`NetworkParams`. Everything operates on batches: inputs are
``(batch, in_dim)`` arrays, although a single 1-D vector is accepted too.

Backpropagation is written out by hand for the fixed layer vocabulary, and
:func:`adam_step` implements the bias-corrected Adam update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError

ACTIVATIONS = ("relu", "leaky_relu", "sigmoid", "log_softmax", "none")
INIT_VARIANCE = 0.02


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "none"
    dropout_p: float = 0.0
    negative_slope: float = 0.01  # leaky_relu only

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}->{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ValueError("a network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer {i} outputs {a.out_dim} but layer {i + 1} expects {b.in_dim}"
                )
        for layer in self.layers[:-1]:
            if layer.activation == "log_softmax":
                raise ValueError("log_softmax is only allowed on the final layer")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @classmethod
    def chain(cls, dims, activations, dropouts=None) -> NetworkSpec:
        """Build a spec from a width list, e.g. ``chain([102, 128, 64], ["relu", "relu"])``."""
        n = len(dims) - 1
        if isinstance(activations, str):
            activations = [activations] * n
        dropouts = [0.0] * n if dropouts is None else list(dropouts)
        if len(activations) != n or len(dropouts) != n:
            raise ValueError("need one activation and one dropout per layer")
        return cls(tuple(
            LayerSpec(dims[i], dims[i + 1], activations[i], dropouts[i]) for i in range(n)
        ))


@dataclass
class NetworkParams:
    weights: list[np.ndarray]  # each (out_dim, in_dim)
    biases: list[np.ndarray]   # each (out_dim,)

    def copy(self) -> NetworkParams:
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def check(self, spec: NetworkSpec):
        if len(self.weights) != len(spec.layers) or len(self.biases) != len(spec.layers):
            raise ValueError("parameter count does not match the network spec")
        for i, layer in enumerate(spec.layers):
            if self.weights[i].shape != (layer.out_dim, layer.in_dim):
                raise ValueError(f"layer {i} weight has shape {self.weights[i].shape}")
            if self.biases[i].shape != (layer.out_dim,):
                raise ValueError(f"layer {i} bias has shape {self.biases[i].shape}")


@dataclass
class GradientBundle:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    inputs: np.ndarray | None = None  # gradient w.r.t. the network input

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: NetworkParams, **hyper) -> AdamState:
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **hyper)

    def copy(self) -> AdamState:
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v],
                         self.t, self.beta1, self.beta2, self.eps)


@dataclass
class ForwardCache:
    spec: NetworkSpec
    squeeze: bool
    inputs: list[np.ndarray] = field(default_factory=list)   # layer inputs after dropout
    masks: list[np.ndarray | None] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)  # post-activation
    pre: list[np.ndarray] = field(default_factory=list)      # pre-activation


def init_network(spec: NetworkSpec, seed, variance: float = INIT_VARIANCE) -> NetworkParams:
    """Weights ~ N(0, variance) i.i.d., biases zero."""
    rng = np.random.default_rng(seed)
    std = np.sqrt(variance)
    weights = [rng.normal(0.0, std, size=(l.out_dim, l.in_dim)) for l in spec.layers]
    biases = [np.zeros(l.out_dim) for l in spec.layers]
    return NetworkParams(weights, biases)


def _activate(name: str, z: np.ndarray, slope: float) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "leaky_relu":
        return np.where(z > 0, z, slope * z)
    if name == "sigmoid":
        # split by sign to avoid overflow in exp
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    if name == "log_softmax":
        zmax = z.max(axis=-1, keepdims=True)
        shifted = z - zmax
        return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return z


def _activate_grad(name: str, z: np.ndarray, a: np.ndarray, upstream: np.ndarray,
                   slope: float) -> np.ndarray:
    if name == "relu":
        return upstream * (z > 0)
    if name == "leaky_relu":
        return upstream * np.where(z > 0, 1.0, slope)
    if name == "sigmoid":
        return upstream * a * (1.0 - a)
    if name == "log_softmax":
        return upstream - np.exp(a) * upstream.sum(axis=-1, keepdims=True)
    return upstream


def forward(spec: NetworkSpec, params: NetworkParams, x, train: bool = False,
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Evaluate the network on ``x`` (one record or a batch of rows).

    In training mode each layer applies inverted dropout to its input, drawing
    masks from ``rng``; in eval mode dropout is the identity.
    """
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.ndim != 2 or h.shape[1] != spec.in_dim:
        raise ValueError(f"expected input width {spec.in_dim}, got shape {x.shape}")
    cache = ForwardCache(spec, squeeze)
    for layer, w, b in zip(spec.layers, params.weights, params.biases):
        mask = None
        if train and layer.dropout_p > 0:
            if rng is None:
                raise ValueError("train-mode dropout needs an rng")
            keep = 1.0 - layer.dropout_p
            mask = (rng.random(h.shape) < keep) / keep
            h = h * mask
        z = h @ w.T + b
        a = _activate(layer.activation, z, layer.negative_slope)
        cache.inputs.append(h)
        cache.masks.append(mask)
        cache.pre.append(z)
        cache.outputs.append(a)
        h = a
    return (h[0] if squeeze else h), cache


def predict(spec: NetworkSpec, params: NetworkParams, x) -> np.ndarray:
    return forward(spec, params, x)[0]


def backward(spec: NetworkSpec, params: NetworkParams, cache: ForwardCache,
             upstream) -> GradientBundle:
    """Gradients of a scalar loss given ``upstream`` = dLoss/d(output).

    Per-record contributions are summed over the batch, so the loss that
    produced ``upstream`` decides the batch reduction (mean or sum).
    """
    if cache.spec != spec or len(cache.outputs) != len(spec.layers):
        raise ValueError("forward cache does not belong to this network")
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    if g.shape != cache.outputs[-1].shape:
        raise ValueError(f"upstream gradient shape {g.shape} != output {cache.outputs[-1].shape}")
    n = len(spec.layers)
    dw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for i in reversed(range(n)):
        layer = spec.layers[i]
        w = params.weights[i]
        if w.shape != (layer.out_dim, layer.in_dim):
            raise ValueError(f"layer {i} weight shape mismatch")
        dz = _activate_grad(layer.activation, cache.pre[i], cache.outputs[i], g,
                            layer.negative_slope)
        dw[i] = dz.T @ cache.inputs[i]
        db[i] = dz.sum(axis=0)
        g = dz @ w
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
    return GradientBundle(dw, db, g[0] if cache.squeeze else g)


def mse_loss(x, x_rec) -> tuple[float, np.ndarray]:
    """Mean squared error over all entries, with its gradient w.r.t. ``x_rec``."""
    x = np.asarray(x, dtype=float)
    x_rec = np.asarray(x_rec, dtype=float)
    if x.shape != x_rec.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {x_rec.shape}")
    diff = x_rec - x
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def nll_loss(log_probs, labels) -> tuple[float, np.ndarray]:
    """Negative log-likelihood averaged over the batch.

    For a single record, ``log_probs`` is 1-D and ``labels`` an int.
    """
    lp = np.asarray(log_probs, dtype=float)
    squeeze = lp.ndim == 1
    lp2 = np.atleast_2d(lp)
    y = np.atleast_1d(np.asarray(labels))
    if y.shape[0] != lp2.shape[0]:
        raise ValueError("one label per row required")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.mod(y, 1) == 0):
            raise ValueError("labels must be integer class indices")
        y = y.astype(np.int64)
    if np.any(y < 0) or np.any(y >= lp2.shape[1]):
        raise ValueError(f"label out of range for {lp2.shape[1]} classes")
    rows = np.arange(lp2.shape[0])
    loss = -lp2[rows, y].mean()
    grad = np.zeros_like(lp2)
    grad[rows, y] = -1.0 / lp2.shape[0]
    return float(loss), (grad[0] if squeeze else grad)


def adam_step(params: NetworkParams, grads: GradientBundle, state: AdamState,
              lr: float) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam update; returns new params and state."""
    garrays = grads.arrays()
    parrays = params.arrays()
    if len(garrays) != len(parrays):
        raise ValueError("gradient bundle does not match params")
    for p, g in zip(parrays, garrays):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient passed to adam_step")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(parrays, garrays, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        step = lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_p.append(p - step)
        new_m.append(m)
        new_v.append(v)
    k = len(params.weights)
    return (NetworkParams(new_p[:k], new_p[k:]),
            AdamState(new_m, new_v, t, b1, b2, state.eps))


def param_count(spec: NetworkSpec) -> int:
    return sum(l.in_dim * l.out_dim + l.out_dim for l in spec.layers)
