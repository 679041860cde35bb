"""Minimal dense-network substrate: forward, reverse-mode gradients, Adam.

Kept deliberately small: just enough to express the encoder/decoder pair
and the factor-importance regressor. All math is float64 numpy; training
loops are single-writer and bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, ShapeError, ValidationError

ACTIVATIONS = ("relu", "tanh", "sigmoid", "linear")


def _activate(name: str, x: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "tanh":
        return np.tanh(x)
    if name == "sigmoid":
        out = np.empty_like(x)
        pos = x >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        out[~pos] = ex / (1.0 + ex)
        return out
    return x


def _activation_grad(name: str, pre: np.ndarray, post: np.ndarray) -> np.ndarray:
    if name == "relu":
        return (pre > 0.0).astype(float)
    if name == "tanh":
        return 1.0 - post * post
    if name == "sigmoid":
        return post * (1.0 - post)
    return np.ones_like(pre)


@dataclass(frozen=True)
class Regularization:
    """Per-layer L1/L2 coefficients on weights, biases, and activations."""

    weight_l1: float = 0.0
    weight_l2: float = 0.0
    bias_l1: float = 0.0
    bias_l2: float = 0.0
    activity_l1: float = 0.0
    activity_l2: float = 0.0

    def any(self) -> bool:
        return any(v > 0 for v in (
            self.weight_l1, self.weight_l2, self.bias_l1,
            self.bias_l2, self.activity_l1, self.activity_l2,
        ))


@dataclass
class DenseLayer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str
    reg: Regularization | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[1],):
            raise ShapeError("layer weights must be (in, out) with bias (out,)")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise NumericError("layer parameters must be finite")


@dataclass
class DenseNet:
    layers: list

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weights.shape[1] != b.weights.shape[0]:
                raise ShapeError(
                    f"layer widths do not compose: {a.weights.shape} then {b.weights.shape}"
                )

    @property
    def input_width(self) -> int:
        return int(self.layers[0].weights.shape[0])

    @property
    def output_width(self) -> int:
        return int(self.layers[-1].weights.shape[1])

    def parameters(self):
        for layer in self.layers:
            yield layer.weights
            yield layer.bias


def dense_net(widths, activations, rng, init="auto", reg=None) -> DenseNet:
    """Build a net from layer widths, e.g. dense_net([4, 512, 32], ["relu", "relu"], rng).

    init "auto" draws N(0, 2/fan_in) for relu layers and N(0, 1/fan_in)
    otherwise; a float draws N(0, init^2) everywhere.
    """
    if len(activations) != len(widths) - 1:
        raise ValidationError("need one activation per layer")
    layers = []
    for fan_in, fan_out, act in zip(widths, widths[1:], activations):
        if init == "auto":
            std = np.sqrt(2.0 / fan_in) if act == "relu" else np.sqrt(1.0 / fan_in)
        else:
            std = float(init)
        w = rng.normal(0.0, std, size=(fan_in, fan_out))
        layers.append(DenseLayer(weights=w, bias=np.zeros(fan_out), activation=act, reg=reg))
    return DenseNet(layers=layers)


def forward(net: DenseNet, batch: np.ndarray):
    """Affine-then-activation composition; the cache feeds backward()."""
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != net.input_width:
        raise ShapeError(
            f"batch width {x.shape} does not match net input width {net.input_width}"
        )
    cache = []
    for layer in net.layers:
        pre = x @ layer.weights + layer.bias
        post = _activate(layer.activation, pre)
        cache.append((x, pre, post))
        x = post
    return x, cache


def regularization_loss(net: DenseNet, cache=None) -> float:
    """Penalty value matching the gradients backward() adds.

    Weight and bias penalties are absolute; activity penalties sum over
    every entry of the batch output, so they scale with batch size.
    """
    total = 0.0
    for i, layer in enumerate(net.layers):
        r = layer.reg
        if r is None or not r.any():
            continue
        total += r.weight_l1 * np.abs(layer.weights).sum()
        total += r.weight_l2 * (layer.weights ** 2).sum()
        total += r.bias_l1 * np.abs(layer.bias).sum()
        total += r.bias_l2 * (layer.bias ** 2).sum()
        if cache is not None and (r.activity_l1 > 0 or r.activity_l2 > 0):
            post = cache[i][2]
            total += r.activity_l1 * np.abs(post).sum()
            total += r.activity_l2 * (post ** 2).sum()
    return float(total)


def backward(net: DenseNet, cache, loss_grad: np.ndarray):
    """Exact gradients of the forward pass (plus configured regularizers).

    Returns ([(dW, db) per layer], gradient w.r.t. the input batch).
    """
    if len(cache) != len(net.layers):
        raise ShapeError("cache does not match network depth")
    g = np.asarray(loss_grad, dtype=float)
    if g.shape != cache[-1][2].shape:
        raise ShapeError("loss gradient shape does not match network output")
    grads = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        x, pre, post = cache[i]
        if x.shape[1] != layer.weights.shape[0]:
            raise ShapeError("stale cache: layer shapes drifted since forward()")
        r = layer.reg
        if r is not None and (r.activity_l1 > 0 or r.activity_l2 > 0):
            g = g + r.activity_l1 * np.sign(post) + 2.0 * r.activity_l2 * post
        g_pre = g * _activation_grad(layer.activation, pre, post)
        dw = x.T @ g_pre
        db = g_pre.sum(axis=0)
        if r is not None and r.any():
            dw = dw + r.weight_l1 * np.sign(layer.weights) + 2.0 * r.weight_l2 * layer.weights
            db = db + r.bias_l1 * np.sign(layer.bias) + 2.0 * r.bias_l2 * layer.bias
        grads[i] = (dw, db)
        g = g_pre @ layer.weights.T
    return grads, g


@dataclass
class AdamState:
    """Bias-corrected Adam moments, one (m, v) pair per parameter array."""

    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    moments: list = field(default_factory=list)

    @staticmethod
    def for_net(net: DenseNet, learning_rate: float = 0.001) -> "AdamState":
        moments = [(np.zeros_like(p), np.zeros_like(p)) for p in net.parameters()]
        return AdamState(learning_rate=learning_rate, moments=moments)


def adam_step(net: DenseNet, grads, state: AdamState) -> None:
    """One in-place Adam update of every layer's weights and biases."""
    flat = []
    for i, (dw, db) in enumerate(grads):
        flat.append((f"layer {i} weights", net.layers[i].weights, dw))
        flat.append((f"layer {i} bias", net.layers[i].bias, db))
    if len(flat) != len(state.moments):
        raise ShapeError("Adam state does not match network parameters")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for (name, param, grad), (m, v) in zip(flat, state.moments):
        if not np.isfinite(grad).all():
            raise NumericError(f"non-finite gradient for {name}")
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        param -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


BCE_CLAMP = 1e-7


def binary_crossentropy(pred: np.ndarray, target: np.ndarray):
    """Mean BCE over all elements and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError("prediction and target shapes differ")
    p = np.clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = p.size
    loss = -np.sum(target * np.log(p) + (1.0 - target) * np.log1p(-p)) / n
    # gradient of the composed clamp: zero where the clamp was active
    inside = (pred >= BCE_CLAMP) & (pred <= 1.0 - BCE_CLAMP)
    grad = (p - target) / (p * (1.0 - p)) / n * inside
    return float(loss), grad


def mse(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over all elements and its gradient w.r.t. pred."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise ShapeError("prediction and target shapes differ")
    diff = pred - target
    n = diff.size
    return float(np.sum(diff * diff) / n), 2.0 * diff / n


NET_FORMAT_VERSION = 1


def net_to_dict(net: DenseNet) -> dict:
    layers = []
    for layer in net.layers:
        entry = {
            "weights": layer.weights.tolist(),
            "bias": layer.bias.tolist(),
            "activation": layer.activation,
        }
        if layer.reg is not None and layer.reg.any():
            entry["reg"] = vars(layer.reg)
        layers.append(entry)
    return {"format_version": NET_FORMAT_VERSION, "layers": layers}


def net_from_dict(d: dict) -> DenseNet:
    version = d.get("format_version")
    if version != NET_FORMAT_VERSION:
        raise ValidationError(f"unsupported network format version {version!r}")
    layers = []
    for entry in d["layers"]:
        reg = Regularization(**entry["reg"]) if "reg" in entry else None
        layers.append(DenseLayer(
            weights=np.array(entry["weights"], dtype=float),
            bias=np.array(entry["bias"], dtype=float),
            activation=entry["activation"],
            reg=reg,
        ))
    return DenseNet(layers=layers)
