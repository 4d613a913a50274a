"""Small fully connected network with hand-written backprop.

The network maps ``[x, t_feature]`` (length d + 1) to a d-vector. Hidden
layers apply a smooth activation; the output layer is affine. Everything is
float64, weights are stored ``(fan_in, fan_out)`` so a batch ``X`` of shape
``(B, fan_in)`` propagates as ``X @ W + b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("tanh", "silu", "softplus")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return np.tanh(z)
    if name == "silu":
        return z * _sigmoid(z)
    if name == "softplus":
        return np.logaddexp(0.0, z)
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    if name == "tanh":
        return 1.0 - a * a
    if name == "silu":
        sg = _sigmoid(z)
        return sg * (1.0 + z * (1.0 - sg))
    if name == "softplus":
        return _sigmoid(z)
    raise ValueError(f"unknown activation {name!r}")


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class MlpParams:
    layer_dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "silu"

    def __post_init__(self):
        self.layer_dims = tuple(int(k) for k in self.layer_dims)
        _check_dims(self.layer_dims)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("need one weight matrix and bias per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise ValueError(f"layer {i}: expected W{shape}, b({shape[1]},), got {w.shape}, {b.shape}")

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def out_dim(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_dims, [w.copy() for w in self.weights],
                         [b.copy() for b in self.biases], self.activation)

    def arrays(self) -> list[np.ndarray]:
        """Weights and biases interleaved: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec: np.ndarray) -> "MlpParams":
        vec = np.asarray(vec, dtype=np.float64)
        ws, bs, pos = [], [], 0
        for i in range(len(self.layer_dims) - 1):
            fi, fo = self.layer_dims[i], self.layer_dims[i + 1]
            ws.append(vec[pos:pos + fi * fo].reshape(fi, fo).copy())
            pos += fi * fo
            bs.append(vec[pos:pos + fo].copy())
            pos += fo
        if pos != vec.size:
            raise ValueError(f"flat vector has {vec.size} entries, expected {pos}")
        return MlpParams(self.layer_dims, ws, bs, self.activation)

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


def _check_dims(dims):
    if len(dims) < 2 or any(k < 1 for k in dims):
        raise ValueError(f"layer_dims needs >= 2 positive sizes, got {dims}")


def init_params(layer_dims, seed: int, activation: str = "silu") -> MlpParams:
    """Normal weights with variance 1/fan_in, zero biases."""
    dims = tuple(int(k) for k in layer_dims)
    _check_dims(dims)
    rng = np.random.Generator(np.random.Philox(seed))
    ws = [rng.standard_normal((fi, fo)) / np.sqrt(fi) for fi, fo in zip(dims[:-1], dims[1:])]
    bs = [np.zeros(fo) for fo in dims[1:]]
    return MlpParams(dims, ws, bs, activation)


def default_layer_dims(data_dim: int, width: int = 128, depth: int = 3) -> tuple[int, ...]:
    return (data_dim + 1,) + (width,) * depth + (data_dim,)


def _inputs(p: MlpParams, x, t_feature):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    t = np.broadcast_to(np.asarray(t_feature, dtype=np.float64), (x2.shape[0],))
    if x2.shape[1] + 1 != p.in_dim:
        raise ValueError(f"network expects {p.in_dim - 1} features, got {x2.shape[1]}")
    if not (np.all(np.isfinite(x2)) and np.all(np.isfinite(t))):
        raise ValueError("network input is not finite")
    return np.column_stack([x2, t]), single


def predict(p: MlpParams, x, t_feature) -> np.ndarray:
    """Forward pass for a point ``(d,)`` or a batch ``(B, d)``.

    ``t_feature`` is a scalar or one value per batch row.
    """
    h, single = _inputs(p, x, t_feature)
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        h = h @ w + b
        if i < last:
            h = _act(p.activation, h)
    return h[0] if single else h


def mlp_forward(p: MlpParams, x, t_feature) -> np.ndarray:
    return predict(p, x, t_feature)


def mlp_backward(p: MlpParams, x, t_feature, target, row_weight=None) -> tuple[float, Gradients]:
    """Loss ``mean_b w_b ||target_b - f(x_b, t_b)||^2`` and its exact gradient.

    ``row_weight`` defaults to 1 for every row.
    """
    h, _ = _inputs(p, x, t_feature)
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if h.shape[0] == 0:
        raise ValueError("empty batch")
    if target.shape != (h.shape[0], p.out_dim):
        raise ValueError(f"target shape {target.shape} != {(h.shape[0], p.out_dim)}")
    if row_weight is not None:
        row_weight = np.asarray(row_weight, dtype=np.float64).reshape(-1, 1)
        if row_weight.shape[0] != h.shape[0] or np.any(row_weight < 0):
            raise ValueError("row_weight needs one nonnegative value per batch row")

    last = len(p.weights) - 1
    inputs, pre, post = [], [], []
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        inputs.append(h)
        z = h @ w + b
        if i < last:
            a = _act(p.activation, z)
            pre.append(z)
            post.append(a)
            h = a
        else:
            h = z

    m = h.shape[0]
    resid = h - target
    if row_weight is None:
        loss = float(np.sum(resid * resid) / m)
    else:
        loss = float(np.sum(row_weight * resid * resid) / m)
        resid = row_weight * resid

    gws = [None] * len(p.weights)
    gbs = [None] * len(p.biases)
    delta = (2.0 / m) * resid
    for i in range(last, -1, -1):
        gws[i] = inputs[i].T @ delta
        gbs[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ p.weights[i].T) * _act_grad(p.activation, pre[i - 1], post[i - 1])
    return loss, Gradients(gws, gbs)


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "adam"  # "adam" or "sgd"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ValueError(f"optimizer kind must be 'adam' or 'sgd', got {self.kind!r}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning rate must be positive, got {self.learning_rate}")


@dataclass
class OptimizerState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def optimizer_step(
    p: MlpParams,
    g: Gradients,
    state: OptimizerState,
    cfg: OptimizerConfig,
) -> tuple[MlpParams, OptimizerState]:
    """Apply one update. Inputs are not modified."""
    params = p.arrays()
    grads = g.arrays()
    if len(params) != len(grads) or any(a.shape != b.shape for a, b in zip(params, grads)):
        raise ValueError("gradient shapes do not match parameters")
    if not all(np.all(np.isfinite(a)) for a in grads):
        raise FloatingPointError("non-finite gradient")

    lr = cfg.learning_rate
    if cfg.kind == "sgd":
        new = [w - lr * dw for w, dw in zip(params, grads)]
        state = OptimizerState(step=state.step + 1)
    else:
        m = state.m or [np.zeros_like(a) for a in params]
        v = state.v or [np.zeros_like(a) for a in params]
        step = state.step + 1
        m = [cfg.beta1 * mi + (1 - cfg.beta1) * gi for mi, gi in zip(m, grads)]
        v = [cfg.beta2 * vi + (1 - cfg.beta2) * gi * gi for vi, gi in zip(v, grads)]
        c1 = 1 - cfg.beta1 ** step
        c2 = 1 - cfg.beta2 ** step
        new = [w - lr * (mi / c1) / (np.sqrt(vi / c2) + cfg.eps) for w, mi, vi in zip(params, m, v)]
        state = OptimizerState(step=step, m=m, v=v)
    return MlpParams(p.layer_dims, new[0::2], new[1::2], p.activation), state
