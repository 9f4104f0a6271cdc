"""Small fully-connected networks with manual forward/backward.

Everything is float64 numpy.  A network is a list of layers; each layer
is ``linear -> (batchnorm) -> (relu) -> (dropout)`` with the optional
stages controlled per layer.  Batch norm follows the usual convention:
batch statistics in train mode (biased variance for normalization,
unbiased for the running estimate), running statistics in eval mode.

The backward pass consumes the cache produced by ``mlp_forward`` and
returns per-layer parameter gradients plus the gradient with respect to
the network input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


@dataclass
class BatchNorm:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray


@dataclass
class Layer:
    weight: np.ndarray            # (out, in)
    bias: np.ndarray              # (out,)
    bn: BatchNorm | None = None
    activation: str = "none"      # "relu" | "none"
    dropout: float = 0.0          # applied in train mode, after activation

    def __post_init__(self):
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


@dataclass
class MlpParams:
    layers: list[Layer]

    @property
    def in_dim(self):
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self):
        return self.layers[-1].weight.shape[0]


@dataclass
class LayerGrads:
    d_weight: np.ndarray
    d_bias: np.ndarray
    d_gamma: np.ndarray | None = None
    d_beta: np.ndarray | None = None


@dataclass
class GradientBuffer:
    layers: list[LayerGrads]
    d_input: np.ndarray


def init_mlp(widths, seed, bn_hidden=True, hidden_dropout=0.0):
    """He-uniform MLP over the given widths.

    All layers but the last get relu (plus batch norm / dropout when
    requested); the final layer is plain linear.
    """
    rng = np.random.default_rng(seed)
    layers = []
    n = len(widths) - 1
    for i in range(n):
        fan_in, fan_out = widths[i], widths[i + 1]
        limit = np.sqrt(6.0 / fan_in)
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        last = i == n - 1
        bn = None
        if bn_hidden and not last:
            bn = BatchNorm(np.ones(fan_out), np.zeros(fan_out),
                           np.zeros(fan_out), np.ones(fan_out))
        layers.append(Layer(w, b, bn=bn,
                            activation="none" if last else "relu",
                            dropout=0.0 if last else hidden_dropout))
    return MlpParams(layers)


def embedding_mlp(k=256, seed=0):
    """Default point-embedding architecture 3->64->64->64->128->k."""
    return init_mlp([3, 64, 64, 64, 128, k], seed)


def classifier_head(k, n_classes, seed=0, dropout=0.3):
    """Default classifier head k->256->128->C with hidden dropout."""
    return init_mlp([k, 256, 128, n_classes], seed, hidden_dropout=dropout)


def mlp_forward(mlp, x, mode="eval", rng=None, want_cache=False):
    """Run the network on a batch ``x`` of shape (N, in_dim).

    mode="train" uses batch statistics (updating the running estimates
    in place) and applies dropout; mode="eval" is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != mlp.in_dim:
        raise ValueError(f"input shape {x.shape} does not match in_dim {mlp.in_dim}")
    caches = []
    h = x
    for layer in mlp.layers:
        c = {"x": h}
        z = h @ layer.weight.T + layer.bias
        if layer.bn is not None:
            bn = layer.bn
            if mode == "train":
                n = z.shape[0]
                mu = z.mean(axis=0)
                z -= mu
                var = np.einsum("nk,nk->k", z, z) / n
                inv_std = 1.0 / np.sqrt(var + BN_EPS)
                z *= inv_std
                xhat = z
                var_unbiased = var * (n / (n - 1.0)) if n > 1 else var
                bn.running_mean *= 1.0 - BN_MOMENTUM
                bn.running_mean += BN_MOMENTUM * mu
                bn.running_var *= 1.0 - BN_MOMENTUM
                bn.running_var += BN_MOMENTUM * var_unbiased
            else:
                inv_std = 1.0 / np.sqrt(bn.running_var + BN_EPS)
                xhat = (z - bn.running_mean) * inv_std
            a = xhat * bn.gamma
            a += bn.beta
            c["xhat"] = xhat
            c["inv_std"] = inv_std
        else:
            a = z
        if layer.activation == "relu":
            h = np.maximum(a, 0.0)
            c["a"] = a
        else:
            h = a
        if layer.dropout > 0.0 and mode == "train":
            if rng is None:
                raise ValueError("dropout in train mode needs an rng")
            keep = rng.random(h.shape) >= layer.dropout
            h = h * keep / (1.0 - layer.dropout)
            c["keep"] = keep
        caches.append(c)
    if want_cache:
        return h, {"mode": mode, "layers": caches}
    return h


def mlp_backward(mlp, cache, upstream):
    """Backprop ``upstream`` (N, out_dim) through the cached forward."""
    mode = cache["mode"]
    g = np.asarray(upstream, dtype=float)
    owned = False  # may we mutate g in place yet?
    layer_grads = [None] * len(mlp.layers)
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        c = cache["layers"][i]
        if layer.dropout > 0.0 and mode == "train":
            scale = c["keep"] / (1.0 - layer.dropout)
            if owned:
                g *= scale
            else:
                g = g * scale
                owned = True
        if layer.activation == "relu":
            mask = c["a"] > 0.0
            if owned:
                g *= mask
            else:
                g = g * mask
                owned = True
        d_gamma = d_beta = None
        if layer.bn is not None:
            bn = layer.bn
            xhat = c["xhat"]
            inv_std = c["inv_std"]
            d_gamma = np.einsum("nk,nk->k", g, xhat)
            d_beta = g.sum(axis=0)
            dxhat = g * bn.gamma
            if mode == "train":
                n = g.shape[0]
                s_cross = np.einsum("nk,nk->k", dxhat, xhat)
                g = dxhat
                g -= d_beta * bn.gamma / n
                g -= xhat * (s_cross / n)
                g *= inv_std
            else:
                dxhat *= inv_std
                g = dxhat
            owned = True
        x_in = c["x"]
        d_weight = g.T @ x_in
        d_bias = g.sum(axis=0)
        layer_grads[i] = LayerGrads(d_weight, d_bias, d_gamma, d_beta)
        g = g @ layer.weight
        owned = True
    return GradientBuffer(layer_grads, g)


def fold_batchnorm(mlp):
    """Fold batch-norm running statistics into the linear weights.

    Returns an equivalent eval-mode network with ``bn=None`` in every
    layer.  Layers without bn are copied unchanged.
    """
    layers = []
    for layer in mlp.layers:
        if layer.bn is None:
            layers.append(Layer(layer.weight.copy(), layer.bias.copy(),
                                None, layer.activation, layer.dropout))
            continue
        bn = layer.bn
        scale = bn.gamma / np.sqrt(bn.running_var + BN_EPS)
        w = layer.weight * scale[:, None]
        b = (layer.bias - bn.running_mean) * scale + bn.beta
        layers.append(Layer(w, b, None, layer.activation, layer.dropout))
    return MlpParams(layers)


def param_arrays(mlp):
    """Flat list of trainable arrays (shared references, fixed order)."""
    out = []
    for layer in mlp.layers:
        out.append(layer.weight)
        out.append(layer.bias)
        if layer.bn is not None:
            out.append(layer.bn.gamma)
            out.append(layer.bn.beta)
    return out


def grad_arrays(buf):
    """Gradient arrays in the order matching ``param_arrays``."""
    out = []
    for lg in buf.layers:
        out.append(lg.d_weight)
        out.append(lg.d_bias)
        if lg.d_gamma is not None:
            out.append(lg.d_gamma)
            out.append(lg.d_beta)
    return out


class Adam:
    """Plain Adam on a list of parameter arrays (updated in place)."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
