from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.network.layers import (
    batch_moments,
    batchnorm_apply,
    batchnorm_backward,
    conv1d_backward,
    conv1d_forward,
    relu,
)
from gazeauth.core.models import NetworkConfig
from gazeauth.core.network.params import NetworkParams, ParamTree, bn_name, conv_name

Mode = Literal["train", "eval"]


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    user_id: str = ""
    recording_id: str = ""
    window: Optional[int] = None  # None for a centroid


@dataclass
class ForwardCache:
    """
    Everything backward needs. `features` is the dense concatenation
    [x, f_0, ..., f_{L-1}] of shape (B, C+g*L, T); layer i reads its prefix of
    C+g*i channels. BN inputs are recomputed from it rather than stored.
    """
    config: NetworkConfig
    mode: Mode
    features: np.ndarray
    bn_mean: Dict[int, np.ndarray] = field(default_factory=dict)
    bn_inv_std: Dict[int, np.ndarray] = field(default_factory=dict)
    pooled: Optional[np.ndarray] = None


@dataclass
class Gradients:
    params: ParamTree
    inputs: np.ndarray


def _bn(params: NetworkParams, i: int, z: np.ndarray, mode: Mode, cache: ForwardCache) -> np.ndarray:
    """BN then ReLU on z with bn{i}; train mode uses and records batch statistics."""
    cfg = params.config
    t = params.tensors
    if mode == "train":
        mean, var = batch_moments(z)
        n = z.shape[0] * z.shape[2]
        unbiased = var * n / (n - 1) if n > 1 else var
        m = cfg.bn_momentum
        t[bn_name(i, "running_mean")] = (1 - m) * t[bn_name(i, "running_mean")] + m * mean
        t[bn_name(i, "running_var")] = (1 - m) * t[bn_name(i, "running_var")] + m * unbiased
    else:
        mean, var = t[bn_name(i, "running_mean")], t[bn_name(i, "running_var")]
    inv_std = 1.0 / np.sqrt(var + cfg.bn_epsilon)
    cache.bn_mean[i] = mean
    cache.bn_inv_std[i] = inv_std
    _, y = batchnorm_apply(z, mean, inv_std, t[bn_name(i, "gamma")], t[bn_name(i, "beta")])
    return relu(y)


def forward(params: NetworkParams, window: np.ndarray, mode: Mode = "eval") -> tuple[np.ndarray, ForwardCache]:
    """
    Embed a (C, T) window or a (B, C, T) batch. Layer 0 convolves the raw input;
    layers 1..L-1 apply BN → ReLU → conv to the concatenation of the input and all
    earlier outputs; a final BN → ReLU on the full concatenation is followed by
    global average pooling over time and the fully connected layer.

    Eval mode uses running statistics and mutates nothing; train mode uses batch
    statistics and updates only the BN running statistics.
    """
    cfg = params.config
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (cfg.input_channels, cfg.time_steps):
        raise DataError(
            f"window shape {tuple(np.shape(window))} does not match ({cfg.input_channels}, {cfg.time_steps})"
        )
    B, C, T = x.shape
    g, L = cfg.growth, cfg.num_conv_layers
    t = params.tensors

    F = np.empty((B, cfg.pooled_channels, T))
    F[:, :C] = x
    cache = ForwardCache(params.config, mode, F)

    F[:, C:C + g] = conv1d_forward(x, t[conv_name(0, "weight")], t[conv_name(0, "bias")], cfg.dilations[0])
    for i in range(1, L):
        c_in = cfg.layer_in_channels(i)
        a = _bn(params, i, F[:, :c_in], mode, cache)
        F[:, c_in:c_in + g] = conv1d_forward(a, t[conv_name(i, "weight")], t[conv_name(i, "bias")], cfg.dilations[i])

    a = _bn(params, L, F, mode, cache)
    pooled = a.mean(axis=2)
    cache.pooled = pooled
    embedding = pooled @ t["fc.weight"].T + t["fc.bias"]
    return (embedding[0] if single else embedding), cache


def backward(params: NetworkParams, cache: ForwardCache, grad_embedding: np.ndarray) -> Gradients:
    """Exact reverse-mode gradients of <grad_embedding, embedding> w.r.t. every trainable tensor and the input."""
    if cache.mode != "train":
        raise DataError("backward requires the cache of a train-mode forward")
    if cache.config != params.config:
        raise DataError("forward cache was produced by a network of a different configuration")
    cfg = params.config
    t = params.tensors
    F = cache.features
    B, P, T = F.shape
    C, g, L = cfg.input_channels, cfg.growth, cfg.num_conv_layers

    dE = np.asarray(grad_embedding, dtype=np.float64)
    if dE.ndim == 1:
        dE = dE[None]
    if dE.shape != (B, cfg.embedding_dim):
        raise DataError(f"gradient shape {dE.shape} does not match embeddings ({B}, {cfg.embedding_dim})")

    grads: ParamTree = {}
    grads["fc.weight"] = dE.T @ cache.pooled
    grads["fc.bias"] = dE.sum(axis=0)
    dpooled = dE @ t["fc.weight"]

    dF = np.zeros_like(F)

    def bn_relu_backward(i: int, z: np.ndarray, da: np.ndarray) -> np.ndarray:
        gamma, beta = t[bn_name(i, "gamma")], t[bn_name(i, "beta")]
        xhat, y = batchnorm_apply(z, cache.bn_mean[i], cache.bn_inv_std[i], gamma, beta)
        dy = da * (y > 0)
        dz, grads[bn_name(i, "gamma")], grads[bn_name(i, "beta")] = batchnorm_backward(
            dy, xhat, cache.bn_inv_std[i], gamma, batch_stats=True
        )
        return dz

    da = np.broadcast_to(dpooled[:, :, None] / T, (B, P, T))
    dF += bn_relu_backward(L, F, da)

    for i in range(L - 1, 0, -1):
        c_in = cfg.layer_in_channels(i)
        z = F[:, :c_in]
        gamma, beta = t[bn_name(i, "gamma")], t[bn_name(i, "beta")]
        _, y = batchnorm_apply(z, cache.bn_mean[i], cache.bn_inv_std[i], gamma, beta)
        da, grads[conv_name(i, "weight")], grads[conv_name(i, "bias")] = conv1d_backward(
            dF[:, c_in:c_in + g], relu(y), t[conv_name(i, "weight")], cfg.dilations[i]
        )
        dF[:, :c_in] += bn_relu_backward(i, z, da)

    dx, grads[conv_name(0, "weight")], grads[conv_name(0, "bias")] = conv1d_backward(
        dF[:, C:C + g], F[:, :C], t[conv_name(0, "weight")], cfg.dilations[0]
    )
    dF[:, :C] += dx
    return Gradients(params=grads, inputs=dF[:, :C].copy())


def embed_windows(params: NetworkParams, windows: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Eval-mode embeddings of an (N, C, T) block, in input order."""
    if windows.shape[0] == 0:
        return np.empty((0, params.config.embedding_dim))
    out = [forward(params, windows[s:s + batch_size], "eval")[0] for s in range(0, windows.shape[0], batch_size)]
    return np.concatenate(out, axis=0)


def centroid_embedding(embeddings: Sequence[Embedding] | np.ndarray) -> Embedding:
    """Elementwise mean, not re-normalized."""
    if isinstance(embeddings, np.ndarray):
        if embeddings.ndim != 2 or embeddings.shape[0] == 0:
            raise DataError("centroid needs a nonempty (n, D) array")
        return Embedding(embeddings.mean(axis=0))
    if len(embeddings) == 0:
        raise DataError("centroid of an empty embedding list")
    dims = {e.vector.shape for e in embeddings}
    if len(dims) != 1:
        raise DataError(f"embeddings have unequal dimensions {sorted(dims)}")
    first = embeddings[0]
    return Embedding(np.mean([e.vector for e in embeddings], axis=0), first.user_id, first.recording_id, None)

