from dataclasses import dataclass
from typing import Dict, Iterator, List

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.models import NetworkConfig

ParamTree = Dict[str, np.ndarray]


def conv_name(i: int, what: str) -> str:
    return f"conv{i}.{what}"


def bn_name(i: int, what: str) -> str:
    return f"bn{i}.{what}"


@dataclass
class NetworkParams:
    """
    Weights of the dense dilated-convolution embedder, keyed by name:

      conv{i}.weight (g, C+g*i, k), conv{i}.bias (g,)            i = 0..L-1
      bn{i}.gamma/beta/running_mean/running_var (C+g*i,)          i = 1..L
      fc.weight (D, C+g*L), fc.bias (D,)

    bn{i} for i < L precedes conv{i}; bn{L} normalizes the full concatenation.
    """
    config: NetworkConfig
    tensors: ParamTree

    def trainable_names(self) -> List[str]:
        L = self.config.num_conv_layers
        names = []
        for i in range(L):
            names += [conv_name(i, "weight"), conv_name(i, "bias")]
        for i in range(1, L + 1):
            names += [bn_name(i, "gamma"), bn_name(i, "beta")]
        return names + ["fc.weight", "fc.bias"]

    def buffer_names(self) -> List[str]:
        L = self.config.num_conv_layers
        return [bn_name(i, w) for i in range(1, L + 1) for w in ("running_mean", "running_var")]

    def trainable(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in self.trainable_names():
            yield name, self.tensors[name]

    def expected_shapes(self) -> Dict[str, tuple]:
        cfg = self.config
        g, k, L = cfg.growth, cfg.kernel_size, cfg.num_conv_layers
        shapes: Dict[str, tuple] = {}
        for i in range(L):
            shapes[conv_name(i, "weight")] = (g, cfg.layer_in_channels(i), k)
            shapes[conv_name(i, "bias")] = (g,)
        for i in range(1, L + 1):
            for what in ("gamma", "beta", "running_mean", "running_var"):
                shapes[bn_name(i, what)] = (cfg.layer_in_channels(i),)
        shapes["fc.weight"] = (cfg.embedding_dim, cfg.pooled_channels)
        shapes["fc.bias"] = (cfg.embedding_dim,)
        return shapes

    def validate(self) -> None:
        expected = self.expected_shapes()
        if set(expected) != set(self.tensors):
            missing = sorted(set(expected) - set(self.tensors))
            extra = sorted(set(self.tensors) - set(expected))
            raise DataError(f"parameter set mismatch: missing={missing} unexpected={extra}")
        for name, shape in expected.items():
            t = self.tensors[name]
            if t.shape != shape:
                raise DataError(f"{name} has shape {t.shape}, expected {shape}")
            if not np.all(np.isfinite(t)):
                raise DataError(f"{name} contains non-finite values")
        for name in self.buffer_names():
            if name.endswith("running_var") and np.any(self.tensors[name] <= 0):
                raise DataError(f"{name} must be strictly positive")

    @property
    def n_trainable(self) -> int:
        return int(sum(t.size for _, t in self.trainable()))

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.config, {k: v.copy() for k, v in self.tensors.items()})

    def to_dict(self) -> Dict[str, list]:
        return {name: self.tensors[name].tolist() for name in sorted(self.tensors)}

    @classmethod
    def from_dict(cls, config: NetworkConfig, d: Dict[str, list]) -> "NetworkParams":
        params = cls(config, {k: np.asarray(v, dtype=np.float64) for k, v in d.items()})
        params.validate()
        return params


def init_params(config: NetworkConfig, seed: int) -> NetworkParams:
    """
    Conv and FC weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in =
    in_channels * kernel (conv) or pooled channels (FC). BN starts at gamma=1,
    beta=0, running mean 0, running var 1. Draw order is fixed, so seed → params.
    """
    rng = np.random.default_rng(seed)
    g, k, L = config.growth, config.kernel_size, config.num_conv_layers
    tensors: ParamTree = {}
    for i in range(L):
        c_in = config.layer_in_channels(i)
        bound = 1.0 / np.sqrt(c_in * k)
        tensors[conv_name(i, "weight")] = rng.uniform(-bound, bound, size=(g, c_in, k))
        tensors[conv_name(i, "bias")] = rng.uniform(-bound, bound, size=(g,))
    for i in range(1, L + 1):
        c = config.layer_in_channels(i)
        tensors[bn_name(i, "gamma")] = np.ones(c)
        tensors[bn_name(i, "beta")] = np.zeros(c)
        tensors[bn_name(i, "running_mean")] = np.zeros(c)
        tensors[bn_name(i, "running_var")] = np.ones(c)
    bound = 1.0 / np.sqrt(config.pooled_channels)
    tensors["fc.weight"] = rng.uniform(-bound, bound, size=(config.embedding_dim, config.pooled_channels))
    tensors["fc.bias"] = rng.uniform(-bound, bound, size=(config.embedding_dim,))
    return NetworkParams(config, tensors)
