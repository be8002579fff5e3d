from dataclasses import dataclass, field

import numpy as np

from gazeauth.core.models import AdamConfig
from gazeauth.core.network.params import NetworkParams, ParamTree


@dataclass
class OptimizerState:
    m: ParamTree = field(default_factory=dict)
    v: ParamTree = field(default_factory=dict)
    step: int = 0


class Adam:
    """Adam with bias correction over the trainable tensors of a NetworkParams."""

    def __init__(self, params: NetworkParams, config: AdamConfig = AdamConfig()):
        self.config = config
        self.state = OptimizerState(
            m={name: np.zeros_like(t) for name, t in params.trainable()},
            v={name: np.zeros_like(t) for name, t in params.trainable()},
        )

    def step(self, params: NetworkParams, grads: ParamTree, lr: float) -> None:
        cfg, st = self.config, self.state
        st.step += 1
        bc1 = 1.0 - cfg.beta1 ** st.step
        bc2 = 1.0 - cfg.beta2 ** st.step
        for name, _ in params.trainable():
            g = grads[name]
            st.m[name] = cfg.beta1 * st.m[name] + (1.0 - cfg.beta1) * g
            st.v[name] = cfg.beta2 * st.v[name] + (1.0 - cfg.beta2) * g * g
            update = lr * (st.m[name] / bc1) / (np.sqrt(st.v[name] / bc2) + cfg.eps)
            params.tensors[name] = params.tensors[name] - update
