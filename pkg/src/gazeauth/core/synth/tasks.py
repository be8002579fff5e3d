from typing import Tuple

import numpy as np

from gazeauth.core.base import OcularTask
from gazeauth.core.models import TaskSpec
from gazeauth.utils.hashing import stable_hash


class RandomSaccadeTask(OcularTask):
    """Jumping dot: uniform jumps within +-target_range every jump_interval +- jitter seconds."""

    def __init__(self, spec: TaskSpec):
        self.spec = spec

    def target(self, t: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, bool]:
        s = self.spec
        pos = np.zeros((t.size, 2))
        jump = 0.0
        current = np.zeros(2)
        i = 0
        while True:
            jump += s.jump_interval + rng.uniform(-s.jump_jitter, s.jump_jitter)
            j = int(np.searchsorted(t, jump, side="left"))
            pos[i:j] = current
            if j >= t.size:
                break
            current = rng.uniform(-s.target_range, s.target_range, size=2)
            i = j
        return pos, np.zeros_like(pos), False

    def hash(self) -> str:
        return stable_hash(self.spec.model_dump(mode="json"))


class SmoothPursuitTask(OcularTask):
    """
    Gliding dot: a Lissajous path, azimuth at the configured frequency and
    amplitude, elevation at half of both. Phases are drawn per recording.
    """

    def __init__(self, spec: TaskSpec):
        self.spec = spec

    def target(self, t: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, bool]:
        s = self.spec
        phase_az, phase_el = rng.uniform(0.0, 2.0 * np.pi, size=2)
        w_az = 2.0 * np.pi * s.pursuit_frequency
        w_el = 0.5 * w_az
        amp_az, amp_el = s.pursuit_amplitude, 0.5 * s.pursuit_amplitude
        pos = np.column_stack([amp_az * np.sin(w_az * t + phase_az), amp_el * np.sin(w_el * t + phase_el)])
        vel = np.column_stack([amp_az * w_az * np.cos(w_az * t + phase_az), amp_el * w_el * np.cos(w_el * t + phase_el)])
        return pos, vel, True

    def hash(self) -> str:
        return stable_hash(self.spec.model_dump(mode="json"))
