import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.models import COMPONENTS, ChannelSpec, SignalConfig
from gazeauth.core.signal.recording import GazeRecording
from gazeauth.core.signal.velocity import clamp_velocity, savgol_velocity

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VelocityWindow:
    user_id: str
    recording_id: str
    index: int
    data: np.ndarray  # (C, T) degrees/second, or standardized units after normalization


@dataclass(frozen=True)
class NormalizationStats:
    """Per-channel mean and SD of clamped training velocities."""
    mean: np.ndarray
    sd: np.ndarray
    channel_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        sd = np.asarray(self.sd, dtype=np.float64).reshape(-1)
        if mean.shape != sd.shape:
            raise DataError("mean and sd must have the same length")
        if np.any(~(sd > 0)):
            raise DataError(f"standard deviations must be > 0, got {sd.tolist()}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)

    @property
    def channels(self) -> int:
        return int(self.mean.size)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        """x is (..., C, T)."""
        return (x - self.mean[:, None]) / self.sd[:, None]

    def denormalize(self, z: np.ndarray) -> np.ndarray:
        return z * self.sd[:, None] + self.mean[:, None]

    def to_dict(self) -> Dict[str, list]:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist(), "channel_names": list(self.channel_names)}

    @classmethod
    def from_dict(cls, d: Dict[str, list]) -> "NormalizationStats":
        return cls(np.array(d["mean"]), np.array(d["sd"]), tuple(d.get("channel_names", ())))


def select_channels(recording: GazeRecording, spec: ChannelSpec) -> np.ndarray:
    """(C, n) angular positions in the channel set's canonical order."""
    return np.stack(
        [recording.channel(e, a, c) for e in spec.eyes for a in spec.axes for c in COMPONENTS]
    )


def partition_windows(
    recording: GazeRecording,
    spec: ChannelSpec,
    stats: Optional[NormalizationStats] = None,
    config: SignalConfig = SignalConfig(),
) -> List[VelocityWindow]:
    """
    Differentiate, clamp and cut a recording into non-overlapping windows of
    `config.window_samples`; the trailing remainder is dropped. Recordings shorter
    than one window give an empty list.
    """
    if stats is not None and stats.channels != spec.channel_count:
        raise DataError(
            f"normalization stats have {stats.channels} channels, channel spec {spec.label} has {spec.channel_count}"
        )
    T = config.window_samples
    k = recording.n_samples // T
    if k == 0:
        return []

    velocity = savgol_velocity(
        select_channels(recording, spec),
        recording.sample_rate,
        config.sg_window_length,
        config.sg_poly_order,
    )
    velocity = clamp_velocity(velocity, config.clamp)
    blocks = velocity[:, : k * T].reshape(spec.channel_count, k, T).transpose(1, 0, 2)
    if stats is not None:
        blocks = stats.normalize(blocks)

    return [
        VelocityWindow(recording.user_id, recording.recording_id, i, np.ascontiguousarray(blocks[i]))
        for i in range(k)
    ]


def stack_windows(windows: Sequence[VelocityWindow]) -> np.ndarray:
    if not windows:
        raise DataError("no windows to stack")
    return np.stack([w.data for w in windows])


def compute_norm_stats(
    windows: Sequence[VelocityWindow] | np.ndarray, channel_names: Sequence[str] = ()
) -> NormalizationStats:
    """Two-pass population mean/SD per channel over every window and time step."""
    x = windows if isinstance(windows, np.ndarray) else stack_windows(windows)
    if x.ndim != 3 or x.shape[0] == 0:
        raise DataError("normalization needs a nonempty (N, C, T) window set")
    mean = x.mean(axis=(0, 2))
    sd = np.sqrt(((x - mean[None, :, None]) ** 2).mean(axis=(0, 2)))
    for c in np.flatnonzero(~(sd > 0)):
        name = channel_names[c] if c < len(channel_names) else f"#{c}"
        raise DataError(f"channel {name} has zero variance over the training windows")
    logger.debug("normalization stats over %d windows: mean=%s sd=%s", x.shape[0], mean, sd)
    return NormalizationStats(mean, sd, tuple(channel_names))
