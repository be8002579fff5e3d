import numpy as np
from scipy.signal import savgol_filter

from gazeauth.core.errors import ConfigError, DataError

CLAMP_LIMIT = 1000.0


def savgol_velocity(
    positions: np.ndarray,
    sample_rate: float,
    window_length: int = 7,
    poly_order: int = 2,
) -> np.ndarray:
    """
    First derivative (units/s) of a least-squares polynomial fitted to the centered
    window around every sample. Edges are mirror padded (edge sample not repeated).
    Works along the last axis, so a (C, n) block is differentiated channel-wise.
    """
    if window_length % 2 != 1 or window_length < 1:
        raise ConfigError(f"window_length must be a positive odd integer, got {window_length}")
    if not (0 <= poly_order < window_length):
        raise ConfigError(f"poly_order must be in [0, window_length), got {poly_order}")
    x = np.asarray(positions, dtype=np.float64)
    if x.shape[-1] < window_length:
        raise DataError(f"sequence of {x.shape[-1]} samples is shorter than window_length={window_length}")
    return savgol_filter(
        x, window_length, poly_order, deriv=1, delta=1.0 / sample_rate, mode="mirror", axis=-1
    )


def clamp_velocity(v: np.ndarray | float, limit: float = CLAMP_LIMIT) -> np.ndarray | float:
    clipped = np.clip(v, -limit, limit)
    return float(clipped) if np.ndim(clipped) == 0 else clipped
