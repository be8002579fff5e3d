"""
Sequential oculomotor response to a target trajectory.

Saccades follow a tanh position profile whose peak velocity lies exactly on
the user's main sequence, v_peak = vmax * (1 - exp(-A / C)); duration grows
linearly with amplitude. Pursuit integrates gain * target velocity between
catch-up saccades.
"""
import numpy as np
from numba import njit

_MIN_PEAK_RATIO = 1.05


@njit(cache=True)
def profile_sharpness(ratio):
    """Sharpness k of the tanh profile with peak / mean velocity = ratio (> 1)."""
    lo, hi = 1e-6, 2.0 * ratio + 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid / (2.0 * np.tanh(0.5 * mid)) < ratio:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@njit(cache=True)
def saccade_fraction(u, k):
    """Fraction of the amplitude covered at normalized time u in [0, 1]."""
    h = np.tanh(0.5 * k)
    return (np.tanh(k * (u - 0.5)) + h) / (2.0 * h)


@njit(cache=True)
def main_sequence(amplitude, vmax, ms_constant, intercept, slope):
    """Returns (duration, sharpness, peak velocity) of a saccade of the given amplitude."""
    peak = vmax * (1.0 - np.exp(-amplitude / ms_constant))
    duration = intercept + slope * amplitude
    ratio = peak * duration / amplitude
    if ratio < _MIN_PEAK_RATIO:
        ratio = _MIN_PEAK_RATIO
        duration = ratio * amplitude / peak
    return duration, profile_sharpness(ratio), peak


@njit(cache=True, nogil=True)
def simulate_gaze(
    target, target_vel, dt, latency_samples, pursuit, threshold,
    vmax, ms_constant, intercept, slope, pursuit_gain,
):
    """
    Gaze direction (n, 2) in degrees. Without pursuit the eye reacts to the
    target as it was `latency_samples` ago; with pursuit it follows the
    current target once the latency has elapsed.
    """
    n = target.shape[0]
    eye = np.zeros((n, 2))
    ex, ey = 0.0, 0.0
    in_saccade = False
    sx, sy, gx, gy = 0.0, 0.0, 0.0, 0.0
    t0, duration, k = 0.0, 1.0, 1.0
    for i in range(n):
        t = i * dt
        active = i >= latency_samples
        if not in_saccade and (active or not pursuit):
            j = i if pursuit else max(i - latency_samples, 0)
            dx = target[j, 0] - ex
            dy = target[j, 1] - ey
            amplitude = np.sqrt(dx * dx + dy * dy)
            if amplitude > threshold:
                duration, k, _ = main_sequence(amplitude, vmax, ms_constant, intercept, slope)
                sx, sy = ex, ey
                gx, gy = target[j, 0], target[j, 1]
                t0 = t
                in_saccade = True
        if in_saccade:
            u = (t - t0) / duration
            if u >= 1.0:
                ex, ey = gx, gy
                in_saccade = False
            else:
                f = saccade_fraction(u, k)
                ex = sx + (gx - sx) * f
                ey = sy + (gy - sy) * f
        elif pursuit and active:
            ex += pursuit_gain * target_vel[i, 0] * dt
            ey += pursuit_gain * target_vel[i, 1] * dt
        eye[i, 0] = ex
        eye[i, 1] = ey
    return eye
