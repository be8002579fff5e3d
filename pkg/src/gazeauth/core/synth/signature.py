from dataclasses import dataclass

import numpy as np

from gazeauth.core.models import SynthDatasetSpec
from gazeauth.utils.hashing import rng_for

_SIGNATURE_STREAM = 0


@dataclass(frozen=True)
class UserSignature:
    """
    Everything that makes one synthetic user's gaze theirs. Eye index 0 is the
    left eye; per eye, visual = gain @ optical + kappa.
    """
    user_id: str
    index: int
    kappa: np.ndarray           # (2 eyes, az/el) degrees
    gain: np.ndarray            # (2 eyes, 2, 2)
    vmax: float                 # deg/s
    ms_constant: float          # deg
    duration_intercept: float   # s
    duration_slope: float       # s/deg
    latency: float              # s
    pursuit_gain: float
    noise_amplitude: float      # deg
    noise_exponent: float
    accuracy_bias: float        # deg
    bias_direction: np.ndarray  # (2,) unit vector
    bias_gradient: np.ndarray   # (2, 2) per 15 deg of gaze

    def bias_at(self, gaze: np.ndarray) -> np.ndarray:
        """Smooth spatial-accuracy offset (n, 2) at gaze directions (n, 2)."""
        return self.accuracy_bias * (self.bias_direction[None, :] + gaze @ self.bias_gradient.T / 15.0)


def _clipped_normal(rng: np.random.Generator, mean: float, sd: float, low: float) -> float:
    return float(max(rng.normal(mean, sd), low))


def generate_user(spec: SynthDatasetSpec, index: int) -> UserSignature:
    """Deterministic in (master seed, index); kappa is mirrored in azimuth between the eyes."""
    pop = spec.population
    rng = rng_for(spec.master_seed, _SIGNATURE_STREAM, index)

    kappa = rng.normal(np.asarray(pop.kappa_mean), pop.kappa_sd, size=(2, 2))
    kappa[0, 0] = -kappa[0, 0]
    for e in range(2):
        norm = np.linalg.norm(kappa[e])
        if norm > pop.kappa_max:
            kappa[e] *= pop.kappa_max / norm
    gain = np.eye(2)[None, :, :] + rng.normal(0.0, pop.gain_sd, size=(2, 2, 2))

    theta = rng.uniform(0.0, 2.0 * np.pi)
    return UserSignature(
        user_id=f"u{index:04d}",
        index=index,
        kappa=kappa,
        gain=gain,
        vmax=_clipped_normal(rng, pop.vmax_mean, pop.vmax_sd, 100.0),
        ms_constant=_clipped_normal(rng, pop.ms_constant_mean, pop.ms_constant_sd, 2.0),
        duration_intercept=pop.duration_intercept,
        duration_slope=_clipped_normal(rng, pop.duration_slope_mean, pop.duration_slope_sd, 0.0005),
        latency=_clipped_normal(rng, pop.latency_mean, pop.latency_sd, 0.08),
        pursuit_gain=float(rng.uniform(*pop.pursuit_gain_range)),
        noise_amplitude=float(rng.uniform(*pop.noise_amplitude_range)),
        noise_exponent=float(rng.uniform(*pop.noise_exponent_range)),
        accuracy_bias=float(pop.accuracy_bias_median * np.exp(pop.accuracy_bias_spread * rng.standard_normal())),
        bias_direction=np.array([np.cos(theta), np.sin(theta)]),
        bias_gradient=rng.normal(0.0, 0.3, size=(2, 2)),
    )
