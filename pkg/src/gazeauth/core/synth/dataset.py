import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.factories import TaskFactory
from gazeauth.core.models import DatasetManifest, RecordingEntry, SynthDatasetSpec, TaskSpec, UserEntry
from gazeauth.core.signal.dataset import Dataset, quantile_tiers
from gazeauth.core.signal.recording import GazeRecording, save_recording
from gazeauth.core.synth.oculomotor import simulate_gaze
from gazeauth.core.synth.signature import UserSignature, generate_user
from gazeauth.utils.hashing import derive_seed, rng_for

logger = logging.getLogger(__name__)

REFIXATION_THRESHOLD = 0.5  # deg; random-saccade error that triggers a corrective saccade
_RECORDING_STREAM = 1
_SPLIT_STREAM = 2
_TASK_CODE = {"random_saccade": 0, "smooth_pursuit": 1}


@dataclass(frozen=True)
class SynthRecording:
    recording: GazeRecording
    accuracy_error: float  # mean spatial-accuracy error in degrees


def colored_noise(rng: np.random.Generator, n: int, amplitude: float, exponent: float, dims: int = 2) -> np.ndarray:
    """(n, dims) noise with power spectrum ~ 1/f^exponent, scaled to SD `amplitude`."""
    white = rng.standard_normal((dims, n))
    freqs = np.fft.rfftfreq(n)
    scale = np.zeros_like(freqs)
    scale[1:] = freqs[1:] ** (-exponent / 2.0)
    shaped = np.fft.irfft(np.fft.rfft(white, axis=1) * scale, n=n, axis=1)
    sd = shaped.std(axis=1, keepdims=True)
    sd[sd == 0] = 1.0
    return (amplitude * shaped / sd).T


def generate_recording(signature: UserSignature, task: TaskSpec, seed: int, repetition: int = 1) -> SynthRecording:
    """
    Gaze follows the target through the oculomotor model; accuracy bias and
    per-eye colored noise perturb it into each eye's visual axis, and the
    optical axis is the inverse of that eye's linear map.
    """
    rng = np.random.default_rng(seed)
    fs = task.sample_rate
    n = int(round(task.duration * fs))
    t = np.arange(n) / fs

    target, target_vel, pursuit = TaskFactory.build(task).target(t, rng)
    threshold = task.catchup_threshold if pursuit else REFIXATION_THRESHOLD
    gaze = simulate_gaze(
        target, target_vel, 1.0 / fs, int(round(signature.latency * fs)), pursuit, threshold,
        signature.vmax, signature.ms_constant, signature.duration_intercept, signature.duration_slope,
        signature.pursuit_gain,
    )

    offset = signature.bias_at(gaze) + rng.normal(0.0, 0.1 * signature.accuracy_bias, size=gaze.shape)
    accuracy_error = float(np.mean(np.linalg.norm(offset, axis=1)))

    columns = []
    for e in range(2):
        G, kappa = signature.gain[e], signature.kappa[e]
        visual = gaze + offset + colored_noise(rng, n, signature.noise_amplitude, signature.noise_exponent)
        optical = np.linalg.solve(G, (visual - kappa).T).T
        columns += [optical, optical @ G.T + kappa]

    recording = GazeRecording(
        user_id=signature.user_id,
        task=task.kind,
        repetition=repetition,
        sample_rate=fs,
        timestamps=t,
        positions=np.column_stack(columns),
    )
    return SynthRecording(recording, accuracy_error)


def _plan(spec: SynthDatasetSpec) -> List[Tuple[TaskSpec, int]]:
    return [(spec.random_saccade, r) for r in range(1, spec.random_saccade_recordings + 1)] + [
        (spec.smooth_pursuit, r) for r in range(1, spec.smooth_pursuit_recordings + 1)
    ]


def _generate_user(spec: SynthDatasetSpec, index: int, root: Path) -> Tuple[UserEntry, float]:
    signature = generate_user(spec, index)
    entries, rs_errors, all_errors = [], [], []
    for task, rep in _plan(spec):
        seed = derive_seed(spec.master_seed, _RECORDING_STREAM, index, _TASK_CODE[task.kind], rep)
        synth = generate_recording(signature, task, seed, rep)
        rel = f"recordings/{signature.user_id}/{task.kind}_{rep}.csv"
        try:
            save_recording(synth.recording, root / rel)
        except OSError as e:
            raise DataError(f"could not write {root / rel}: {e}") from e
        entries.append(RecordingEntry(path=rel, task=task.kind, repetition=rep))
        all_errors.append(synth.accuracy_error)
        if task.kind == "random_saccade":
            rs_errors.append(synth.accuracy_error)
    errors = rs_errors or all_errors
    accuracy = float(np.mean(errors)) if errors else float(signature.accuracy_bias)
    return UserEntry(user_id=signature.user_id, recordings=entries, accuracy_error_deg=accuracy), accuracy


def generate_dataset(spec: SynthDatasetSpec, out_dir: Path, threads: int = 1) -> Dataset:
    """
    Write every recording under `out_dir/recordings/<user>/` and the manifest at
    `out_dir/manifest.json`. Splits come from a seeded permutation, tiers from
    accuracy quantiles; both depend on the master seed only.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        users = list(executor.map(lambda i: _generate_user(spec, i, out_dir), range(spec.n_users)))
    logger.info("generated %d users x %d recordings in %s", spec.n_users, len(_plan(spec)), out_dir)

    order = rng_for(spec.master_seed, _SPLIT_STREAM).permutation(spec.n_users)
    n_train = int(round(spec.train_fraction * spec.n_users))
    train = {int(i) for i in order[:n_train]}
    tiers = quantile_tiers({entry.user_id: acc for entry, acc in users}, spec.tiers)

    entries = [
        entry.model_copy(update={"split": "train" if i in train else "test", "tier": tiers[entry.user_id]})
        for i, (entry, _) in enumerate(users)
    ]
    manifest = DatasetManifest(
        sample_rate=spec.random_saccade.sample_rate,
        users=entries,
        generator=spec.model_dump(mode="json"),
    )
    dataset = Dataset(manifest, out_dir)
    dataset.save(out_dir / "manifest.json")
    return dataset
