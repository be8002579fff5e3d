from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.models import TaskKind

CSV_COLUMNS: Tuple[str, ...] = ("t", "lox", "loy", "lvx", "lvy", "rox", "roy", "rvx", "rvy")

# (eye, axis, component) -> column of `positions`, which holds CSV columns 1..8
_COLUMN_OF: Dict[Tuple[str, str, str], int] = {
    (eye, axis, comp): i
    for i, (eye, axis, comp) in enumerate(
        (e, a, c) for e in ("L", "R") for a in ("O", "V") for c in ("az", "el")
    )
}

_UNIFORM_TOL = 1e-9


@dataclass(frozen=True)
class GazeRecording:
    """
    One user/task recording of binocular optical and visual axis angles (degrees).
    `positions` is (n, 8) in CSV column order lox, loy, lvx, lvy, rox, roy, rvx, rvy.
    """
    user_id: str
    task: TaskKind
    repetition: int
    sample_rate: float
    timestamps: np.ndarray
    positions: np.ndarray
    recording_id: str = field(default="")

    def __post_init__(self) -> None:
        ts = np.asarray(self.timestamps, dtype=np.float64)
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 8:
            raise DataError(f"positions must be (n, 8), got {pos.shape}")
        if ts.ndim != 1 or ts.size != pos.shape[0] or ts.size < 1:
            raise DataError(
                f"timestamps ({ts.size}) and channels ({pos.shape[0]}) must have equal length >= 1"
            )
        if not np.all(np.isfinite(ts)) or not np.all(np.isfinite(pos)):
            raise DataError(f"recording {self.user_id}/{self.task}_{self.repetition} contains NaN or Inf")
        if ts.size > 1:
            dev = np.max(np.abs(np.diff(ts) - 1.0 / self.sample_rate))
            if dev > _UNIFORM_TOL:
                raise DataError(
                    f"timestamps of {self.user_id}/{self.task}_{self.repetition} are not uniform at "
                    f"{self.sample_rate} Hz (max deviation {dev:.3g} s)"
                )
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "positions", pos)
        if not self.recording_id:
            object.__setattr__(self, "recording_id", f"{self.task}_{self.repetition}")

    @property
    def n_samples(self) -> int:
        return int(self.timestamps.size)

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def channel(self, eye: str, axis: str, component: str) -> np.ndarray:
        """Angular position of one channel; axis VminusO is visual minus optical."""
        if axis == "VminusO":
            return self.channel(eye, "V", component) - self.channel(eye, "O", component)
        try:
            return self.positions[:, _COLUMN_OF[(eye, axis, component)]]
        except KeyError:
            raise DataError(f"unknown channel {eye}.{axis}.{component}") from None


def load_recording(
    path: Path, user_id: str, task: TaskKind, repetition: int, sample_rate: float = 72.0
) -> GazeRecording:
    with open(path) as f:
        header = f.readline().strip()
    if header != ",".join(CSV_COLUMNS):
        raise DataError(f"{path}: expected header '{','.join(CSV_COLUMNS)}', got '{header}'")
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise DataError(f"{path}: {e}") from e
    if table.shape[1] != len(CSV_COLUMNS):
        raise DataError(f"{path}: expected {len(CSV_COLUMNS)} columns, got {table.shape[1]}")
    return GazeRecording(
        user_id=user_id,
        task=task,
        repetition=repetition,
        sample_rate=sample_rate,
        timestamps=table[:, 0],
        positions=table[:, 1:],
    )


def save_recording(recording: GazeRecording, path: Path) -> Path:
    """`%.17g` keeps every double exact, so load(save(r)) == r bit for bit."""
    path.parent.mkdir(parents=True, exist_ok=True)
    table = np.column_stack([recording.timestamps, recording.positions])
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(CSV_COLUMNS), comments="")
    return path
