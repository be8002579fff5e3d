import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from gazeauth.core.errors import DataError
from gazeauth.core.models import DatasetManifest, RecordingEntry, TierScheme, UserEntry
from gazeauth.core.signal.recording import GazeRecording, load_recording
from gazeauth.utils.serialization import SerUtils

logger = logging.getLogger(__name__)


class Dataset:
    """A manifest plus the directory its recording paths are relative to."""

    def __init__(self, manifest: DatasetManifest, root: Path) -> None:
        self.manifest = manifest
        self.root = root
        self._users = {u.user_id: u for u in manifest.users}

    @classmethod
    def open(cls, manifest_path: Path) -> "Dataset":
        if not manifest_path.is_file():
            raise DataError(f"manifest not found: {manifest_path}")
        try:
            manifest = DatasetManifest.model_validate(SerUtils.from_file(manifest_path, ["json", "yaml"]))
        except (ValidationError, RuntimeError) as e:
            raise DataError(f"invalid manifest {manifest_path}: {e}") from e
        return cls(manifest, manifest_path.parent)

    def save(self, manifest_path: Path) -> Path:
        return SerUtils.to_file(self.manifest.model_dump(mode="json"), manifest_path, "json")

    @property
    def user_ids(self) -> List[str]:
        return sorted(self._users)

    def user(self, user_id: str) -> UserEntry:
        try:
            return self._users[user_id]
        except KeyError:
            raise DataError(f"user {user_id} not in manifest") from None

    def load(self, user_id: str, entry: RecordingEntry) -> GazeRecording:
        path = self.root / entry.path
        if not path.is_file():
            raise DataError(f"recording file missing: {path}")
        return load_recording(path, user_id, entry.task, entry.repetition, self.manifest.sample_rate)

    def find(self, user_id: str, task: str, repetition: int) -> Optional[GazeRecording]:
        entry = self.user(user_id).recording(task, repetition)  # type: ignore[arg-type]
        if entry is None:
            return None
        return self.load(user_id, entry)


def quantile_tiers(values: Mapping[str, float], scheme: TierScheme) -> Dict[str, str]:
    """
    Sort users by (value, user_id) and cut the order at the cumulative weight
    fractions of the scheme, lowest values first. Cut indices are rounded, so
    equal weights give tier sizes that differ by at most one.
    """
    if not values:
        return {}
    order = sorted(values, key=lambda u: (values[u], u))
    n = len(order)
    w = np.asarray(scheme.weights, dtype=np.float64)
    cuts = [0] + [int(round(n * f)) for f in np.cumsum(w)[:-1] / w.sum()] + [n]
    tiers: Dict[str, str] = {}
    for name, lo, hi in zip(scheme.names, cuts[:-1], cuts[1:]):
        for u in order[lo:hi]:
            tiers[u] = name
    return tiers


def users_with(dataset: Dataset, user_ids: Sequence[str], task: str, repetitions: Sequence[int]) -> List[str]:
    return [
        u for u in user_ids
        if all(dataset.user(u).recording(task, r) is not None for r in repetitions)  # type: ignore[arg-type]
    ]
