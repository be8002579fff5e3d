import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gazeauth.core.base import Embedder
from gazeauth.core.errors import DataError
from gazeauth.core.models import ChannelSpec, SignalConfig, TaskSelection
from gazeauth.core.network.artifact import ModelArtifact
from gazeauth.core.signal.dataset import Dataset
from gazeauth.core.signal.recording import GazeRecording
from gazeauth.core.signal.windows import NormalizationStats, partition_windows

logger = logging.getLogger(__name__)


class WindowPipeline:
    """Recording -> (k, C, T) velocity windows, normalized when stats are set."""

    def __init__(self, channels: ChannelSpec, signal: SignalConfig, stats: Optional[NormalizationStats] = None):
        self.channels = channels
        self.signal = signal
        self.stats = stats

    def windows(self, recording: GazeRecording) -> np.ndarray:
        if recording.sample_rate != self.signal.sample_rate:
            raise DataError(
                f"{recording.user_id}/{recording.recording_id} is sampled at {recording.sample_rate} Hz, "
                f"the pipeline expects {self.signal.sample_rate} Hz"
            )
        ws = partition_windows(recording, self.channels, self.stats, self.signal)
        if not ws:
            return np.empty((0, self.channels.channel_count, self.signal.window_samples))
        return np.stack([w.data for w in ws])


class EmbeddingPipeline:
    """Recording -> centroid of the embeddings of its first n windows."""

    def __init__(self, embedder: Embedder, windows: WindowPipeline):
        if windows.stats is None:
            raise DataError("an embedding pipeline needs normalization stats")
        self.embedder = embedder
        self.window_pipeline = windows

    @classmethod
    def from_artifact(cls, artifact: ModelArtifact) -> "EmbeddingPipeline":
        return cls(artifact, WindowPipeline(artifact.channels, artifact.signal, artifact.stats))

    def centroid(self, recording: GazeRecording, chunks: int) -> Optional[np.ndarray]:
        """None when the recording has fewer than `chunks` windows."""
        w = self.window_pipeline.windows(recording)
        if w.shape[0] < chunks:
            return None
        return self.embedder.embed(w[:chunks]).mean(axis=0)

    def centroids(
        self, dataset: Dataset, user_ids: Sequence[str], selection: TaskSelection, chunks: int
    ) -> Tuple[Dict[str, np.ndarray], List[str]]:
        """
        Centroids of the selected recording for every user that has it with
        enough windows. Returns (user -> centroid, excluded user ids).
        """
        out: Dict[str, np.ndarray] = {}
        excluded: List[str] = []
        for u in user_ids:
            rec = dataset.find(u, selection.task, selection.repetition)
            c = None if rec is None else self.centroid(rec, chunks)
            if c is None:
                excluded.append(u)
            else:
                out[u] = c
        if excluded:
            logger.info(
                "%d of %d users lack %s_%d with %d windows",
                len(excluded), len(user_ids), selection.task, selection.repetition, chunks,
            )
        return out, excluded
