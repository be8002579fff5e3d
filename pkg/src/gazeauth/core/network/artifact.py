from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import ValidationError

from gazeauth.core.base import Embedder
from gazeauth.core.errors import DataError
from gazeauth.core.models import ChannelSpec, NetworkConfig, SignalConfig
from gazeauth.core.network.embedder import embed_windows
from gazeauth.core.network.params import NetworkParams
from gazeauth.core.signal.windows import NormalizationStats
from gazeauth.utils.hashing import stable_hash
from gazeauth.utils.serialization import SerUtils

FORMAT_TAG = "gazeauth-model/1"


@dataclass
class MemberModel:
    params: NetworkParams
    epochs_completed: int
    seed: int
    fold: Optional[int] = None
    train_users: List[str] = field(default_factory=list)


@dataclass(eq=False)
class ModelArtifact(Embedder):
    """
    A trained embedder with everything needed to reuse it at evaluation time.
    An ensemble holds one member per fold; its embedding is the concatenation of
    the members' raw (not L2-normalized) embeddings in fold order.
    """
    channels: ChannelSpec
    signal: SignalConfig
    stats: NormalizationStats
    members: List[MemberModel]

    def __post_init__(self) -> None:
        if not self.members:
            raise DataError("a model artifact needs at least one member")
        for m in self.members:
            if m.params.config.input_channels != self.channels.channel_count:
                raise DataError("member input channels do not match the artifact's channel spec")
        if self.stats.channels != self.channels.channel_count:
            raise DataError("normalization stats do not match the artifact's channel spec")

    @property
    def dim(self) -> int:
        return sum(m.params.config.embedding_dim for m in self.members)

    @property
    def is_ensemble(self) -> bool:
        return len(self.members) > 1

    def embed(self, windows: np.ndarray) -> np.ndarray:
        return np.concatenate([embed_windows(m.params, windows) for m in self.members], axis=1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": FORMAT_TAG,
            "embedding": "concatenate-raw" if self.is_ensemble else "single",
            "channels": self.channels.model_dump(mode="json"),
            "signal": self.signal.model_dump(mode="json"),
            "stats": self.stats.to_dict(),
            "members": [
                {
                    "network": m.params.config.model_dump(mode="json"),
                    "epochs_completed": m.epochs_completed,
                    "seed": m.seed,
                    "fold": m.fold,
                    "train_users": list(m.train_users),
                    "params": m.params.to_dict(),
                }
                for m in self.members
            ],
        }

    def hash(self) -> str:
        return stable_hash(self.to_dict())

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ModelArtifact":
        if d.get("format") != FORMAT_TAG:
            raise DataError(f"unsupported model format {d.get('format')!r}, expected {FORMAT_TAG!r}")
        try:
            members = []
            for m in d["members"]:
                config = NetworkConfig.model_validate(m["network"])
                members.append(
                    MemberModel(
                        params=NetworkParams.from_dict(config, m["params"]),
                        epochs_completed=int(m["epochs_completed"]),
                        seed=int(m["seed"]),
                        fold=m.get("fold"),
                        train_users=list(m.get("train_users", [])),
                    )
                )
            return cls(
                channels=ChannelSpec.model_validate(d["channels"]),
                signal=SignalConfig.model_validate(d["signal"]),
                stats=NormalizationStats.from_dict(d["stats"]),
                members=members,
            )
        except (KeyError, ValidationError) as e:
            raise DataError(f"malformed model artifact: {e}") from e

    def save(self, path: Path) -> Path:
        return SerUtils.to_file(self.to_dict(), path, "json")

    @classmethod
    def load(cls, path: Path) -> "ModelArtifact":
        if not path.is_file():
            raise DataError(f"model artifact not found: {path}")
        return cls.from_dict(SerUtils.from_file(path, ["json"]))
