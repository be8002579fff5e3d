from abc import ABC, abstractmethod
from typing import Optional, Tuple

import numpy as np


class Embedder(ABC):
    """Maps normalized (N, C, T) velocity windows to (N, D) embeddings."""
    @property
    @abstractmethod
    def dim(self) -> int: ...
    @abstractmethod
    def embed(self, windows: np.ndarray) -> np.ndarray: ...
    @abstractmethod
    def hash(self) -> str: ...

    def __hash__(self) -> int:
        return int(self.hash()[:16], 16)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Embedder) and self.hash() == other.hash()


class CurveModel(ABC):
    """A scaling-curve family y = f(x; coeffs) fitted to (gallery size, rate) points."""
    name: str
    n_params: int

    @abstractmethod
    def evaluate(self, x: np.ndarray, coeffs: np.ndarray) -> np.ndarray: ...
    @abstractmethod
    def fit(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...
    @abstractmethod
    def closed_form_root(self, coeffs: np.ndarray) -> Optional[float]:
        """Root of f when it has a closed form, else None (the caller bisects)."""
    @abstractmethod
    def hash(self) -> str: ...

    def __hash__(self) -> int:
        return int(self.hash()[:16], 16)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, CurveModel) and self.hash() == other.hash()


class OcularTask(ABC):
    """Stimulus of one recording task: where the target is at every sample."""
    @abstractmethod
    def target(self, t: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, bool]:
        """Returns (positions (n, 2) degrees, velocities (n, 2) deg/s, pursuit enabled)."""
    @abstractmethod
    def hash(self) -> str: ...

    def __hash__(self) -> int:
        return int(self.hash()[:16], 16)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OcularTask) and self.hash() == other.hash()
