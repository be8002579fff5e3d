import hashlib
from typing import Any

import numpy as np

from gazeauth.utils.serialization import SerUtils


def stable_hash(obj: Any) -> str:
    """
    Deterministic hex digest of a JSON-compatible object, stable across runs and platforms.
    Uses SHA-256 over the canonical (sorted, compact) JSON encoding.
    """
    return hashlib.sha256(SerUtils.dumps(obj).encode("utf-8")).hexdigest()


def derive_seed(*keys: int) -> int:
    """Independent 32-bit seed for the stream identified by `keys`."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])


def rng_for(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))
