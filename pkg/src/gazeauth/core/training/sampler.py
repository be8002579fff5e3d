from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from gazeauth.core.errors import DataError
from gazeauth.core.models import MinibatchSpec


@dataclass(frozen=True)
class Minibatch:
    window_ids: np.ndarray  # (m,) indices into the training window block
    labels: np.ndarray      # (m,) user ids


def sample_minibatch(index: Mapping[str, Sequence[int]], spec: MinibatchSpec, rng: np.random.Generator) -> Minibatch:
    """
    Draw `users_per_batch` distinct users uniformly, then `samples_per_user`
    windows of each. A user with fewer windows than that is sampled with
    replacement so the batch shape never changes.
    """
    users = sorted(u for u, ids in index.items() if len(ids) > 0)
    if len(users) < spec.users_per_batch:
        raise DataError(f"{len(users)} users with windows, a minibatch needs {spec.users_per_batch}")

    chosen = rng.choice(len(users), size=spec.users_per_batch, replace=False)
    ids, labels = [], []
    for u in (users[i] for i in chosen):
        pool = np.asarray(index[u])
        replace = pool.size < spec.samples_per_user
        ids.append(pool[rng.choice(pool.size, size=spec.samples_per_user, replace=replace)])
        labels += [u] * spec.samples_per_user
    return Minibatch(np.concatenate(ids), np.asarray(labels))
