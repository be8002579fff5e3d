import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from gazeauth.core.errors import DataError, NumericalError
from gazeauth.core.models import (
    ChannelSpec,
    MinibatchSpec,
    MsLossConfig,
    NetworkConfig,
    SignalConfig,
    TaskKind,
    TrainPlan,
)
from gazeauth.core.network.artifact import MemberModel, ModelArtifact
from gazeauth.core.network.embedder import backward, forward
from gazeauth.core.network.params import NetworkParams, init_params
from gazeauth.core.pipeline import WindowPipeline
from gazeauth.core.signal.dataset import Dataset
from gazeauth.core.signal.windows import compute_norm_stats
from gazeauth.core.training.loss import ms_loss_and_grad
from gazeauth.core.training.optim import Adam
from gazeauth.core.training.sampler import sample_minibatch
from gazeauth.core.training.schedule import lr_at
from gazeauth.utils.hashing import derive_seed, rng_for
from gazeauth.utils.io import write_csv

logger = logging.getLogger(__name__)

_FOLD_STREAM = 7


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    lr: float


@dataclass
class FitResult:
    params: NetworkParams
    history: List[EpochRecord]
    epochs_completed: int
    seed: int


@dataclass
class TrainResult:
    artifact: ModelArtifact
    histories: List[List[EpochRecord]] = field(default_factory=list)


def steps_per_epoch(n_windows: int, minibatch: MinibatchSpec) -> int:
    return math.ceil(n_windows / minibatch.size)


def fit(
    windows: np.ndarray,
    labels: Sequence[str],
    network: NetworkConfig,
    minibatch: MinibatchSpec,
    loss_cfg: MsLossConfig,
    plan: TrainPlan,
    seed: int,
) -> FitResult:
    """
    Train one embedder on normalized (N, C, T) windows. An epoch is
    ceil(N / m) user-balanced minibatches; the learning-rate schedule spans
    `plan.epochs` even when `stop_after_epochs` ends the run earlier.
    """
    labels = np.asarray(labels)
    if windows.shape[0] != labels.shape[0]:
        raise DataError(f"{windows.shape[0]} windows but {labels.shape[0]} labels")
    params = init_params(network, seed)
    epochs = plan.epochs if plan.stop_after_epochs is None else min(plan.epochs, plan.stop_after_epochs)
    if epochs == 0:
        return FitResult(params, [], 0, seed)

    index: Dict[str, List[int]] = {}
    for i, u in enumerate(labels.tolist()):
        index.setdefault(u, []).append(i)

    rng = np.random.default_rng(seed)
    adam = Adam(params, plan.adam)
    spe = steps_per_epoch(windows.shape[0], minibatch)
    total = plan.epochs * spe
    history: List[EpochRecord] = []

    for epoch in range(epochs):
        losses = []
        lr = plan.schedule.start
        for s in range(spe):
            step = epoch * spe + s
            lr = lr_at(step, total, plan.schedule)
            batch = sample_minibatch(index, minibatch, rng)
            embeddings, cache = forward(params, windows[batch.window_ids], "train")
            loss, d_embeddings, mined = ms_loss_and_grad(embeddings, batch.labels, loss_cfg)
            if not np.isfinite(loss) or not np.all(np.isfinite(d_embeddings)):
                raise NumericalError(
                    f"non-finite loss {loss} at epoch {epoch + 1}, step {step} (lr={lr:.3g}, "
                    f"{mined.n_mined} mined pairs, max |embedding|={np.abs(embeddings).max():.3g})"
                )
            grads = backward(params, cache, d_embeddings)
            adam.step(params, grads.params, lr)
            losses.append(loss)
            logger.debug("epoch %d step %d loss %.6f lr %.3g", epoch + 1, step, loss, lr)
        record = EpochRecord(epoch + 1, float(np.mean(losses)), lr)
        history.append(record)
        logger.info("epoch %d/%d mean loss %.6f lr %.3g", record.epoch, plan.epochs, record.mean_loss, lr)

    if epochs < plan.epochs:
        logger.warning("training stopped after %d of %d epochs", epochs, plan.epochs)
    return FitResult(params, history, epochs, seed)


def collect_windows(
    dataset: Dataset, user_ids: Sequence[str], tasks: Sequence[TaskKind], pipeline: WindowPipeline
) -> Tuple[np.ndarray, np.ndarray]:
    """Unnormalized windows of every recording of the given tasks, with user labels."""
    blocks, labels = [], []
    for u in user_ids:
        for entry in dataset.user(u).recordings:
            if entry.task not in tasks:
                continue
            w = pipeline.windows(dataset.load(u, entry))
            blocks.append(w)
            labels += [u] * w.shape[0]
    if not labels:
        raise DataError(f"no training windows for tasks {list(tasks)} among {len(user_ids)} users")
    return np.concatenate(blocks), np.asarray(labels)


def ensemble_folds(user_ids: Sequence[str], folds: int, seed: int) -> List[List[str]]:
    users = sorted(user_ids)
    order = rng_for(seed, _FOLD_STREAM).permutation(len(users))
    return [sorted(users[i] for i in part) for part in np.array_split(order, folds)]


def train(
    dataset: Dataset,
    user_ids: Sequence[str],
    channels: ChannelSpec,
    signal: SignalConfig,
    network: NetworkConfig,
    minibatch: MinibatchSpec,
    loss_cfg: MsLossConfig,
    plan: TrainPlan,
    tasks: Sequence[TaskKind] = ("random_saccade",),
    seed: Optional[int] = None,
) -> TrainResult:
    """
    Train a single model, or with `plan.ensemble_folds == 4` one model per fold
    complement. Normalization stats come from the full training pool and are
    shared by every member.
    """
    seed = plan.seed if seed is None else seed
    if network.input_channels != channels.channel_count:
        raise DataError(f"network expects {network.input_channels} channels, {channels.label} gives {channels.channel_count}")
    users = sorted(user_ids)
    if len(users) < minibatch.users_per_batch:
        raise DataError(f"{len(users)} training users, a minibatch needs {minibatch.users_per_batch}")

    raw, labels = collect_windows(dataset, users, tasks, WindowPipeline(channels, signal))
    stats = compute_norm_stats(raw, channels.channel_names)
    windows = stats.normalize(raw)
    logger.info("training on %d windows from %d users (%s)", windows.shape[0], len(users), channels.label)

    members: List[MemberModel] = []
    histories: List[List[EpochRecord]] = []
    if plan.ensemble_folds == 1:
        run = fit(windows, labels, network, minibatch, loss_cfg, plan, seed)
        members.append(MemberModel(run.params, run.epochs_completed, seed, None, users))
        histories.append(run.history)
    else:
        for f, held_out in enumerate(ensemble_folds(users, plan.ensemble_folds, seed)):
            keep = ~np.isin(labels, held_out)
            member_seed = derive_seed(seed, f)
            logger.info("ensemble fold %d: %d users held out", f, len(held_out))
            run = fit(windows[keep], labels[keep], network, minibatch, loss_cfg, plan, member_seed)
            train_users = sorted(set(users) - set(held_out))
            members.append(MemberModel(run.params, run.epochs_completed, member_seed, f, train_users))
            histories.append(run.history)

    return TrainResult(ModelArtifact(channels, signal, stats, members), histories)


def write_loss_history(history: Sequence[EpochRecord], path: Path) -> int:
    return write_csv(path, ["epoch", "mean_loss", "lr"], [(r.epoch, r.mean_loss, r.lr) for r in history])
