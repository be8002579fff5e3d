"""
Multi-similarity loss on cosine similarities with its online pair miner.

The mined pair sets are treated as constants during backprop: gradients flow
through the similarity values of the selected pairs only.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from gazeauth.core.errors import DataError, NumericalError
from gazeauth.core.models import MsLossConfig

_SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class MinedPairs:
    """Boolean (m, m) masks; row i holds the mined positives / negatives of anchor i."""
    positives: np.ndarray
    negatives: np.ndarray

    @property
    def n_mined(self) -> int:
        return int(self.positives.sum() + self.negatives.sum())


def cosine_matrix(embeddings: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Returns (S, unit rows, row norms) for an (m, D) embedding block."""
    norms = np.linalg.norm(embeddings, axis=1)
    if np.any(norms == 0):
        raise NumericalError(f"zero-norm embedding at batch rows {np.flatnonzero(norms == 0).tolist()}")
    unit = embeddings / norms[:, None]
    return unit @ unit.T, unit, norms


def mine_pairs(S: np.ndarray, labels: Sequence, cfg: MsLossConfig) -> MinedPairs:
    """
    For anchor i keep the positives p with S_ip < max_n S_in + eps and the
    negatives n with S_in > min_p S_ip - eps. The diagonal is never a pair.
    Anchors without any positive or any negative candidate mine nothing.
    """
    S = np.asarray(S, dtype=np.float64)
    labels = np.asarray(labels)
    m = S.shape[0]
    if S.shape != (m, m) or labels.shape != (m,):
        raise DataError(f"similarity matrix {S.shape} does not match {labels.shape[0]} labels")
    if not np.allclose(S, S.T, rtol=0.0, atol=_SYMMETRY_TOL):
        raise DataError("similarity matrix is not symmetric")
    if np.unique(labels).size < 2:
        raise DataError("mining needs at least two distinct labels")

    same = labels[:, None] == labels[None, :]
    pos = same & ~np.eye(m, dtype=bool)
    neg = ~same
    if not pos.any():
        raise DataError("batch holds no positive pair: every sample has its own label")

    usable = pos.any(axis=1) & neg.any(axis=1)
    max_neg = np.where(neg, S, -np.inf).max(axis=1)
    min_pos = np.where(pos, S, np.inf).min(axis=1)
    positives = pos & (S < (max_neg + cfg.epsilon)[:, None]) & usable[:, None]
    negatives = neg & (S > (min_pos - cfg.epsilon)[:, None]) & usable[:, None]
    return MinedPairs(positives, negatives)


def _pair_terms(S: np.ndarray, mined: MinedPairs, cfg: MsLossConfig) -> Tuple[np.ndarray, np.ndarray]:
    pos_exp = np.where(mined.positives, np.exp(-cfg.alpha * (S - cfg.lam)), 0.0)
    neg_exp = np.where(mined.negatives, np.exp(cfg.beta * (S - cfg.lam)), 0.0)
    return pos_exp, neg_exp


def ms_loss(S: np.ndarray, mined: MinedPairs, cfg: MsLossConfig) -> float:
    m = S.shape[0]
    pos_exp, neg_exp = _pair_terms(S, mined, cfg)
    per_anchor = np.log1p(pos_exp.sum(axis=1)) / cfg.alpha + np.log1p(neg_exp.sum(axis=1)) / cfg.beta
    return float(per_anchor.sum() / m)


def ms_loss_grad_similarity(S: np.ndarray, mined: MinedPairs, cfg: MsLossConfig) -> np.ndarray:
    """dL/dS_ik with S_ik and S_ki treated as distinct entries."""
    m = S.shape[0]
    pos_exp, neg_exp = _pair_terms(S, mined, cfg)
    G = -pos_exp / (1.0 + pos_exp.sum(axis=1, keepdims=True))
    G += neg_exp / (1.0 + neg_exp.sum(axis=1, keepdims=True))
    return G / m


def ms_loss_backward(
    embeddings: np.ndarray, unit: np.ndarray, norms: np.ndarray, S: np.ndarray, mined: MinedPairs, cfg: MsLossConfig
) -> np.ndarray:
    """Gradient of the loss w.r.t. the raw (m, D) embeddings, through S = U U^T and U = E / |E|."""
    G = ms_loss_grad_similarity(S, mined, cfg)
    d_unit = G @ unit + G.T @ unit
    radial = np.sum(unit * d_unit, axis=1, keepdims=True)
    return (d_unit - unit * radial) / norms[:, None]


def ms_loss_and_grad(
    embeddings: np.ndarray, labels: Sequence, cfg: MsLossConfig
) -> Tuple[float, np.ndarray, MinedPairs]:
    S, unit, norms = cosine_matrix(embeddings)
    mined = mine_pairs(S, labels, cfg)
    loss = ms_loss(S, mined, cfg)
    return loss, ms_loss_backward(embeddings, unit, norms, S, mined, cfg), mined
