"""
All-pairs verification scoring and its metrics.

A probe is accepted when its score is >= the threshold, so ties are accepts.
Metric functions return fractions; VerificationReport is in percent.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from gazeauth.core.errors import DataError, NumericalError
from gazeauth.utils.io import write_csv

logger = logging.getLogger(__name__)


def _unit_rows(embeddings: Mapping[str, np.ndarray], side: str) -> Tuple[List[str], np.ndarray]:
    ids = sorted(embeddings)
    if not ids:
        raise DataError(f"no {side} centroids")
    E = np.stack([np.asarray(embeddings[u], dtype=np.float64) for u in ids])
    norms = np.linalg.norm(E, axis=1)
    for i in np.flatnonzero(norms == 0):
        raise DataError(f"{side} centroid of user {ids[i]} has zero norm")
    return ids, E / norms[:, None]


@dataclass(frozen=True)
class ScoreSet:
    """
    Cosine similarities of every (enrollment, verification) centroid pair.
    `matrix[i, j]` compares enroll_ids[i] with verify_ids[j]; both id lists are sorted.
    """
    enroll_ids: Tuple[str, ...]
    verify_ids: Tuple[str, ...]
    matrix: np.ndarray

    @cached_property
    def genuine_mask(self) -> np.ndarray:
        return np.asarray(self.enroll_ids)[:, None] == np.asarray(self.verify_ids)[None, :]

    @property
    def genuine(self) -> np.ndarray:
        return self.matrix[self.genuine_mask]

    @property
    def impostor(self) -> np.ndarray:
        return self.matrix[~self.genuine_mask]

    @property
    def n_gen(self) -> int:
        return int(self.genuine_mask.sum())

    @property
    def n_imp(self) -> int:
        return self.matrix.size - self.n_gen

    def subset(self, user_ids: Sequence[str]) -> "ScoreSet":
        """Restrict both sides to `user_ids` (each must be enrolled and verified)."""
        e_pos = {u: i for i, u in enumerate(self.enroll_ids)}
        v_pos = {u: j for j, u in enumerate(self.verify_ids)}
        users = sorted(user_ids)
        rows = [e_pos[u] for u in users]
        cols = [v_pos[u] for u in users]
        return ScoreSet(tuple(users), tuple(users), self.matrix[np.ix_(rows, cols)])

    def pairs(self) -> Iterator[Tuple[str, str, float, str]]:
        for i, e in enumerate(self.enroll_ids):
            for j, v in enumerate(self.verify_ids):
                yield e, v, float(self.matrix[i, j]), "genuine" if e == v else "impostor"


def all_pairs_scores(enroll: Mapping[str, np.ndarray], verify: Mapping[str, np.ndarray]) -> ScoreSet:
    e_ids, E = _unit_rows(enroll, "enrollment")
    v_ids, V = _unit_rows(verify, "verification")
    return ScoreSet(tuple(e_ids), tuple(v_ids), np.clip(E @ V.T, -1.0, 1.0))


@dataclass(frozen=True)
class RocCurve:
    """Operating points in increasing threshold order, bracketed by the -inf / +inf sentinels."""
    thresholds: np.ndarray
    far: np.ndarray
    frr: np.ndarray


def _check_classes(genuine: np.ndarray, impostor: np.ndarray, minimum: int = 1) -> None:
    if genuine.size < minimum or impostor.size < minimum:
        raise DataError(
            f"need at least {minimum} genuine and {minimum} impostor scores, got {genuine.size} and {impostor.size}"
        )


def roc_curve(genuine: np.ndarray, impostor: np.ndarray) -> RocCurve:
    _check_classes(genuine, impostor)
    gen = np.sort(genuine)
    imp = np.sort(impostor)
    thresholds = np.concatenate([[-np.inf], np.unique(np.concatenate([gen, imp])), [np.inf]])
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    return RocCurve(thresholds, far, frr)


def equal_error_rate(roc: RocCurve) -> float:
    """
    FAR at the first operating point where FRR >= FAR; when the two differ
    there, the crossing is interpolated linearly from the previous point.
    """
    diff = roc.frr - roc.far
    b = int(np.argmax(diff >= 0))
    if diff[b] == 0:
        return float(roc.far[b])
    a = b - 1
    d_a = roc.far[a] - roc.frr[a]
    d_b = roc.far[b] - roc.frr[b]
    s = d_a / (d_a - d_b)
    return float(roc.far[a] + s * (roc.far[b] - roc.far[a]))


def roc_and_eer(scores: ScoreSet) -> Tuple[RocCurve, float]:
    roc = roc_curve(scores.genuine, scores.impostor)
    return roc, equal_error_rate(roc)


@dataclass(frozen=True)
class FrrAtFar:
    far_target: float
    frr: float
    achieved_far: float
    threshold: float
    granular: bool  # fewer impostor pairs than 1 / far_target


def frr_at_far_from_roc(roc: RocCurve, far_target: float, n_imp: int) -> FrrAtFar:
    """Smallest threshold whose FAR <= target; conservative, never interpolated."""
    i = int(np.argmax(roc.far <= far_target))
    granular = n_imp * far_target < 1
    return FrrAtFar(far_target, float(roc.frr[i]), float(roc.far[i]), float(roc.thresholds[i]), granular)


def frr_at_far(scores: ScoreSet, far_target: float) -> FrrAtFar:
    if not 0.0 < far_target <= 1.0:
        raise DataError(f"FAR target {far_target} outside (0, 1]")
    roc = roc_curve(scores.genuine, scores.impostor)
    return frr_at_far_from_roc(roc, far_target, scores.n_imp)


def d_prime_of(genuine: np.ndarray, impostor: np.ndarray) -> float:
    _check_classes(genuine, impostor, minimum=2)
    sd_g, sd_i = genuine.std(), impostor.std()
    if sd_g == 0 and sd_i == 0:
        raise NumericalError("d' is undefined: both score distributions have zero spread")
    return float(abs(genuine.mean() - impostor.mean()) / np.sqrt((sd_g ** 2 + sd_i ** 2) / 2.0))


def d_prime(scores: ScoreSet) -> float:
    """|mu_g - mu_i| / sqrt((sd_g^2 + sd_i^2) / 2) with population SDs."""
    return d_prime_of(scores.genuine, scores.impostor)


# ---------- Reports ----------
class FarPoint(BaseModel):
    far_target: float
    frr: float
    achieved_far: float
    threshold: Optional[float]
    granular: bool


class VerificationReport(BaseModel):
    eer: float = Field(ge=0, le=100)
    frr_at_far: List[FarPoint] = Field(default_factory=list)
    d_prime: Optional[float] = Field(default=None, ge=0)
    n_gen: int
    n_imp: int
    n_enrolled: int
    n_verified: int


def verification_report(scores: ScoreSet, far_targets: Sequence[float]) -> Tuple[VerificationReport, RocCurve]:
    roc, eer = roc_and_eer(scores)
    points = []
    for target in far_targets:
        p = frr_at_far_from_roc(roc, target, scores.n_imp)
        if p.granular:
            logger.warning(
                "FAR target %g needs %d impostor pairs, only %d available: achieved FAR %g",
                target, int(np.ceil(1.0 / target)), scores.n_imp, p.achieved_far,
            )
        points.append(
            FarPoint(
                far_target=100.0 * target,
                frr=100.0 * p.frr,
                achieved_far=100.0 * p.achieved_far,
                threshold=p.threshold if np.isfinite(p.threshold) else None,
                granular=p.granular,
            )
        )
    try:
        dp: Optional[float] = d_prime(scores)
    except (DataError, NumericalError) as e:
        logger.warning("d' not reported: %s", e)
        dp = None
    report = VerificationReport(
        eer=100.0 * eer,
        frr_at_far=points,
        d_prime=dp,
        n_gen=scores.n_gen,
        n_imp=scores.n_imp,
        n_enrolled=len(scores.enroll_ids),
        n_verified=len(scores.verify_ids),
    )
    return report, roc


def write_scores_csv(scores: ScoreSet, path: Path) -> int:
    return write_csv(path, ["enroll_user", "verify_user", "score", "label"], scores.pairs())


def write_roc_csv(roc: RocCurve, path: Path) -> int:
    rows = zip(roc.thresholds.tolist(), roc.far.tolist(), roc.frr.tolist())
    return write_csv(path, ["threshold", "far", "frr"], rows)
