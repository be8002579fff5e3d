import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from gazeauth.core.errors import ConfigError, DataError
from gazeauth.core.evaluation.verify import (
    ScoreSet,
    all_pairs_scores,
    equal_error_rate,
    frr_at_far_from_roc,
    roc_curve,
)
from gazeauth.utils.hashing import rng_for
from gazeauth.utils.io import write_csv

logger = logging.getLogger(__name__)


class IdentificationReport(BaseModel):
    rank1_ir: float = Field(ge=0, le=100)
    n_probes: int
    n_gallery: int
    n_excluded: int = 0


def rank1_correct(scores: ScoreSet) -> Tuple[np.ndarray, int]:
    """
    Per-probe correctness of closed-set Rank-1 matching. Probes are the
    verification users that are also enrolled; each is matched to the gallery
    entry of highest similarity, ties going to the smallest user id.
    Returns (correct flags in probe order, excluded probe count).
    """
    gallery = np.asarray(scores.enroll_ids)
    enrolled = set(scores.enroll_ids)
    cols = [j for j, u in enumerate(scores.verify_ids) if u in enrolled]
    if not cols:
        raise DataError("no verification user is enrolled in the gallery")
    best = np.argmax(scores.matrix[:, cols], axis=0)
    probes = np.asarray(scores.verify_ids)[cols]
    return gallery[best] == probes, len(scores.verify_ids) - len(cols)


def rank1_from_scores(scores: ScoreSet) -> IdentificationReport:
    correct, excluded = rank1_correct(scores)
    return IdentificationReport(
        rank1_ir=100.0 * correct.sum() / correct.size,
        n_probes=int(correct.size),
        n_gallery=len(scores.enroll_ids),
        n_excluded=excluded,
    )


def rank1(enroll: Mapping[str, np.ndarray], verify: Mapping[str, np.ndarray]) -> IdentificationReport:
    if not enroll or not verify:
        raise DataError("identification needs a nonempty gallery and probe set")
    return rank1_from_scores(all_pairs_scores(enroll, verify))


# ---------- Gallery-size sweep ----------
def metric_names(far_targets: Sequence[float]) -> List[str]:
    return ["eer"] + [f"frr@{t:g}" for t in far_targets] + ["rank1_ir"]


def subset_metrics(scores: ScoreSet, far_targets: Sequence[float]) -> List[float]:
    """Percent-valued metrics of one subset, in `metric_names` order."""
    roc = roc_curve(scores.genuine, scores.impostor)
    values = [100.0 * equal_error_rate(roc)]
    values += [100.0 * frr_at_far_from_roc(roc, t, scores.n_imp).frr for t in far_targets]
    correct, _ = rank1_correct(scores)
    return values + [100.0 * correct.sum() / correct.size]


def nearest_rank(values: np.ndarray, q: float) -> float:
    return float(np.percentile(values, q, method="inverted_cdf"))


class SweepRow(BaseModel):
    n: int
    metric: str
    p5: float
    p95: float
    mid: float


@dataclass
class SweepResult:
    """P5 / P95 of each metric over K user subsets per gallery size, with the raw values."""
    sizes: List[int]
    samples: int
    metrics: List[str]
    raw: Dict[Tuple[int, str], np.ndarray] = field(default_factory=dict)

    def rows(self) -> List[SweepRow]:
        out = []
        for n in self.sizes:
            for m in self.metrics:
                values = self.raw[(n, m)]
                p5, p95 = nearest_rank(values, 5), nearest_rank(values, 95)
                out.append(SweepRow(n=n, metric=m, p5=p5, p95=p95, mid=(p5 + p95) / 2.0))
        return out

    def series(self, metric: str, column: str = "p95") -> Tuple[np.ndarray, np.ndarray]:
        rows = [r for r in self.rows() if r.metric == metric]
        return np.array([r.n for r in rows], dtype=np.float64), np.array([getattr(r, column) for r in rows])

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "samples": self.samples,
            "metrics": self.metrics,
            "rows": [r.model_dump() for r in self.rows()],
            "raw": {f"{n}/{m}": v.tolist() for (n, m), v in sorted(self.raw.items())},
        }


def gallery_sweep(
    scores: ScoreSet,
    sizes: Sequence[int],
    samples: int = 100,
    seed: int = 0,
    far_targets: Sequence[float] = (0.00002, 0.0001),
    threads: int = 1,
) -> SweepResult:
    """
    For each gallery size N draw `samples` subsets of N users (without
    replacement) from the users holding both recordings, and score each subset
    on its own. Subset k of size N uses the random stream (seed, N, k), so the
    result does not depend on `threads`.
    """
    pool = sorted(set(scores.enroll_ids) & set(scores.verify_ids))
    sizes = list(sizes)
    if not sizes or sorted(set(sizes)) != sizes:
        raise ConfigError(f"gallery sizes must be nonempty and strictly increasing, got {sizes}")
    if sizes[0] < 2:
        raise ConfigError("gallery sizes must be at least 2 so every subset has impostor pairs")
    if sizes[-1] > len(pool):
        raise DataError(f"gallery size {sizes[-1]} exceeds the {len(pool)} users with both recordings")

    def one(job: Tuple[int, int]) -> List[float]:
        n, k = job
        chosen = rng_for(seed, n, k).choice(len(pool), size=n, replace=False)
        return subset_metrics(scores.subset([pool[i] for i in chosen]), far_targets)

    jobs = [(n, k) for n in sizes for k in range(samples)]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        values = list(executor.map(one, jobs))

    names = metric_names(far_targets)
    result = SweepResult(sizes, samples, names)
    table = np.asarray(values).reshape(len(sizes), samples, len(names))
    for a, n in enumerate(sizes):
        for b, m in enumerate(names):
            result.raw[(n, m)] = table[a, :, b].copy()
    logger.info("gallery sweep over sizes %s with %d samples each", sizes, samples)
    return result


def write_sweep_csv(result: SweepResult, path: Path) -> int:
    return write_csv(path, ["N", "metric", "p5", "p95", "mid"], [(r.n, r.metric, r.p5, r.p95, r.mid) for r in result.rows()])
