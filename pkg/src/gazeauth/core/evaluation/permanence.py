"""
Test-retest reliability of embedding features across two recordings.

Every feature is one column of the L2-normalized embeddings; session A and B
are the two repetitions of the enrollment task.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.stats import kurtosis, skew

from gazeauth.core.errors import DataError, NumericalError
from gazeauth.utils.hashing import rng_for
from gazeauth.utils.io import write_csv

logger = logging.getLogger(__name__)

IccForm = Literal["consistency", "agreement"]

_UNIT_TOL = 1e-9
_REFERENCE_CHUNK = 1000
_FLAT_RTOL = 1e-12


def _flat(x: np.ndarray) -> np.ndarray:
    """Columns whose range is below _FLAT_RTOL of their magnitude: constant up to rounding."""
    return np.ptp(x, axis=0) <= _FLAT_RTOL * np.maximum(np.abs(x).max(axis=0), 1.0)


@dataclass(frozen=True)
class FeatureTable:
    """Two sessions of L2-normalized embeddings for the same users, row-aligned."""
    user_ids: Tuple[str, ...]
    session_a: np.ndarray
    session_b: np.ndarray

    def __post_init__(self) -> None:
        if self.session_a.shape != self.session_b.shape or self.session_a.ndim != 2:
            raise DataError(f"session shapes differ: {self.session_a.shape} vs {self.session_b.shape}")
        if self.session_a.shape[0] != len(self.user_ids):
            raise DataError("one row per user is required in each session")
        for name, s in (("A", self.session_a), ("B", self.session_b)):
            dev = np.abs(np.linalg.norm(s, axis=1) - 1.0)
            if dev.size and dev.max() > _UNIT_TOL:
                raise DataError(f"session {name} holds embeddings that are not unit length")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_features(self) -> int:
        return int(self.session_a.shape[1])

    @classmethod
    def from_embeddings(cls, a: Mapping[str, np.ndarray], b: Mapping[str, np.ndarray]) -> "FeatureTable":
        users = sorted(set(a) & set(b))
        if not users:
            raise DataError("no user has embeddings in both sessions")

        def unit(block: Mapping[str, np.ndarray]) -> np.ndarray:
            E = np.stack([np.asarray(block[u], dtype=np.float64) for u in users])
            norms = np.linalg.norm(E, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise DataError("zero-norm embedding in a permanence session")
            return E / norms

        return cls(tuple(users), unit(a), unit(b))


def icc_columns(a: np.ndarray, b: np.ndarray, form: IccForm = "consistency") -> np.ndarray:
    """
    Single-measure ICC of every column from the two-way ANOVA of the (n, 2)
    table [a, b]. Consistency is ICC(3,1), agreement is ICC(2,1).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    n, k = a.shape[0], 2
    if n < 3:
        raise DataError(f"ICC needs at least 3 users, got {n}")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise DataError("ICC input contains non-finite values")

    x = np.stack([a, b], axis=1)  # (n, k, F)
    grand = x.mean(axis=(0, 1))
    rows = x.mean(axis=1)
    cols = x.mean(axis=0)
    ss_rows = k * ((rows - grand) ** 2).sum(axis=0)
    ss_cols = n * ((cols - grand) ** 2).sum(axis=0)
    resid = x - rows[:, None, :] - cols[None, :, :] + grand
    ss_err = (resid ** 2).sum(axis=(0, 1))

    bms = ss_rows / (n - 1)
    jms = ss_cols / (k - 1)
    ems = ss_err / ((n - 1) * (k - 1))
    denom = bms + (k - 1) * ems
    if form == "agreement":
        denom = denom + k * (jms - ems) / n
    # both sessions constant within a feature: BMS and EMS vanish
    flat = _flat(np.concatenate([a, b])) if form == "agreement" else _flat(a) & _flat(b)
    bad = np.flatnonzero(flat)
    if bad.size:
        raise NumericalError(f"ICC undefined for features {bad.tolist()}: no between- or within-user variance")
    return (bms - ems) / denom


def icc(a: Sequence[float], b: Sequence[float], form: IccForm = "consistency") -> float:
    return float(icc_columns(np.asarray(a), np.asarray(b), form)[0])


@lru_cache(maxsize=16)
def reference_band(n: int, n_reference: int, low: float, high: float, seed: int) -> Tuple[float, float, float, float]:
    """(skew_lo, skew_hi, kurt_lo, kurt_hi) over `n_reference` standard-normal samples of size n."""
    rng = rng_for(seed, n, n_reference)
    skews, kurts = [], []
    for start in range(0, n_reference, _REFERENCE_CHUNK):
        draws = rng.standard_normal((min(_REFERENCE_CHUNK, n_reference - start), n))
        skews.append(skew(draws, axis=1))
        kurts.append(kurtosis(draws, axis=1))
    s = np.concatenate(skews)
    k = np.concatenate(kurts)
    return (
        float(np.percentile(s, low)), float(np.percentile(s, high)),
        float(np.percentile(k, low)), float(np.percentile(k, high)),
    )


@dataclass(frozen=True)
class NormalityResult:
    passed: bool
    skewness: float
    excess_kurtosis: float
    degenerate: bool = False


def normality_screen(
    values: Sequence[float],
    n_reference: int = 10000,
    band: Tuple[float, float] = (2.5, 97.5),
    seed: int = 0,
) -> NormalityResult:
    """
    Pass iff both the sample skewness and excess kurtosis fall inside the
    `band` percentiles of the same statistics over normal samples of equal size.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size < 8:
        raise DataError(f"normality screen needs at least 8 observations, got {x.size}")
    if _flat(x):
        return NormalityResult(False, float("nan"), float("nan"), degenerate=True)
    s = float(skew(x))
    k = float(kurtosis(x))
    if not (np.isfinite(s) and np.isfinite(k)):
        return NormalityResult(False, float("nan"), float("nan"), degenerate=True)
    s_lo, s_hi, k_lo, k_hi = reference_band(x.size, n_reference, band[0], band[1], seed)
    return NormalityResult(bool(s_lo <= s <= s_hi and k_lo <= k <= k_hi), s, k)


def intercorrelations(features: np.ndarray) -> Tuple[float, float]:
    """Median and max absolute Pearson correlation over all feature pairs (columns)."""
    x = np.asarray(features, dtype=np.float64)
    if x.shape[0] < 3:
        raise DataError(f"intercorrelation needs at least 3 users, got {x.shape[0]}")
    flat = _flat(x)
    keep = np.flatnonzero(~flat)
    if keep.size < x.shape[1]:
        logger.warning(
            "excluding %d constant features from intercorrelation: %s",
            x.shape[1] - keep.size, np.flatnonzero(flat).tolist(),
        )
    if keep.size < 2:
        raise NumericalError("fewer than two features with nonzero variance")
    r = np.abs(np.corrcoef(x[:, keep], rowvar=False))
    upper = r[np.triu_indices(keep.size, k=1)]
    return float(np.median(upper)), float(upper.max())


# ---------- Report ----------
class FeatureRow(BaseModel):
    feature: int
    icc: float
    skew: Optional[float]
    exkurt: Optional[float]
    normal_pass: bool


class PermanenceReport(BaseModel):
    icc_form: IccForm
    n_users: int
    n_features: int
    icc_min: float
    icc_median: float
    icc_max: float
    intercorr_median: float
    intercorr_max: float
    normal_pass_count: int
    degenerate_count: int
    skew_min: Optional[float]
    skew_median: Optional[float]
    skew_max: Optional[float]
    exkurt_min: Optional[float]
    exkurt_median: Optional[float]
    exkurt_max: Optional[float]


def _summary(values: np.ndarray) -> Tuple[Optional[float], Optional[float], Optional[float]]:
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return None, None, None
    return float(finite.min()), float(np.median(finite)), float(finite.max())


def analyze_permanence(
    table: FeatureTable,
    form: IccForm = "consistency",
    n_reference: int = 10000,
    seed: int = 0,
) -> Tuple[PermanenceReport, List[FeatureRow]]:
    """Normality and intercorrelation use session A; ICC uses both sessions."""
    iccs = icc_columns(table.session_a, table.session_b, form)
    screens = [normality_screen(table.session_a[:, j], n_reference, seed=seed) for j in range(table.n_features)]
    inter_median, inter_max = intercorrelations(table.session_a)

    skews = np.array([s.skewness for s in screens])
    kurts = np.array([s.excess_kurtosis for s in screens])
    s_min, s_med, s_max = _summary(skews)
    k_min, k_med, k_max = _summary(kurts)
    report = PermanenceReport(
        icc_form=form,
        n_users=table.n_users,
        n_features=table.n_features,
        icc_min=float(iccs.min()),
        icc_median=float(np.median(iccs)),
        icc_max=float(iccs.max()),
        intercorr_median=inter_median,
        intercorr_max=inter_max,
        normal_pass_count=sum(s.passed for s in screens),
        degenerate_count=sum(s.degenerate for s in screens),
        skew_min=s_min, skew_median=s_med, skew_max=s_max,
        exkurt_min=k_min, exkurt_median=k_med, exkurt_max=k_max,
    )
    rows = [
        FeatureRow(
            feature=j,
            icc=float(iccs[j]),
            skew=None if s.degenerate else s.skewness,
            exkurt=None if s.degenerate else s.excess_kurtosis,
            normal_pass=s.passed,
        )
        for j, s in enumerate(screens)
    ]
    logger.info(
        "permanence over %d users: median ICC %.4f (min %.4f, max %.4f), %d/%d features normal",
        table.n_users, report.icc_median, report.icc_min, report.icc_max, report.normal_pass_count, table.n_features,
    )
    return report, rows


def write_feature_csv(rows: Sequence[FeatureRow], path: Path) -> int:
    return write_csv(
        path,
        ["feature", "icc", "skew", "exkurt", "normal_pass"],
        [(r.feature, r.icc, "" if r.skew is None else r.skew, "" if r.exkurt is None else r.exkurt, int(r.normal_pass)) for r in rows],
    )
