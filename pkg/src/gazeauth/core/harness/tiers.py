import logging
from typing import Dict, List, Sequence, Tuple

from gazeauth.core.errors import ConfigError, DataError
from gazeauth.core.models import TierScheme
from gazeauth.core.signal.dataset import Dataset, quantile_tiers, users_with

logger = logging.getLogger(__name__)


def partition_by_accuracy(dataset: Dataset, scheme: TierScheme, repetitions: Sequence[int] = (1, 2)) -> Dict[str, str]:
    """
    Quantile tiers over users holding every listed random-saccade repetition,
    ordered by (accuracy error, user id) so equal errors split deterministically.
    """
    eligible = users_with(dataset, dataset.user_ids, "random_saccade", repetitions)
    missing = [u for u in eligible if dataset.user(u).accuracy_error_deg is None]
    if missing:
        raise DataError(f"{len(missing)} users lack an accuracy value, e.g. {missing[:3]}")
    excluded = len(dataset.user_ids) - len(eligible)
    if excluded:
        logger.info("%d users excluded from accuracy tiers: missing random-saccade recordings", excluded)
    return quantile_tiers({u: dataset.user(u).accuracy_error_deg for u in eligible}, scheme)  # type: ignore[misc]


def tier_members(tiers: Dict[str, str], names: Sequence[str], scheme: TierScheme) -> List[str]:
    unknown = sorted(set(names) - set(scheme.names))
    if unknown:
        raise ConfigError(f"unknown tiers {unknown}; the scheme defines {scheme.names}")
    return sorted(u for u, t in tiers.items() if t in names)


def split_by_tiers(
    dataset: Dataset, scheme: TierScheme, train_tiers: Sequence[str], test_tiers: Sequence[str]
) -> Tuple[List[str], List[str]]:
    if set(train_tiers) & set(test_tiers):
        raise ConfigError(f"train tiers {list(train_tiers)} and test tiers {list(test_tiers)} overlap")
    tiers = partition_by_accuracy(dataset, scheme)
    return tier_members(tiers, train_tiers, scheme), tier_members(tiers, test_tiers, scheme)
