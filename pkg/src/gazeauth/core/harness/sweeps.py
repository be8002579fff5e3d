"""
Experiment grids built from one base configuration. Each grid point is a full
experiment with its own directory under `<out>/<base experiment id>/`.
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from gazeauth.core.errors import ConfigError, DataError
from gazeauth.core.harness.experiment import ExperimentResult, obtain_model, run_experiment, select_users
from gazeauth.core.models import ExperimentConfig
from gazeauth.core.signal.dataset import Dataset
from gazeauth.utils.io import write_csv
from gazeauth.utils.serialization import SerUtils

logger = logging.getLogger(__name__)

# (n_e, n_v): equal durations, then a fixed 30 s enrollment at 72 Hz / 360-sample windows
DURATION_GRID: Tuple[Tuple[int, int], ...] = ((1, 1), (2, 2), (3, 3), (4, 4), (6, 1), (6, 2), (6, 3))

Row = Dict[str, Any]


def metric_row(result: ExperimentResult) -> Row:
    v = result.verification
    row: Row = {"eer": v.eer}
    for p in v.frr_at_far:
        row[f"frr@{p.far_target:g}%"] = p.frr
    row.update(
        d_prime="" if v.d_prime is None else v.d_prime,
        rank1_ir=result.identification.rank1_ir,
        n_gen=v.n_gen,
        n_imp=v.n_imp,
    )
    return row


def _write_rows(rows: Sequence[Row], path: Path) -> int:
    header: List[str] = []
    for r in rows:
        header += [k for k in r if k not in header]
    return write_csv(path, header, [[r.get(k, "") for k in header] for r in rows])


def _variant(base: ExperimentConfig, suffix: str, **update: Any) -> ExperimentConfig:
    data = base.model_dump(by_alias=True)
    data.update(update, experiment_id=f"{base.experiment_id}/{suffix}")
    return ExperimentConfig.model_validate(data)


def sweep_train_size(base: ExperimentConfig, sizes: Sequence[int], out_root: Path) -> List[Row]:
    """One freshly trained model per N; the N-user subsets are nested and the test set is fixed."""
    sizes = list(sizes)
    if not sizes or sorted(set(sizes)) != sizes:
        raise ConfigError(f"train sizes must be nonempty and strictly increasing, got {sizes}")
    pool, _ = select_users(Dataset.open(Path(base.manifest)), base.model_copy(update={"train_size": None}))
    if sizes[-1] > len(pool):
        raise DataError(f"train size {sizes[-1]} exceeds the {len(pool)} training users")

    rows = []
    for n in sizes:
        result = run_experiment(_variant(base, f"train_{n}", train_size=n, model_path=None), out_root)
        rows.append({"N": n, **metric_row(result)})
    _write_rows(rows, out_root / base.experiment_id / "train_size.csv")
    return rows


def sweep_duration(
    base: ExperimentConfig, out_root: Path, grid: Sequence[Tuple[int, int]] = DURATION_GRID
) -> List[Row]:
    """Train once, then evaluate every (n_e, n_v) chunk combination with that model."""
    out_dir = out_root / base.experiment_id
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = Dataset.open(Path(base.manifest))
    train_users, _ = select_users(dataset, base)
    artifact = obtain_model(base, dataset, train_users, out_dir)

    rows = []
    for n_e, n_v in grid:
        cfg = _variant(base, f"e{n_e}_v{n_v}", enroll_chunks=n_e, verify_chunks=n_v)
        result = run_experiment(cfg, out_root, artifact)
        rows.append({
            "n_e": n_e, "n_v": n_v,
            "enroll_seconds": result.enroll_seconds, "verify_seconds": result.verify_seconds,
            **metric_row(result),
        })
    _write_rows(rows, out_dir / "duration.csv")
    return rows


def run_accuracy_tiers(base: ExperimentConfig, out_root: Path) -> List[Row]:
    """
    Train one model per `train_*` tier of the scheme and evaluate it on every
    `test_*` tier separately.
    """
    names = base.tier_scheme.names
    train_tiers = [t for t in names if t.startswith("train_")]
    test_tiers = [t for t in names if t.startswith("test_")]
    if not train_tiers or not test_tiers:
        raise ConfigError(f"tier scheme {names} needs train_* and test_* tiers")

    dataset = Dataset.open(Path(base.manifest))
    rows = []
    for train_tier in train_tiers:
        tier_cfg = _variant(base, train_tier, train_tiers=[train_tier], test_tiers=test_tiers)
        out_dir = out_root / tier_cfg.experiment_id
        out_dir.mkdir(parents=True, exist_ok=True)
        train_users, _ = select_users(dataset, tier_cfg)
        artifact = obtain_model(tier_cfg, dataset, train_users, out_dir)
        for test_tier in test_tiers:
            cfg = _variant(tier_cfg, test_tier, test_tiers=[test_tier])
            result = run_experiment(cfg, out_root, artifact)
            rows.append({"train_tier": train_tier, "test_tier": test_tier, **metric_row(result)})
    _write_rows(rows, out_root / base.experiment_id / "accuracy_tiers.csv")
    return rows


def sweep_gallery(base: ExperimentConfig, out_root: Path, sizes: Optional[Sequence[int]] = None) -> ExperimentResult:
    cfg = base if sizes is None else base.model_copy(update={"gallery_sizes": list(sizes)})
    if not cfg.gallery_sizes:
        raise ConfigError("a gallery sweep needs gallery_sizes")
    return run_experiment(cfg, out_root)


def collect_report(out_root: Path) -> List[Row]:
    """One row per result.json below `out_root`, written to `out_root/report.csv`."""
    rows = []
    for path in sorted(out_root.rglob("result.json")):
        result = ExperimentResult.model_validate(SerUtils.from_file(path, ["json"]))
        rows.append({"experiment_id": result.experiment_id, **metric_row(result)})
    if not rows:
        raise DataError(f"no result.json found under {out_root}")
    _write_rows(rows, out_root / "report.csv")
    logger.info("report over %d experiments", len(rows))
    return rows
