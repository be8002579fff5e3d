import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from gazeauth.core.errors import ConfigError, DataError, NumericalError
from gazeauth.core.evaluation.curves import CurveFit, fit_scaling_curve
from gazeauth.core.evaluation.identify import IdentificationReport, gallery_sweep, rank1_from_scores, write_sweep_csv
from gazeauth.core.evaluation.permanence import FeatureTable, PermanenceReport, analyze_permanence, write_feature_csv
from gazeauth.core.evaluation.verify import (
    ScoreSet,
    VerificationReport,
    all_pairs_scores,
    verification_report,
    write_roc_csv,
    write_scores_csv,
)
from gazeauth.core.factories import CurveModelFactory
from gazeauth.core.harness.tiers import split_by_tiers
from gazeauth.core.models import ExperimentConfig
from gazeauth.core.network.artifact import ModelArtifact
from gazeauth.core.pipeline import EmbeddingPipeline
from gazeauth.core.signal.dataset import Dataset
from gazeauth.core.training.trainer import train, write_loss_history
from gazeauth.utils.hashing import rng_for, stable_hash
from gazeauth.utils.serialization import SerUtils

logger = logging.getLogger(__name__)

_TRAIN_SUBSET_STREAM = 3


def config_hash(config: ExperimentConfig) -> str:
    return stable_hash(config.model_dump(mode="json", by_alias=True))


class ExperimentResult(BaseModel):
    experiment_id: str
    config_hash: str
    seed: int
    model_hash: str
    epochs_completed: List[int]
    enroll_seconds: float
    verify_seconds: float
    n_train_users: int
    n_test_users: int
    n_enrolled: int
    n_excluded: int
    verification: VerificationReport
    identification: IdentificationReport
    sweep: Optional[Dict[str, Any]] = None
    curves: List[CurveFit] = Field(default_factory=list)
    permanence: Optional[PermanenceReport] = None

    @property
    def result_hash(self) -> str:
        return stable_hash(self.model_dump(mode="json"))


@dataclass
class Embeddings:
    enroll: Dict[str, np.ndarray]
    verify: Dict[str, np.ndarray]
    excluded: List[str]


def select_users(dataset: Dataset, config: ExperimentConfig) -> Tuple[List[str], List[str]]:
    """(train users, test users): accuracy tiers when configured, the manifest split otherwise."""
    if config.train_tiers is not None or config.test_tiers is not None:
        if not config.train_tiers or not config.test_tiers:
            raise ConfigError("train_tiers and test_tiers must be given together")
        train_users, test_users = split_by_tiers(dataset, config.tier_scheme, config.train_tiers, config.test_tiers)
    else:
        train_users = sorted(u.user_id for u in dataset.manifest.split("train"))
        test_users = sorted(u.user_id for u in dataset.manifest.split("test"))

    if config.train_size is not None:
        if config.train_size > len(train_users):
            raise DataError(f"train_size {config.train_size} exceeds the {len(train_users)} training users")
        # a prefix of one seeded permutation, so smaller subsets nest in larger ones
        order = rng_for(config.seed, _TRAIN_SUBSET_STREAM).permutation(len(train_users))
        train_users = sorted(train_users[i] for i in order[: config.train_size])
    if not test_users:
        raise DataError("no test users selected")
    return train_users, test_users


def obtain_model(config: ExperimentConfig, dataset: Dataset, train_users: List[str], out_dir: Path) -> ModelArtifact:
    """Load `config.model_path` when it exists, otherwise train and save into `out_dir`."""
    if config.model_path is not None and Path(config.model_path).is_file():
        artifact = ModelArtifact.load(Path(config.model_path))
        logger.info("loaded model %s", config.model_path)
    else:
        result = train(
            dataset, train_users, config.channels, config.signal, config.network,
            config.minibatch, config.loss, config.plan, config.train_tasks, seed=config.seed,
        )
        artifact = result.artifact
        artifact.save(out_dir / "model.json")
        if len(result.histories) == 1:
            write_loss_history(result.histories[0], out_dir / "loss_history.csv")
        else:
            for f, history in enumerate(result.histories):
                write_loss_history(history, out_dir / f"loss_history_fold{f}.csv")
    if artifact.channels != config.channels:
        raise ConfigError(f"model uses channels {artifact.channels.label}, the experiment asks for {config.channels.label}")
    return artifact


def embed_test_users(artifact: ModelArtifact, dataset: Dataset, test_users: List[str], config: ExperimentConfig) -> Embeddings:
    pipeline = EmbeddingPipeline.from_artifact(artifact)
    enroll, missing_e = pipeline.centroids(dataset, test_users, config.enroll, config.enroll_chunks)
    verify, missing_v = pipeline.centroids(dataset, test_users, config.verify, config.verify_chunks)
    if not enroll or not verify:
        raise DataError("no test user has usable enrollment and verification recordings")
    return Embeddings(enroll, verify, sorted(set(missing_e) | set(missing_v)))


def run_experiment(config: ExperimentConfig, out_root: Path, artifact: Optional[ModelArtifact] = None) -> ExperimentResult:
    """
    Preprocess, train (unless a model is given or configured), embed the first
    n_e / n_v windows of the enrollment / verification recordings of every test
    user, and score. All files go to `out_root/<experiment_id>/`.
    """
    out_dir = out_root / config.experiment_id
    out_dir.mkdir(parents=True, exist_ok=True)
    SerUtils.to_file(config.model_dump(mode="json", by_alias=True), out_dir / "config.json")

    dataset = Dataset.open(Path(config.manifest))
    train_users, test_users = select_users(dataset, config)
    logger.info("experiment %s: %d train / %d test users", config.experiment_id, len(train_users), len(test_users))
    if artifact is None:
        artifact = obtain_model(config, dataset, train_users, out_dir)

    emb = embed_test_users(artifact, dataset, test_users, config)
    scores = all_pairs_scores(emb.enroll, emb.verify)
    verification, roc = verification_report(scores, config.far_targets)
    identification = rank1_from_scores(scores)
    write_roc_csv(roc, out_dir / "roc.csv")
    if config.export_scores:
        write_scores_csv(scores, out_dir / "scores.csv")

    sweep, curves = None, []
    if config.gallery_sizes:
        sweep, curves = _gallery_and_curves(scores, config, out_dir)

    permanence = None
    if config.permanence:
        report, rows = analyze_permanence(
            FeatureTable.from_embeddings(emb.enroll, emb.verify),
            config.icc_form, config.normality_references, config.seed,
        )
        write_feature_csv(rows, out_dir / "permanence_features.csv")
        permanence = report

    enroll_seconds, verify_seconds = config.seconds
    result = ExperimentResult(
        experiment_id=config.experiment_id,
        config_hash=config_hash(config),
        seed=config.seed,
        model_hash=artifact.hash(),
        epochs_completed=[m.epochs_completed for m in artifact.members],
        enroll_seconds=enroll_seconds,
        verify_seconds=verify_seconds,
        n_train_users=len(train_users),
        n_test_users=len(test_users),
        n_enrolled=len(emb.enroll),
        n_excluded=len(test_users) - len(emb.enroll),
        verification=verification,
        identification=identification,
        sweep=sweep,
        curves=curves,
        permanence=permanence,
    )
    SerUtils.to_file(result.model_dump(mode="json"), out_dir / "result.json")
    logger.info(
        "experiment %s: EER %.4f%%, Rank-1 IR %.2f%%",
        config.experiment_id, verification.eer, identification.rank1_ir,
    )
    return result


def _gallery_and_curves(scores: ScoreSet, config: ExperimentConfig, out_dir: Path) -> Tuple[Dict[str, Any], List[CurveFit]]:
    result = gallery_sweep(
        scores, config.gallery_sizes, config.gallery_samples, config.seed, config.far_targets, config.threads
    )
    write_sweep_csv(result, out_dir / "sweep.csv")
    sizes, ir_p95 = result.series("rank1_ir", "p95")
    curves = []
    for family in config.curve_families:
        model = CurveModelFactory.build(family, config.linear_tail if family == "linear" else None)
        try:
            curves.append(fit_scaling_curve(sizes, ir_p95, model))
        except NumericalError as e:
            logger.warning("%s curve not fitted: %s", family, e)
    if curves:
        SerUtils.to_file([c.model_dump(mode="json") for c in curves], out_dir / "curves.json")
    return result.to_dict(), curves
