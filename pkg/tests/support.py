"""Fixtures shared by the test packages: tiny synthetic datasets and experiment configs."""
from pathlib import Path
from typing import Any, Optional

from gazeauth.core.models import ExperimentConfig, SynthDatasetSpec
from gazeauth.core.signal.dataset import Dataset
from gazeauth.core.synth.dataset import generate_dataset
from gazeauth.utils.serialization import SerUtils

DATA_DIR = Path(__file__).parent / "data"


def tiny_synth_spec(**update: Any) -> SynthDatasetSpec:
    raw = SerUtils.from_file(DATA_DIR / "synth_tiny.yaml", ["yaml"])
    raw.update(update)
    return SynthDatasetSpec.model_validate(raw)


def tiny_dataset(out_dir: Path, **update: Any) -> Dataset:
    return generate_dataset(tiny_synth_spec(**update), out_dir)


def tiny_experiment(manifest: Path, experiment_id: Optional[str] = None, **update: Any) -> ExperimentConfig:
    raw = SerUtils.from_file(DATA_DIR / "experiment_tiny.yaml", ["yaml"])
    raw["manifest"] = str(manifest)
    if experiment_id is not None:
        raw["experiment_id"] = experiment_id
    raw.update(update)
    return ExperimentConfig.model_validate(raw)
