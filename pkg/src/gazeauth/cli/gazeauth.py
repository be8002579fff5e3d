import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, List, Optional, Type, TypeVar

import click
import cloup
from cloup import Context, HelpFormatter, HelpTheme, Style
from pydantic import BaseModel, ValidationError

from gazeauth.core.errors import ConfigError, GazeAuthError
from gazeauth.core.harness.experiment import obtain_model, run_experiment, select_users
from gazeauth.core.harness.sweeps import (
    collect_report,
    run_accuracy_tiers,
    sweep_duration,
    sweep_gallery,
    sweep_train_size,
)
from gazeauth.core.models import ExperimentConfig, SynthDatasetSpec
from gazeauth.core.signal.dataset import Dataset
from gazeauth.core.synth.dataset import generate_dataset
from gazeauth.utils.logs import configure_logging
from gazeauth.utils.serialization import SerUtils

CONTEXT_SETTINGS = Context.settings(
    align_option_groups=True,
    align_sections=True,
    show_constraints=True,
    show_subcommand_aliases=True,
    formatter_settings=HelpFormatter.settings(
        max_width=100,
        col1_max_width=40,
        col2_min_width=60,
        indent_increment=3,
        col_spacing=3,
        theme=HelpTheme(
            invoked_command=Style(fg="bright_yellow"),
            heading=Style(fg="bright_white", bold=True),
            constraint=Style(fg="magenta"),
            col1=Style(fg="bright_yellow"),
        ),
    ),
)

M = TypeVar("M", bound=BaseModel)


@dataclass
class GlobalOptions:
    config: Optional[Path]
    seed: Optional[int]
    out: Path
    threads: Optional[int]


def _load(model: Type[M], path: Optional[Path], required: bool = True) -> Optional[M]:
    if path is None:
        if required:
            raise ConfigError("this command needs --config")
        return None
    try:
        raw = SerUtils.from_file(path, ["yaml", "json"])
    except (OSError, RuntimeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return model.model_validate(raw)


def _experiment(opts: GlobalOptions) -> ExperimentConfig:
    config = _load(ExperimentConfig, opts.config)
    assert config is not None
    update: dict[str, Any] = {}
    if opts.seed is not None:
        update["seed"] = opts.seed
    if opts.threads is not None:
        update["threads"] = opts.threads
    return config.model_copy(update=update)


def _guarded(fn: Callable[..., None]) -> Callable[..., None]:
    """Map the error families to exit codes: config 1, data 2, numerical 3."""
    @functools.wraps(fn)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        ctx = click.get_current_context()
        try:
            fn(*args, **kwargs)
        except GazeAuthError as e:
            click.secho(f"ERROR: {e}", err=True, fg="yellow")
            ctx.exit(e.exit_code)
        except ValidationError as e:
            click.secho(f"ERROR: invalid configuration: {e}", err=True, fg="yellow")
            ctx.exit(ConfigError.exit_code)
    return wrapper


def _sizes(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"sizes must be comma-separated integers, got {value!r}") from None


@cloup.group(
    context_settings=CONTEXT_SETTINGS,
    help="Gazeauth CLI: synthesize gaze data, train embedders and evaluate verification and identification.",
)
@cloup.option_group(
    "Global options",
    cloup.option("-c", "--config", "config", type=click.Path(dir_okay=False, path_type=Path), help="Configuration file (YAML or JSON)."),
    cloup.option("--seed", "seed", type=int, default=None, help="Override the configured seed."),
    cloup.option("-o", "--out", "out", type=click.Path(file_okay=False, path_type=Path), default=Path("out"), show_default=True, help="Output root directory."),
    cloup.option("--threads", "threads", type=click.IntRange(min=1), default=None, help="Worker threads."),
    cloup.option("-v", "--verbose", "verbose", count=True, help="-v for INFO, -vv for DEBUG."),
)
@click.pass_context
def gazeauth(ctx: click.Context, config: Optional[Path], seed: Optional[int], out: Path, threads: Optional[int], verbose: int) -> None:
    configure_logging(verbose)
    ctx.obj = GlobalOptions(config, seed, out, threads)


@gazeauth.command("synth", aliases=["gen"], help="Generate a synthetic dataset (recordings + manifest).")
@cloup.option("-n", "--name", "name", default="synthetic", show_default=True, help="Dataset directory under --out.")
@cloup.option("--users", "users", type=click.IntRange(min=2), default=None, help="Override the number of users.")
@click.pass_obj
@_guarded
def gazeauth_synth(opts: GlobalOptions, name: str, users: Optional[int]) -> None:
    spec = _load(SynthDatasetSpec, opts.config, required=False) or SynthDatasetSpec()
    update: dict[str, Any] = {}
    if opts.seed is not None:
        update["master_seed"] = opts.seed
    if users is not None:
        update["n_users"] = users
    spec = SynthDatasetSpec.model_validate({**spec.model_dump(), **update})
    dataset = generate_dataset(spec, opts.out / name, threads=opts.threads or 1)
    click.secho(f"{opts.out / name / 'manifest.json'} {len(dataset.user_ids)}")


@gazeauth.command("train", help="Train an embedder on the configured training users.")
@click.pass_obj
@_guarded
def gazeauth_train(opts: GlobalOptions) -> None:
    config = _experiment(opts)
    out_dir = opts.out / config.experiment_id
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = Dataset.open(Path(config.manifest))
    train_users, _ = select_users(dataset, config)
    artifact = obtain_model(config.model_copy(update={"model_path": None}), dataset, train_users, out_dir)
    click.secho(f"{out_dir / 'model.json'} {artifact.hash()}")


@gazeauth.command("eval", aliases=["run"], help="Run one experiment: embed, score and report.")
@click.pass_obj
@_guarded
def gazeauth_eval(opts: GlobalOptions) -> None:
    result = run_experiment(_experiment(opts), opts.out)
    click.secho(f"EER {result.verification.eer:.4f}% Rank-1 IR {result.identification.rank1_ir:.2f}% {result.result_hash}")


@gazeauth.command("sweep-train-size", help="Retrain on nested subsets of N training users.")
@cloup.option("--sizes", "sizes", required=True, help="Comma-separated training sizes, increasing.")
@click.pass_obj
@_guarded
def gazeauth_sweep_train_size(opts: GlobalOptions, sizes: str) -> None:
    rows = sweep_train_size(_experiment(opts), _sizes(sizes) or [], opts.out)
    click.secho(f"{len(rows)} rows")


@gazeauth.command("sweep-duration", help="Evaluate enrollment / verification chunk counts with one model.")
@click.pass_obj
@_guarded
def gazeauth_sweep_duration(opts: GlobalOptions) -> None:
    rows = sweep_duration(_experiment(opts), opts.out)
    click.secho(f"{len(rows)} rows")


@gazeauth.command("sweep-gallery", help="Subsample galleries of increasing size and fit scaling curves.")
@cloup.option("--sizes", "sizes", default=None, help="Comma-separated gallery sizes; defaults to the config's.")
@click.pass_obj
@_guarded
def gazeauth_sweep_gallery(opts: GlobalOptions, sizes: Optional[str]) -> None:
    result = sweep_gallery(_experiment(opts), opts.out, _sizes(sizes))
    for c in result.curves:
        click.secho(f"{c.family} root={c.root} r2_adj={c.r2_adj:.6f}")


@gazeauth.command("accuracy-tiers", help="Train on high/low spatial-accuracy tiers, test on each test tier.")
@click.pass_obj
@_guarded
def gazeauth_accuracy_tiers(opts: GlobalOptions) -> None:
    rows = run_accuracy_tiers(_experiment(opts), opts.out)
    click.secho(f"{len(rows)} rows")


@gazeauth.command("permanence", help="Run an experiment with the embedding permanence analysis.")
@click.pass_obj
@_guarded
def gazeauth_permanence(opts: GlobalOptions) -> None:
    result = run_experiment(_experiment(opts).model_copy(update={"permanence": True}), opts.out)
    p = result.permanence
    assert p is not None
    click.secho(f"ICC median {p.icc_median:.4f} min {p.icc_min:.4f} max {p.icc_max:.4f}")


@gazeauth.command("report", help="Aggregate every result.json under --out into report.csv.")
@click.pass_obj
@_guarded
def gazeauth_report(opts: GlobalOptions) -> None:
    rows = collect_report(opts.out)
    click.secho(f"{opts.out / 'report.csv'} {len(rows)}")


def run() -> None:
    gazeauth()


if __name__ == "__main__":
    run()
