"""Command line interface.

Usage errors exit with code 2, pipeline errors with code 1 after printing
``<ErrorName>: <message>`` to stderr.
"""

from __future__ import annotations

import logging
import sys
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import typer
import yaml
from rich.console import Console
from rich.logging import RichHandler
from yaml import YAMLError

from glyphvote.config import Protocol, RunConfig, Settings, SettingsFile, settings_to_dict
from glyphvote.dataset import (
    LabeledSample,
    cross_validate,
    evaluate,
    extract_all,
    format_report,
    load_dataset,
    train_ensemble,
)
from glyphvote.ensemble import FusionMode
from glyphvote.exceptions import (
    DimensionMismatch,
    GlyphError,
    MultiConfigurationError,
)
from glyphvote.features import extract_feature_bundle
from glyphvote.imaging import read_gray_image
from glyphvote.storage import load_ensemble, save_ensemble, write_feature_csv, write_report
from glyphvote.synthetic import write_corpus

log = logging.getLogger(__name__)

app = typer.Typer(
    rich_markup_mode="rich",
    help="Handwritten character recognition by weighted majority voting.",
    no_args_is_help=True,
)
config_cli = typer.Typer(rich_markup_mode="rich", help="Manage the settings file.")
app.add_typer(config_cli, name="config")


@contextmanager
def human_readable_errors() -> Iterator[None]:
    """Print pipeline and settings errors by name instead of a traceback."""
    try:
        yield
    except MultiConfigurationError as e:
        for error in e.errors:
            typer.echo(f"{error.name}: {error}", err=True)
        raise typer.Exit(1)
    except GlyphError as e:
        typer.echo(f"{e.name}: {e}", err=True)
        raise typer.Exit(1)
    except YAMLError as e:
        typer.echo(f"ConfigurationError: invalid YAML ({e.__class__.__name__})", err=True)
        raise typer.Exit(1)


def _configure_logging(verbose: bool) -> None:
    logger = logging.getLogger("glyphvote")
    for handler in [h for h in logger.handlers if isinstance(h, RichHandler)]:
        logger.removeHandler(handler)
    logger.addHandler(
        RichHandler(console=Console(stderr=True), show_path=False, markup=False)
    )
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def _settings(command: str, **overrides: Any) -> Settings:
    run_config = RunConfig(command, SettingsFile().load(overrides))
    log.debug(f"Running {run_config.command} with {settings_to_dict(run_config.settings)}")
    return run_config.settings


def _require(value: Path | None, flag: str) -> Path:
    if value is None:
        raise typer.BadParameter(f"{flag} is required (flag or settings file)")
    return value


def _dump_dir(settings: Settings) -> Path | None:
    return settings.debug_dir if settings.debug_dump else None


def _load_features(settings: Settings) -> tuple[list[LabeledSample], list[str]]:
    samples, labels = load_dataset(
        _require(settings.data_root, "--data"), settings.skip_unreadable
    )
    return extract_all(samples, settings.workers, _dump_dir(settings)), labels


@app.callback()
def callback(
    verbose: Annotated[
        bool, typer.Option("--verbose", "-v", help="Show debug messages.")
    ] = False,
):
    """Handwritten character recognition by weighted majority voting."""
    _configure_logging(verbose)


DataOption = Annotated[
    Path | None,
    typer.Option("--data", help="Dataset root, one subdirectory per class."),
]
WorkersOption = Annotated[
    int | None, typer.Option(min=1, help="Threads for feature extraction.")
]


@app.command()
def extract(
    data: DataOption = None,
    out: Annotated[Path, typer.Option("--out", help="Feature CSV to write.")] = Path(
        "features.csv"
    ),
    workers: WorkersOption = None,
):
    """Extract the four feature families of every image into a CSV."""
    with human_readable_errors():
        settings = _settings("extract", data_root=data, workers=workers)
        samples, labels = _load_features(settings)
        rows = write_feature_csv(out, samples, labels)
    typer.echo(f"Wrote {rows} rows for {len(samples)} samples to {out}")


@app.command()
def train(
    data: DataOption = None,
    out: Annotated[
        Path | None, typer.Option("--out", help="Directory for models and reports.")
    ] = None,
    seed: Annotated[int | None, typer.Option(help="Weight and shuffle seed.")] = None,
    fold_seed: Annotated[int | None, typer.Option(help="Fold assignment seed.")] = None,
    epochs: Annotated[int | None, typer.Option(min=1, help="Epoch cap.")] = None,
    protocol: Annotated[
        Protocol | None, typer.Option(help="Evaluation protocol.")
    ] = None,
    evaluate_folds: Annotated[
        bool,
        typer.Option(
            "--evaluate/--no-evaluate",
            help="Run the evaluation protocol before training the final ensemble.",
        ),
    ] = True,
    workers: WorkersOption = None,
):
    """Train the four classifiers and write models, manifest and reports."""
    with human_readable_errors():
        settings = _settings(
            "train",
            data_root=data,
            out_dir=out,
            seed=seed,
            fold_seed=fold_seed,
            epochs=epochs,
            protocol=protocol,
            workers=workers,
        )
        out_dir = _require(settings.out_dir, "--out")
        samples, labels = _load_features(settings)

        if evaluate_folds:
            report = cross_validate(samples, labels, settings)
            write_report(out_dir, report)
            typer.echo(format_report(report))

        ensemble, _ = train_ensemble(samples, labels, settings)
        manifest = save_ensemble(
            out_dir, ensemble, settings.fusion_mode, settings.eval_mode
        )
    typer.echo(f"Ensemble written to {manifest}")


@app.command("eval")
def evaluate_cmd(
    models: Annotated[
        Path | None, typer.Option("--models", help="Directory of a trained ensemble.")
    ] = None,
    data: DataOption = None,
    mode: Annotated[
        FusionMode | None, typer.Option(help="Fusion used for the top-k report.")
    ] = None,
    top: Annotated[int | None, typer.Option("--top", min=1)] = None,
    report_dir: Annotated[
        Path | None, typer.Option(help="Also write report.txt and report.json here.")
    ] = None,
    workers: WorkersOption = None,
):
    """Evaluate a trained ensemble on a labeled dataset."""
    with human_readable_errors():
        settings = _settings(
            "eval",
            models_dir=models,
            data_root=data,
            eval_mode=mode,
            top_k=top,
            workers=workers,
        )
        ensemble, _ = load_ensemble(_require(settings.models_dir, "--models"))
        samples, labels = _load_features(settings)

        index = {name: i for i, name in enumerate(ensemble.labels)}
        unknown = sorted(set(labels) - set(index))
        if unknown:
            raise DimensionMismatch(
                f"Classes unknown to the ensemble: {', '.join(unknown)}"
            )
        relabeled = [
            LabeledSample(s.id, index[labels[s.label]], s.path, s.features)
            for s in samples
        ]
        report = evaluate(ensemble, relabeled, settings.eval_mode, settings.top_k)
        if report_dir is not None:
            write_report(report_dir, report)
    typer.echo(format_report(report), nl=False)


@app.command()
def predict(
    image: Annotated[Path, typer.Argument(help="PGM or PNG scan of one character.")],
    models: Annotated[
        Path | None, typer.Option("--models", help="Directory of a trained ensemble.")
    ] = None,
    top: Annotated[int | None, typer.Option("--top", min=1)] = None,
    mode: Annotated[FusionMode | None, typer.Option(help="Fusion mode.")] = None,
):
    """Print the best classes of a single image with their fused scores."""
    with human_readable_errors():
        settings = _settings("predict", models_dir=models, top_k=top, fusion_mode=mode)
        models_dir = _require(settings.models_dir, "--models")
        bundle = extract_feature_bundle(
            read_gray_image(image), dump_dir=_dump_dir(settings), stem=image.stem
        )
        ensemble, _ = load_ensemble(models_dir)
        k = min(settings.top_k, len(ensemble.labels))
        ranking = ensemble.top_k(bundle, k, settings.fusion_mode)
    for rank, (label, score) in enumerate(ranking, start=1):
        typer.echo(f"{rank}\t{label}\t{score:.4f}")


@app.command()
def synth(
    out: Annotated[Path, typer.Option("--out", help="Corpus root to create.")],
    per_class: Annotated[int, typer.Option(min=3)] = 60,
    seed: int = 0,
):
    """Write a synthetic corpus of ten stroke glyph classes."""
    paths = write_corpus(out, per_class, seed)
    typer.echo(f"Wrote {len(paths)} images to {out}")


# ------------------------------- Settings file ------------------------------- #


@config_cli.command()
def show():
    """Show the resolved settings."""
    with human_readable_errors():
        settings = _settings("config show")
    typer.echo(yaml.safe_dump(settings_to_dict(settings), sort_keys=False), nl=False)


@config_cli.command()
def path():
    """Show the path of the settings file."""
    typer.echo(SettingsFile.get_file())


@config_cli.command()
def init(
    force: Annotated[bool, typer.Option(help="Overwrite an existing file.")] = False,
):
    """Write the default settings file."""
    settings_file = SettingsFile()
    if settings_file.path.exists() and not force:
        typer.echo(f"{settings_file.path} exists, use --force to overwrite.", err=True)
        raise typer.Exit(1)
    settings_file.write_default(force=force)
    typer.echo(f"Settings written to {settings_file.path}")


@config_cli.command()
def validate():
    """Validate the settings file."""
    with human_readable_errors():
        _settings("config validate")
    typer.echo("Settings are valid.")


def run(argv: Sequence[str] | None = None) -> int:
    """Run the command line with ``argv`` and return the exit code."""
    try:
        app(args=list(argv) if argv is not None else None, prog_name="glyphvote")
    except SystemExit as e:
        if e.code is None or isinstance(e.code, int):
            return e.code or 0
        typer.echo(e.code, err=True)
        return 1
    return 0


def main() -> None:
    sys.exit(run())
