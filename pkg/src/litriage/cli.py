"""Command-line surface wiring the pipeline stages together.

Every command validates its configuration before touching anything.
Exit codes: 0 success, 2 usage, 3 network, 4 protocol, 5 data.
"""

from __future__ import annotations

import functools
import sys

import click

from . import pipeline
from .config import load_run_config, validate_config
from .errors import (
    EXIT_DATA,
    EXIT_NETWORK,
    EXIT_PROTOCOL,
    EXIT_USAGE,
    DataError,
    NetworkError,
    ProtocolError,
)


def guarded(f):
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except click.ClickException:
            raise
        except ValueError as exc:
            _die(EXIT_USAGE, exc)
        except NetworkError as exc:
            _die(EXIT_NETWORK, exc)
        except ProtocolError as exc:
            _die(EXIT_PROTOCOL, exc)
        except (DataError, OSError) as exc:
            _die(EXIT_DATA, exc)

    return wrapper


def _die(code: int, exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def common_options(f):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True), default=None,
                     help="YAML run configuration; flags override it."),
        click.option("--out", "out_dir", default=None, help="Output directory for artifacts."),
        click.option("--seed", type=int, default=None, help="Seed for every randomized step."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _year_range(value: str | None) -> tuple[int, int] | None:
    if value is None:
        return None
    try:
        lo, hi = value.split(":")
        return int(lo), int(hi)
    except ValueError:
        raise ValueError(f"year range must look like MIN:MAX, got {value!r}") from None


@click.group()
def cli() -> None:
    """Batch literature triage: fetch, classify, evaluate, and report."""


@cli.command()
@common_options
@click.option("--query", default=None, help="PubMed search query.")
@click.option("--max-articles", type=int, default=None)
@click.option("--year-range", "year_range_text", default=None, help="MIN:MAX publication years.")
@click.option("--require-abstract", is_flag=True, default=None)
@click.option("--fixtures", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of recorded API responses; no network use.")
@guarded
def fetch(config_path, out_dir, seed, query, max_articles, year_range_text, require_abstract, fixtures):
    """Retrieve article metadata and persist the filtered corpus."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        query=query,
        max_articles=max_articles,
        year_range=_year_range(year_range_text),
        require_abstract=require_abstract,
        fixtures=fixtures,
    )
    validate_config(config, need_query=True)
    pipeline.do_fetch(config, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@click.option("--backend", default=None, help="'mock' or the scoring service URL.")
@click.option("--threshold", type=float, default=None)
@click.option("--hierarchical", is_flag=True, default=None,
              help="Decompose multilabel groups into per-label binary decisions.")
@click.option("--parallelism", type=int, default=None)
@guarded
def classify(config_path, out_dir, seed, taxonomy, input_modes, backend, threshold,
             hierarchical, parallelism):
    """Score every corpus record and persist per-group decisions."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        input_modes=tuple(input_modes) or None,
        backend=backend,
        threshold=threshold,
        hierarchical=hierarchical,
        parallelism=parallelism,
    )
    validate_config(config, need_taxonomy=True)
    pipeline.do_classify(config, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--annotations", type=click.Path(exists=True), default=None)
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@click.option("--backend", default=None)
@click.option("--objective", type=click.Choice(["f1", "precision", "recall"]), default=None)
@click.option("--tuning-fraction", type=float, default=None)
@guarded
def tune(config_path, out_dir, seed, taxonomy, annotations, input_modes, backend,
         objective, tuning_fraction):
    """Sweep per-label thresholds for multilabel groups on a tuning split."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        annotations=annotations,
        input_modes=tuple(input_modes) or None,
        backend=backend,
        objective=objective,
        tuning_fraction=tuning_fraction,
    )
    validate_config(config, need_taxonomy=True, need_annotations=True)
    pipeline.do_tune(config, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--annotations", type=click.Path(exists=True), default=None)
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@guarded
def evaluate(config_path, out_dir, seed, taxonomy, annotations, input_modes):
    """Compare persisted decisions against majority-vote gold labels."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        annotations=annotations,
        input_modes=tuple(input_modes) or None,
    )
    validate_config(config, need_taxonomy=True, need_annotations=True)
    pipeline.do_evaluate(config, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--annotations", type=click.Path(exists=True), default=None)
@click.option("--variants", "variants_path", type=click.Path(exists=True), required=True,
              help="YAML file with named phrasing sets for one group.")
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@click.option("--backend", default=None)
@guarded
def ablate(config_path, out_dir, seed, taxonomy, annotations, variants_path, input_modes, backend):
    """Compare label-phrasing variants side by side."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        annotations=annotations,
        input_modes=tuple(input_modes) or None,
        backend=backend,
    )
    validate_config(config, need_taxonomy=True, need_annotations=True)
    pipeline.do_ablate(config, variants_path, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@click.option("--year-range", "year_range_text", default=None, help="MIN:MAX for the time axis.")
@guarded
def trends(config_path, out_dir, seed, taxonomy, input_modes, year_range_text):
    """Aggregate persisted decisions into category and time trends."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        input_modes=tuple(input_modes) or None,
        year_range=_year_range(year_range_text),
    )
    validate_config(config, need_taxonomy=True)
    pipeline.do_trends(config, click.echo)


@cli.command()
@common_options
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--input-mode", "input_modes", multiple=True,
              type=click.Choice(["abstract", "title", "fused", "appended"]))
@guarded
def report(config_path, out_dir, seed, taxonomy, input_modes):
    """Render the report document, charts, and CSV sidecars."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        taxonomy=taxonomy,
        input_modes=tuple(input_modes) or None,
    )
    validate_config(config, need_taxonomy=True)
    pipeline.do_report(config, click.echo)


@cli.command("run-all")
@common_options
@click.option("--query", default=None)
@click.option("--taxonomy", type=click.Path(exists=True), default=None)
@click.option("--annotations", type=click.Path(exists=True), default=None)
@click.option("--backend", default=None)
@click.option("--fixtures", type=click.Path(exists=True, file_okay=False), default=None)
@guarded
def run_all(config_path, out_dir, seed, query, taxonomy, annotations, backend, fixtures):
    """Chain fetch, tune, classify, evaluate, trends, and report."""
    config = load_run_config(
        config_path,
        out_dir=out_dir,
        seed=seed,
        query=query,
        taxonomy=taxonomy,
        annotations=annotations,
        backend=backend,
        fixtures=fixtures,
    )
    validate_config(config, need_query=True, need_taxonomy=True)
    pipeline.do_run_all(config, click.echo)


def main() -> None:
    cli()


if __name__ == "__main__":
    main()
