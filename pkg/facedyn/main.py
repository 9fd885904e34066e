from pathlib import Path

import click

from facedyn.cli import data, evaluate, model, run
from facedyn.cli.base import FacedynGroup, build_context
from facedyn.core.config import settings


def create_app() -> click.Group:
    @click.group(cls=FacedynGroup, name=settings.APP_NAME.lower())
    @click.option(
        "--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="Pipeline YAML config."
    )
    @click.option("--seed", type=int, default=None, help="Master seed re-keying every stochastic stage.")
    @click.option("--output-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
    @click.option("--data-dir", type=click.Path(file_okay=False, path_type=Path), default=None)
    @click.option("--manifest", type=click.Path(dir_okay=False, path_type=Path), default=None)
    @click.option("--threads", type=click.IntRange(min=1), default=None, help="Overrides FACEDYN_THREADS.")
    @click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"]), default=None)
    @click.pass_context
    def app(ctx: click.Context, config_path, seed, output_dir, data_dir, manifest, threads, log_level):
        """Face-swap detection from facial Action Unit dynamics."""
        ctx.obj = build_context(config_path, seed, output_dir, data_dir, manifest, threads, log_level)

    # -----------------------------------------------------
    # Subcommands
    # -----------------------------------------------------
    app.add_command(data.synth)
    app.add_command(data.ingest)
    app.add_command(model.nmf)
    app.add_command(model.features)
    app.add_command(model.select)
    app.add_command(model.train)
    app.add_command(evaluate.evaluate)
    app.add_command(evaluate.valence)
    app.add_command(evaluate.human)
    app.add_command(run.pipeline)
    app.add_command(run.report)

    return app


app = create_app()
