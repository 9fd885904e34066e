import click

from facedyn.cli.base import RunContext, pass_run


@click.command("report", help="Render plots and the run summary from existing artifacts.")
@click.option(
    "--format", "formats", type=click.Choice(["csv", "json", "svg"]), multiple=True, help="Defaults to the config."
)
@pass_run
def report(run: RunContext, formats):
    updates = {"report": run.config.report.model_copy(update={"formats": list(formats)})} if formats else {}
    for name, path in run.service(**updates).report().items():
        click.echo(f"{name}: {path}")


@click.command("pipeline", help="synth/ingest → nmf → features → select → train → eval → report.")
@click.option("--no-synth", is_flag=True, help="Use the configured data directory instead of generating data.")
@pass_run
def pipeline(run: RunContext, no_synth: bool):
    outputs = run.service().pipeline(synthesize=not no_synth)
    click.echo(f"Pipeline finished; {len(outputs)} report artifacts in {run.output_dir}")
