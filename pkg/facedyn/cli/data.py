from typing import Optional

import click

from facedyn.cli.base import RunContext, pass_run


@click.command("synth", help="Generate a synthetic AU dataset (CSV files plus manifest).")
@click.option("--pairs", type=click.IntRange(min=2), default=None, help="Number of real/fake pairs.")
@click.option("--emotive-fraction", type=click.FloatRange(0, 1), default=None)
@click.option("--jitter-sd", type=click.FloatRange(min=0), default=None, help="Velocity jitter of fakes.")
@click.option("--scope", type=click.Choice(["all", "bursts"]), default=None, help="Where fakes are degraded.")
@click.option("--low-quality-fraction", type=click.FloatRange(0, 1), default=None)
@pass_run
def synth(
    run: RunContext,
    pairs: Optional[int],
    emotive_fraction: Optional[float],
    jitter_sd: Optional[float],
    scope: Optional[str],
    low_quality_fraction: Optional[float],
):
    profile = run.config.synth
    degradation = {k: v for k, v in {"jitter_sd": jitter_sd, "scope": scope}.items() if v is not None}
    if degradation:
        profile = profile.model_copy(update={"degradation": profile.degradation.model_copy(update=degradation)})
    updates = {
        k: v
        for k, v in {
            "n_pairs": pairs,
            "emotive_fraction": emotive_fraction,
            "low_quality_fraction": low_quality_fraction,
        }.items()
        if v is not None
    }
    if updates:
        profile = profile.model_copy(update=updates)
    data_dir = run.service(synth=profile).synth()
    click.echo(f"Wrote {profile.n_pairs} pairs to {data_dir}")


@click.command("ingest", help="Filter, preprocess, split and normalize the AU recordings.")
@pass_run
def ingest(run: RunContext):
    summary = run.service().ingest()
    click.echo(
        f"Kept {summary['n_kept']} of {summary['n_input']} recordings "
        f"({summary['counts']['train']} train / {summary['counts']['test']} test)"
    )
