import click

from facedyn.cli.base import RunContext, pass_run
from facedyn.services.pipeline_service import FEATURE_SETS


@click.command("nmf", help="Rank scan, NMF fit and representative-AU selection on the training set.")
@click.option("--rank", type=click.IntRange(1, 17), default=None, help="Rank of the final factorization.")
@click.option("--no-scan", is_flag=True, help="Skip the rank scan.")
@pass_run
def nmf(run: RunContext, rank, no_scan: bool):
    updates = {"nmf": run.config.nmf.model_copy(update={"rank": rank})} if rank else {}
    body = run.service(**updates).nmf(scan=not no_scan)
    click.echo(f"Rank {body['rank']}: representative AUs {', '.join(body['representatives'].values())}")


@click.command("features", help="Extract and impute temporal features of the representative AUs.")
@click.option("--transitions", is_flag=True, help="Also write the transition-event matrix.")
@pass_run
def features(run: RunContext, transitions: bool):
    body = run.service().features(transitions=transitions)
    click.echo(f"{body['n_features']} features ({len(body['dropped'])} dropped)")


@click.command("select", help="Boruta feature selection plus the PCA alternative.")
@pass_run
def select(run: RunContext):
    body = run.service().select()
    click.echo(
        f"Confirmed {len(body['confirmed'])}, tentative {len(body['tentative'])}, rejected {len(body['rejected'])}"
    )


@click.command("train", help="Train every configured classifier on the selected features.")
@click.option("--balance-emotion", is_flag=True, help="Downsample training videos to equal emotion counts.")
@click.option(
    "--feature-set",
    type=click.Choice(FEATURE_SETS),
    default="boruta",
    show_default=True,
    help="Classifier inputs: Boruta-confirmed features, PCA scores or transition summaries.",
)
@pass_run
def train(run: RunContext, balance_emotion: bool, feature_set: str):
    body = run.service().train(balance_emotion=balance_emotion, feature_set=feature_set)
    click.echo(
        f"Trained {len(run.config.classifiers)} classifiers on {body['n_train']} videos "
        f"with {len(body['features'])} {feature_set} features"
    )
