from pathlib import Path
from typing import Optional

import click

from facedyn.cli.base import RunContext, pass_run
from facedyn.schemas.synth import RandomRaters
from facedyn.services.pipeline_service import FEATURE_SETS


@click.command("eval", help="Evaluate trained classifiers on the test split.")
@click.option("--strata", type=click.Choice(["emotion"]), default=None, help="Report per-stratum metrics.")
@click.option(
    "--paper-compat",
    "--full-n-ci",
    "full_n_ci",
    is_flag=True,
    help="Sensitivity/specificity CIs with the full test size as n.",
)
@click.option("--balanced", is_flag=True, help="Evaluate the emotion-balanced models.")
@click.option("--feature-set", type=click.Choice(FEATURE_SETS), default="boruta", show_default=True)
@pass_run
def evaluate(run: RunContext, strata: Optional[str], full_n_ci: bool, balanced: bool, feature_set: str):
    body = run.service().eval(strata=strata, full_n_ci=full_n_ci, balanced=balanced, feature_set=feature_set)
    for spec in run.config.classifiers:
        metrics = {m.metric: m.estimate for m in body[spec.algorithm.value]["metrics"]}
        auc = metrics.get("roc_auc", float("nan"))
        click.echo(f"{spec.algorithm.value}: accuracy {metrics['accuracy']:.3f}, auc {auc:.3f}")


@click.command("valence", help="Real-only valence classifier scored on real and fake test videos.")
@click.option("--unbalanced", is_flag=True, help="Train without downsampling the valence classes.")
@pass_run
def valence(run: RunContext, unbalanced: bool):
    body = run.service().valence(unbalanced=unbalanced)
    if "accuracy_drop" in body:
        click.echo(f"Valence accuracy drop real → fake: {body['accuracy_drop']:.3f}")


@click.command("human", help="Human-judgment consensus, agreement and prediction analyses.")
@click.option("--ratings", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--participants", type=click.IntRange(min=1), default=89, help="Synthetic raters when no ratings.")
@click.option("--random-raters", type=click.FloatRange(0, 1), default=None, help="Synthetic raters with P(fake).")
@click.option("--scheme", "schemes", type=click.Choice(["loso", "lopo"]), multiple=True, default=("loso", "lopo"))
@pass_run
def human(run: RunContext, ratings: Optional[Path], participants: int, random_raters: Optional[float], schemes):
    model = RandomRaters(bias=random_raters) if random_raters is not None else None
    body = run.service().human(ratings, participants, model, tuple(schemes))
    if not body["n_videos"]:
        click.echo("No rated videos overlap the evaluated test set")
        return
    click.echo(
        f"Consensus accuracy {body['consensus_accuracy']:.3f}, model accuracy {body['model_accuracy']:.3f} "
        f"over {body['n_videos']} videos"
    )
