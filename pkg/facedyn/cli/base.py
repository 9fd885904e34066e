import logging
from pathlib import Path
from typing import Optional

import click

from facedyn.core.config import PipelineConfig, load_config, settings
from facedyn.core.errors import FacedynError
from facedyn.core.logging import configure_logging
from facedyn.services.pipeline_service import PipelineService

logger = logging.getLogger("facedyn.cli")


class FacedynGroup(click.Group):
    """Root group: a FacedynError escaping any command becomes its exit code."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except FacedynError as e:
            logger.error(e.detail)
            click.echo(f"Error: {e.detail}", err=True)
            ctx.exit(e.exit_code)


class RunContext:
    def __init__(self, config: PipelineConfig, output_dir: Path):
        self.config = config
        self.output_dir = output_dir

    def service(self, **config_updates) -> PipelineService:
        config = self.config.model_copy(update=config_updates) if config_updates else self.config
        return PipelineService(config, self.output_dir)


pass_run = click.make_pass_decorator(RunContext)


def build_context(
    config_path: Optional[Path],
    seed: Optional[int],
    output_dir: Optional[Path],
    data_dir: Optional[Path],
    manifest: Optional[Path],
    threads: Optional[int],
    log_level: Optional[str],
) -> RunContext:
    configure_logging(log_level or settings.LOG_LEVEL)
    if threads is not None:
        settings.THREADS = threads
    config = load_config(config_path)
    if seed is not None:
        config = config.with_seed(seed)
    paths = config.paths.model_copy(
        update={
            k: v
            for k, v in {"output_dir": output_dir, "data_dir": data_dir, "manifest": manifest}.items()
            if v is not None
        }
    )
    config = config.model_copy(update={"paths": paths})
    out = Path(output_dir or (config_path and config.paths.output_dir) or settings.OUTPUT_DIR)
    logger.debug("Config %s, output %s, threads %d", config.config_hash()[:12], out, settings.THREADS)
    return RunContext(config, out)
