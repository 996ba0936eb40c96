# rydpol/main.py
import logging

import click

from rydpol.api.commands import include_commands
from rydpol.config.engine_config import ENGINE_VERSION, engine_settings

logger = logging.getLogger("rydpol")


@click.group()
@click.version_option(ENGINE_VERSION, prog_name="rydpol")
@click.option("--log-level", default=None, help="Logging level (default RYDPOL_LOG_LEVEL or INFO)")
def cli(log_level):
    """Polarization-resolved Rydberg EIT simulations."""
    level = (log_level or engine_settings.log_level).upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format="%(asctime)s %(name)s %(levelname)s %(message)s")
    logging.getLogger("rydpol").setLevel(getattr(logging, level, logging.INFO))
    logger.debug(f"rydpol {ENGINE_VERSION} starting, workers={engine_settings.resolved_workers()}")


include_commands(cli)


def main():
    cli()


if __name__ == "__main__":
    main()
