# rydpol/api/verify_commands.py
import json
import logging

import click

from rydpol.api.common import exit_on_error
from rydpol.db.artifact_store import write_json
from rydpol.exceptions import VerificationError
from rydpol.services.verify_service import VerifyService

logger = logging.getLogger("rydpol.cli.verify")


@click.command("verify")
@click.option("--report", "report_path", type=click.Path(dir_okay=False), help="Also write the report to this file")
@click.option("--skip-dynamics", is_flag=True, help="Skip the time-integration cross-check")
@click.option("--perturb-6j", "six_j_offset", type=float, default=0.0, hidden=True)
@exit_on_error
def verify_command(report_path, skip_dynamics, six_j_offset):
    """Run the oracle checks and print a JSON pass/fail report."""
    report = VerifyService.run_verify(six_j_offset=six_j_offset, include_dynamics=not skip_dynamics)
    payload = report.model_dump(mode="json")
    payload["passed"] = report.passed
    if report_path:
        write_json(payload, report_path)
    click.echo(json.dumps(payload, sort_keys=True, indent=2))
    if not report.passed:
        names = ", ".join(check.name for check in report.failures)
        raise VerificationError(f"Failed checks: {names}")
