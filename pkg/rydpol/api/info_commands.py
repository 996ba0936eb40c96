# rydpol/api/info_commands.py
import json

import click

from rydpol.api.common import exit_on_error
from rydpol.models.scenario import ScenarioConfig
from rydpol.services.basis_service import BasisService


@click.command("presets")
@click.option("--json", "as_json", is_flag=True, help="Print machine-readable JSON")
@exit_on_error
def presets_command(as_json):
    """List the built-in ladder presets."""
    described = [BasisService.describe(BasisService.preset(name)) for name in BasisService.preset_names()]
    if as_json:
        click.echo(json.dumps(described, indent=2, sort_keys=True))
        return
    for item in described:
        levels = ", ".join(f"{lv['label']}={lv['term']}(F={lv['F']}, {lv['states']})" for lv in item["levels"])
        click.echo(f"{item['name']}: I={item['nuclear_spin']}, {item['total_states']} states; {levels}")


@click.command("schema")
@exit_on_error
def schema_command():
    """Print the JSON schema of scenario files."""
    click.echo(json.dumps(ScenarioConfig.model_json_schema(), indent=2, sort_keys=True))
