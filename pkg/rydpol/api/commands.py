# rydpol/api/commands.py
import click

from rydpol.api.run_commands import run_command
from rydpol.api.dressed_commands import dressed_command
from rydpol.api.verify_commands import verify_command
from rydpol.api.info_commands import presets_command, schema_command
from rydpol.api.figure_commands import figure_command

COMMANDS = [
    run_command,
    dressed_command,
    verify_command,
    presets_command,
    schema_command,
    figure_command,
]


def include_commands(group: click.Group) -> click.Group:
    for command in COMMANDS:
        group.add_command(command)
    return group
