# rydpol/api/common.py
"""
Shared plumbing for the command groups: error-to-exit-code mapping,
scenario assembly from a JSON file plus command-line overrides, and the
sweep driver used by `run` and `figure`.
"""
import functools
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
from pydantic import ValidationError

from rydpol.exceptions import EXIT_CONFIG, RydpolError
from rydpol.models.scenario import ScenarioConfig, config_error_from
from rydpol.models.spectra import DopplerSettings, Spectrogram
from rydpol.services.basis_service import BasisService
from rydpol.services.dressed_service import DressedService
from rydpol.services.spectra_service import SpectraService

logger = logging.getLogger("rydpol.cli")


def exit_on_error(fn):
    """Map engine errors onto process exit codes, the CLI's status codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except RydpolError as e:
            logger.error(f"❌ {type(e).__name__}: {e.detail}")
            click.echo(f"Error: {e.detail}", err=True)
            raise click.exceptions.Exit(e.exit_code)
        except ValidationError as e:
            error = config_error_from(e)
            logger.error(f"❌ ConfigError: {error.detail}")
            click.echo(f"Error: {error.detail}", err=True)
            raise click.exceptions.Exit(EXIT_CONFIG)

    return wrapper


def scenario_options(fn):
    """Options shared by every command that runs a scenario."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="Scenario JSON file"),
        click.option("--preset", help="Ladder preset: type1, type2 or model_atom"),
        click.option("--rf-rabi", help="RF Rabi frequency, e.g. '2pi*10MHz' or rad/s"),
        click.option("--coupling-rabi", help="Coupling Rabi frequency"),
        click.option("--probe-rabi", help="Probe Rabi frequency (default gamma_i/20)"),
        click.option("--rf-detuning", help="RF detuning"),
        click.option("--theta", help="RF angles in degrees: start:stop:step or a comma list"),
        click.option("--detuning", help="Coupling detunings: start:stop:count or a comma list"),
        click.option("--doppler/--no-doppler", default=None, help="Toggle Doppler averaging"),
        click.option("--velocity-points", type=int, help="Number of velocity classes"),
        click.option("--solver", type=click.Choice(["linear", "full"]), help="Weak-probe linear response or full steady state"),
        click.option("--output", "output_dir", type=click.Path(file_okay=False), help="Output directory"),
        click.option("--workers", type=int, help="Worker processes (default RYDPOL_WORKERS or all processing units)"),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


_OVERRIDE_KEYS = {
    "preset": ("preset",),
    "rf_rabi": ("drive", "rf_rabi"),
    "coupling_rabi": ("drive", "coupling_rabi"),
    "probe_rabi": ("drive", "probe_rabi"),
    "rf_detuning": ("drive", "rf_detuning"),
    "theta": ("sweep", "theta"),
    "detuning": ("sweep", "detuning"),
    "doppler": ("doppler", "enabled"),
    "velocity_points": ("doppler", "n_points"),
    "solver": ("sweep", "solver"),
    "output_dir": ("output", "directory"),
    "workers": ("workers",),
}


def load_scenario(config_path: Optional[str] = None, **overrides) -> ScenarioConfig:
    """
    Read the scenario file (if any) and apply command-line overrides on top.

    Raises:
        ConfigError: unreadable file or failed validation, with dotted key paths
    """
    data: Dict[str, Any] = {}
    if config_path:
        data = ScenarioConfig.load(config_path).model_dump(mode="json", exclude_unset=True)
    for name, value in overrides.items():
        if value is None or name not in _OVERRIDE_KEYS:
            continue
        *parents, key = _OVERRIDE_KEYS[name]
        section = data
        for parent in parents:
            section = section.setdefault(parent, {})
        section[key] = value
    return ScenarioConfig.from_dict(data)


def max_splitting(scenario: ScenarioConfig) -> float:
    """Widest dressed splitting of the scenario's Rydberg pair, rad/s."""
    ladder = BasisService.preset(scenario.preset)
    rf_rabi = DressedService.pair_rabi(ladder, scenario.drive.rf_rabi)
    shifts = DressedService.dress_ladder(ladder, rf_rabi, scenario.drive.rf_detuning).shifts()
    return (max(shifts) - min(shifts)) if shifts else 0.0


def run_scenario_sweep(
    scenario: ScenarioConfig,
    preset: Optional[str] = None,
    theta_grid: Optional[Sequence[float]] = None,
    detuning_grid: Optional[Sequence[float]] = None,
    doppler: Optional[DopplerSettings] = None,
) -> Spectrogram:
    """Run the scenario's sweep, with optional per-call grid or preset replacements."""
    if preset is not None:
        scenario = scenario.model_copy(update={"preset": preset})
    thetas = list(theta_grid) if theta_grid is not None else scenario.sweep.theta_grid()
    detunings = list(detuning_grid) if detuning_grid is not None else scenario.sweep.detuning_grid(max_splitting(scenario))
    probe = scenario.probe_field()
    logger.info(
        f"🚀 Sweep {scenario.preset}: {len(thetas)} angles x {len(detunings)} detunings, "
        f"Doppler {'on' if (doppler or scenario.doppler).enabled else 'off'}, {scenario.sweep.solver} solver"
    )
    return SpectraService.sweep_spectrogram(
        scenario.preset,
        rf_rabi=scenario.drive.rf_rabi,
        theta_grid=thetas,
        detuning_grid=detunings,
        vapor=scenario.vapor.to_vapor(),
        rates=scenario.rates.to_decay_rates(),
        coupling_rabi=scenario.drive.coupling_rabi,
        probe_rabi=probe.radial_rabi,
        probe_detuning=scenario.drive.probe_detuning,
        rf_detuning=scenario.drive.rf_detuning,
        doppler=doppler or scenario.doppler.to_settings(),
        workers=scenario.workers,
        probe_polarization=probe.polarization,
        coupling_polarization=scenario.coupling_field().polarization,
        solver=scenario.sweep.solver,
    )


def output_directory(scenario: ScenarioConfig) -> Path:
    return Path(scenario.output.directory)


def echo_files(files: List[Path]) -> None:
    for path in files:
        click.echo(str(path))
