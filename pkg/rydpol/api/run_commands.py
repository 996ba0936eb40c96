# rydpol/api/run_commands.py
import logging
import math
import time
from typing import Optional

import click

from rydpol.api.common import echo_files, exit_on_error, load_scenario, output_directory, run_scenario_sweep, scenario_options
from rydpol.db.artifact_store import (
    spectrogram_record,
    write_json,
    write_manifest,
    write_spectrogram_csv,
    write_triplets,
)
from rydpol.models.scenario import ScenarioConfig
from rydpol.models.spectra import Spectrogram
from rydpol.services.basis_service import BasisService
from rydpol.services.master_service import LiouvillianTemplate
from rydpol.services.spectra_service import SpectraService

logger = logging.getLogger("rydpol.cli.run")

MHZ = 2 * math.pi * 1e6


def peak_summary(spec: Spectrogram, prominence: Optional[float] = None) -> dict:
    """Peak positions (MHz) of every theta row, keyed by angle."""
    summary = {}
    for n, theta in enumerate(spec.theta_axis):
        peaks = SpectraService.find_spectral_peaks(spec.detuning_axis, spec.signal[n], prominence)
        summary[f"{theta:g}"] = [round(p / MHZ, 9) for p in peaks.positions]
    return summary


def dump_operators(scenario: ScenarioConfig, spec: Spectrogram, directory) -> list:
    """H, every collapse operator and the Liouvillian at the first grid point, as sparse triplets."""
    theta = spec.theta_axis[0]
    template = LiouvillianTemplate(
        BasisService.preset(scenario.preset),
        scenario.probe_field(),
        scenario.coupling_field(),
        scenario.rf_field(theta),
        scenario.rates.to_decay_rates(),
    )
    detuning = spec.detuning_axis[0]
    target = directory / "operators"
    files = [write_triplets(template.hamiltonian(scenario.drive.probe_detuning, detuning).matrix, target / "hamiltonian.txt")]
    for op in template.dissipator.operators:
        files.append(write_triplets(op.matrix, target / f"collapse_{op.label}.txt"))
    files.append(write_triplets(template.at(scenario.drive.probe_detuning, detuning), target / "liouvillian.txt"))
    logger.info(f"✅ Dumped {len(files)} operators at theta={theta:g} deg")
    return files


@click.command("run")
@scenario_options
@click.option("--format", "formats", multiple=True, type=click.Choice(["csv", "json"]), help="Output formats (repeatable)")
@click.option("--dump-operators", "dump", is_flag=True, default=None, help="Also write H, L_k and the Liouvillian as triplets")
@exit_on_error
def run_command(config_path, formats, dump, **overrides):
    """Sweep the (theta, coupling detuning) plane and write the spectrogram."""
    started = time.time()
    scenario = load_scenario(config_path, **overrides)
    if formats:
        scenario = scenario.model_copy(update={"output": scenario.output.model_copy(update={"formats": list(formats)})})
    if dump:
        scenario = scenario.model_copy(update={"output": scenario.output.model_copy(update={"dump_operators": True})})

    spec = run_scenario_sweep(scenario)
    directory = output_directory(scenario)
    files = []
    if "csv" in scenario.output.formats:
        files.append(write_spectrogram_csv(spec, directory / "spectrogram.csv"))
    if "json" in scenario.output.formats:
        files.append(write_json(spectrogram_record(spec), directory / "spectrogram.json"))
    files.append(write_json({"peaks_mhz": peak_summary(spec)}, directory / "peaks.json"))
    if scenario.output.dump_operators:
        files.extend(dump_operators(scenario, spec, directory))

    files.append(write_manifest(directory, "run", scenario.echo(), files, time.time() - started,
                                extra={"grid": {"theta": len(spec.theta_axis), "detuning": len(spec.detuning_axis)}}))
    echo_files(files)
