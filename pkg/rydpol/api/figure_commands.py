# rydpol/api/figure_commands.py
"""Plot-ready data panels. Each panel writes a long-format table plus a small JSON summary."""
import logging
import math
import time
from typing import Optional

import click
import numpy as np

from rydpol.api.common import echo_files, exit_on_error, load_scenario, output_directory, run_scenario_sweep, scenario_options
from rydpol.db.artifact_store import write_json, write_manifest, write_table_csv
from rydpol.models.spectra import Spectrogram
from rydpol.services.spectra_service import NO_DOPPLER, SpectraService

logger = logging.getLogger("rydpol.cli.figure")

MHZ = 2 * math.pi * 1e6
PANELS = ("polarization-triplet", "spectrogram", "doppler-free", "central-cut")
SPECTRUM_FIELDS = ["theta_deg", "detuning_mhz", "transmission", "signal"]


def spectrum_rows(spec: Spectrogram):
    for n, theta in enumerate(spec.theta_axis):
        for m, detuning in enumerate(spec.detuning_axis):
            yield {
                "theta_deg": float(theta),
                "detuning_mhz": float(detuning / MHZ),
                "transmission": float(spec.transmission[n, m]),
                "signal": float(spec.signal[n, m]),
            }


def peaks_by_theta(spec: Spectrogram):
    result = {}
    for n, theta in enumerate(spec.theta_axis):
        peaks = SpectraService.find_spectral_peaks(spec.detuning_axis, spec.signal[n])
        result[f"{theta:g}"] = {
            "count": peaks.count,
            "positions_mhz": [p / MHZ for p in peaks.positions],
            "heights": peaks.heights,
        }
    return result


def central_to_side_ratio(detuning, signal) -> Optional[float]:
    """Height at zero detuning over the tallest peak away from it; None without side peaks."""
    axis = np.asarray(detuning)
    values = np.asarray(signal)
    center = int(np.argmin(np.abs(axis)))
    peaks = SpectraService.find_spectral_peaks(axis, values)
    sides = [h for i, h in zip(peaks.indices, peaks.heights) if abs(i - center) > 1]
    if not sides:
        return None
    return float(values[center] / max(sides))


@click.command("figure")
@click.argument("panel", type=click.Choice(PANELS))
@scenario_options
@exit_on_error
def figure_command(panel, config_path, **overrides):
    """Write the data behind one figure panel."""
    started = time.time()
    scenario = load_scenario(config_path, **overrides)
    directory = output_directory(scenario)
    stem = panel.replace("-", "_")
    summary = {"panel": panel}

    if panel == "polarization-triplet":
        preset = "model_atom" if overrides.get("preset") is None else scenario.preset
        thetas = [0.0, 45.0, 90.0] if overrides.get("theta") is None else scenario.sweep.theta_grid()
        spec = run_scenario_sweep(scenario, preset=preset, theta_grid=thetas, doppler=NO_DOPPLER)
        summary["peaks"] = peaks_by_theta(spec)
        summary["central_to_side"] = {
            f"{theta:g}": central_to_side_ratio(spec.detuning_axis, spec.signal[n]) for n, theta in enumerate(spec.theta_axis)
        }
    elif panel == "spectrogram":
        spec = run_scenario_sweep(scenario)
    elif panel == "doppler-free":
        thetas = [0.0] if overrides.get("theta") is None else scenario.sweep.theta_grid()
        spec = run_scenario_sweep(scenario, theta_grid=thetas, doppler=NO_DOPPLER)
        summary["peaks"] = peaks_by_theta(spec)
    else:
        spec = run_scenario_sweep(scenario, detuning_grid=[0.0])
        theta, signal = SpectraService.central_cut(spec)
        fit = SpectraService.fit_undulation(theta, signal)
        summary["fit"] = fit.model_dump()
        summary["relative_residual"] = fit.relative_residual

    files = [
        write_table_csv(spectrum_rows(spec), SPECTRUM_FIELDS, directory / f"{stem}.csv", panel, spec.metadata),
        write_json(summary, directory / f"{stem}_summary.json"),
    ]
    logger.info(f"✅ Panel {panel} written to {directory}")
    files.append(write_manifest(directory, f"figure {panel}", scenario.echo(), files, time.time() - started))
    echo_files(files)
