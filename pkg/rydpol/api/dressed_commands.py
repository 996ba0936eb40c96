# rydpol/api/dressed_commands.py
import logging
import math
import time

import click

from rydpol.api.common import echo_files, exit_on_error, load_scenario, output_directory, scenario_options
from rydpol.db.artifact_store import write_json, write_manifest, write_table_csv
from rydpol.models.quantum import LadderSpec
from rydpol.services.basis_service import BasisService
from rydpol.services.dressed_service import DressedService

logger = logging.getLogger("rydpol.cli.dressed")

MHZ = 2 * math.pi * 1e6

LEVEL_FIELDS = ["J", "mJ", "mI", "mF", "s", "shift_rad_s", "shift_mhz"]
STRENGTH_FIELDS = ["i_F", "i_mF", "mJ", "mI", "s", "strength", "explicit_sum", "relative_residual"]
BLOCK_FIELDS = ["mF", "dimension", "distinct", "eigenvalues_mhz"]


def dressed_rows(ladder: LadderSpec, rf_rabi: float, rf_detuning: float):
    manifold = DressedService.dress_ladder(ladder, rf_rabi, rf_detuning)
    rows = [
        {
            "J": str(e.J),
            "mJ": str(e.mJ),
            "mI": str(e.mI),
            "mF": str(e.mF),
            "s": e.s,
            "shift_rad_s": float(e.energy_shift),
            "shift_mhz": float(e.energy_shift / MHZ),
        }
        for e in manifold.entries
    ]
    return manifold, rows


def strength_rows(ladder: LadderSpec, manifold):
    rows = []
    I = ladder.nuclear_spin
    for row in DressedService.strength_table(ladder, manifold).rows:
        rows.append(
            {
                "i_F": str(row.i_state.F),
                "i_mF": str(row.i_state.mF),
                "mJ": str(row.entry.mJ),
                "mI": str(row.entry.mI),
                "s": row.entry.s,
                "strength": float(row.strength),
                "explicit_sum": float(DressedService.explicit_strength(row.i_state, row.entry, I)),
                "relative_residual": float(DressedService.hyperfine_closed_form_residual(row.i_state, row.entry, I)),
            }
        )
    return rows


def block_rows(ladder: LadderSpec, rf_rabi: float):
    rows = []
    for mF in DressedService.mF_values(ladder):
        spectrum = DressedService.diagonalize_mF_block(ladder, mF, rf_rabi)
        rows.append(
            {
                "mF": str(mF),
                "dimension": spectrum.dimension,
                "distinct": spectrum.distinct_count,
                "eigenvalues_mhz": ";".join(f"{v / MHZ:.9f}" for v in spectrum.eigenvalues),
            }
        )
    return rows


@click.command("dressed")
@scenario_options
@exit_on_error
def dressed_command(config_path, **overrides):
    """Write dressed-level, transition-strength and mF-block tables for the scenario's preset."""
    started = time.time()
    scenario = load_scenario(config_path, **overrides)
    ladder = BasisService.preset(scenario.preset)
    directory = output_directory(scenario)
    # Scenario RF Rabi frequencies are radial; the dressed picture uses the strongest pair
    rf_rabi = DressedService.pair_rabi(ladder, scenario.drive.rf_rabi)
    rf_detuning = scenario.drive.rf_detuning
    metadata = {
        "preset": ladder.name,
        "rf_radial_rabi": scenario.drive.rf_rabi,
        "rf_pair_rabi": rf_rabi,
        "rf_detuning": rf_detuning,
    }

    manifold, levels = dressed_rows(ladder, rf_rabi, rf_detuning)
    files = [
        write_table_csv(levels, LEVEL_FIELDS, directory / "dressed_levels.csv", "dressed-levels", metadata),
        write_table_csv(strength_rows(ladder, manifold), STRENGTH_FIELDS, directory / "transition_strengths.csv",
                        "transition-strengths", metadata),
    ]
    if rf_rabi > 0:
        files.append(write_table_csv(block_rows(ladder, rf_rabi), BLOCK_FIELDS, directory / "mf_blocks.csv",
                                     "mf-blocks", metadata))

    predictions = {f"{theta:g}": DressedService.predict_central_peak(ladder, theta) for theta in scenario.sweep.theta_grid()}
    files.append(write_json({"preset": ladder.name, "central_peak": predictions}, directory / "central_peak.json"))
    logger.info(f"✅ Dressed report for {ladder.name}: {len(manifold.entries)} entries, {len(manifold.spectators())} spectators")

    files.append(write_manifest(directory, "dressed", scenario.echo(), files, time.time() - started))
    echo_files(files)
