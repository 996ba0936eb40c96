"""
Artifact storage for simulation runs.
This module writes spectrograms, tables, JSON reports, run manifests and
sparse operator dumps to disk. Data files carry no timestamps so identical
runs produce identical bytes; the manifest carries the wall time.
"""
import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Union

import numpy as np
import scipy.sparse as sp

from rydpol.config.engine_config import ENGINE_VERSION, engine_settings
from rydpol.exceptions import DomainError, OutputError
from rydpol.models.spectra import Spectrogram

logger = logging.getLogger("rydpol.db")

SPECTROGRAM_MAGIC = "RYDPOL-SPECTROGRAM"
TABLE_MAGIC = "RYDPOL-TABLE"
SPECTROGRAM_COLUMNS = ["theta_deg", "detuning_rad_s", "transmission", "reference", "signal", "alpha_per_m"]

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    """Fixed-width scientific notation shared by every text artifact."""
    return f"{float(value):.12e}"


@contextmanager
def atomic_write(path: PathLike) -> Iterator[Any]:
    """
    Write to a temporary file next to path and move it into place on success.

    Raises:
        OutputError: the directory or file cannot be written
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    except OSError as e:
        logger.error(f"❌ OUTPUT ERROR: Cannot create {target}: {str(e)}")
        raise OutputError(f"Cannot write {target}: {e}")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as handle:
            yield handle
        os.replace(tmp_name, target)
    except OSError as e:
        logger.error(f"❌ OUTPUT ERROR: Failed writing {target}: {str(e)}")
        raise OutputError(f"Cannot write {target}: {e}")
    finally:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)


def _header_lines(magic: str, metadata: Optional[Dict[str, Any]]) -> List[str]:
    lines = [f"# {magic} v{engine_settings.output_format_version}"]
    if metadata:
        lines.append("# metadata " + json.dumps(metadata, sort_keys=True, default=str))
    return lines


def write_spectrogram_csv(spec: Spectrogram, path: PathLike) -> Path:
    """
    Write one record per (theta, detuning) grid point, theta-major.

    Args:
        spec (Spectrogram): computed spectrogram
        path: destination file

    Returns:
        Path: the written file
    """
    target = Path(path)
    with atomic_write(target) as handle:
        for line in _header_lines(SPECTROGRAM_MAGIC, spec.metadata):
            handle.write(line + "\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SPECTROGRAM_COLUMNS)
        for n, theta in enumerate(spec.theta_axis):
            for m, detuning in enumerate(spec.detuning_axis):
                writer.writerow(
                    [
                        format_float(theta),
                        format_float(detuning),
                        format_float(spec.transmission[n, m]),
                        format_float(spec.reference[n]),
                        format_float(spec.signal[n, m]),
                        format_float(spec.alpha[n, m]),
                    ]
                )
    logger.info(f"✅ Wrote spectrogram {spec.shape[0]}x{spec.shape[1]} to {target}")
    return target


def read_spectrogram_csv(path: PathLike) -> Spectrogram:
    """
    Load a spectrogram written by write_spectrogram_csv.

    Raises:
        DomainError: missing magic header, unsupported version or malformed grid
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith(f"# {SPECTROGRAM_MAGIC} v"):
        raise DomainError(f"{path} is not a spectrogram file")
    version = int(lines[0].rsplit("v", 1)[1])
    if version != engine_settings.output_format_version:
        raise DomainError(f"Unsupported spectrogram format version {version}")
    metadata: Dict[str, Any] = {}
    body = []
    for line in lines[1:]:
        if line.startswith("# metadata "):
            metadata = json.loads(line[len("# metadata "):])
        elif not line.startswith("#"):
            body.append(line)

    records = list(csv.DictReader(body))
    thetas = list(dict.fromkeys(float(r["theta_deg"]) for r in records))
    detunings = list(dict.fromkeys(float(r["detuning_rad_s"]) for r in records))
    if len(records) != len(thetas) * len(detunings):
        raise DomainError(f"{path} does not hold a full theta x detuning grid")
    shape = (len(thetas), len(detunings))
    # Records are theta-major in file order
    columns = {name: np.array([float(r[name]) for r in records]).reshape(shape) for name in SPECTROGRAM_COLUMNS[2:]}
    return Spectrogram(
        theta_axis=thetas,
        detuning_axis=detunings,
        transmission=columns["transmission"],
        signal=columns["signal"],
        alpha=columns["alpha_per_m"],
        reference=columns["reference"][:, 0],
        metadata=metadata,
    )


def spectrogram_record(spec: Spectrogram) -> Dict[str, Any]:
    return {
        "format": SPECTROGRAM_MAGIC,
        "version": engine_settings.output_format_version,
        "metadata": spec.metadata,
        "theta_deg": list(spec.theta_axis),
        "detuning_rad_s": list(spec.detuning_axis),
        "transmission": np.asarray(spec.transmission).tolist(),
        "reference": np.asarray(spec.reference).tolist(),
        "signal": np.asarray(spec.signal).tolist(),
        "alpha_per_m": np.asarray(spec.alpha).tolist(),
    }


def write_json(payload: Any, path: PathLike) -> Path:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    target = Path(path)
    with atomic_write(target) as handle:
        handle.write(json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n")
    logger.debug(f"Wrote {target}")
    return target


def write_table_csv(
    rows: Iterable[Dict[str, Any]],
    fieldnames: List[str],
    path: PathLike,
    kind: str,
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Generic versioned table; floats use the shared fixed format."""
    target = Path(path)
    with atomic_write(target) as handle:
        for line in _header_lines(f"{TABLE_MAGIC} {kind}", metadata):
            handle.write(line + "\n")
        writer = csv.DictWriter(handle, fieldnames=fieldnames, extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: format_float(v) if isinstance(v, float) else v for k, v in row.items()})
    logger.info(f"✅ Wrote {kind} table to {target}")
    return target


def write_triplets(matrix, path: PathLike) -> Path:
    """Sparse dump, one "row col re im" line per stored non-zero, row-major order."""
    coo = sp.coo_matrix(matrix)
    coo.sum_duplicates()
    coo.eliminate_zeros()
    order = np.lexsort((coo.col, coo.row))
    target = Path(path)
    with atomic_write(target) as handle:
        handle.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for k in order:
            value = complex(coo.data[k])
            handle.write(f"{coo.row[k]} {coo.col[k]} {format_float(value.real)} {format_float(value.imag)}\n")
    return target


def write_manifest(
    directory: PathLike,
    command: str,
    config_echo: Dict[str, Any],
    files: List[Path],
    wall_time_seconds: float,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    Run manifest: command, echoed configuration, engine version, wall time,
    timestamp and the produced files.
    """
    directory = Path(directory)
    manifest = {
        "command": command,
        "engine_version": ENGINE_VERSION,
        "format_version": engine_settings.output_format_version,
        "config": config_echo,
        "files": sorted(str(Path(f).relative_to(directory)) if Path(f).is_relative_to(directory) else str(f) for f in files),
        "wall_time_seconds": wall_time_seconds,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, directory / "manifest.json")
