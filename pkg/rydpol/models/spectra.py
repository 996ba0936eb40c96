# rydpol/models/spectra.py
import math
from typing import Any, Dict, List, Literal

import numpy as np
from pydantic import BaseModel, Field
from scipy import constants


class VaporConfig(BaseModel):
    """Thermal vapor and beam geometry."""

    density: float = Field(1e16, gt=0.0)  # atoms/m^3
    length: float = Field(0.01, gt=0.0)  # m
    temperature: float = Field(300.0, ge=0.0)  # K
    probe_wavelength: float = Field(780.241e-9, gt=0.0)  # m
    coupling_wavelength: float = Field(480e-9, gt=0.0)  # m
    mass: float = Field(86.909 * constants.atomic_mass, gt=0.0)  # kg
    # Radial dipole moment of the probe transition, C*m
    probe_dipole: float = Field(4.39e-29, gt=0.0)
    intensity: float = Field(1.0, gt=0.0)  # relative

    class Config:
        frozen = True

    @property
    def probe_angular_frequency(self) -> float:
        return 2 * math.pi * constants.c / self.probe_wavelength

    @property
    def probe_wavenumber(self) -> float:
        return 2 * math.pi / self.probe_wavelength

    @property
    def coupling_wavenumber(self) -> float:
        return 2 * math.pi / self.coupling_wavelength

    @property
    def thermal_velocity(self) -> float:
        """One-dimensional Maxwell-Boltzmann standard deviation sqrt(kT/m)."""
        return math.sqrt(constants.k * self.temperature / self.mass)


class DopplerSettings(BaseModel):
    enabled: bool = True
    n_points: int = 41
    cutoff_sigmas: float = Field(4.0, gt=0.0)
    weights: Literal["trapezoid", "gauss"] = "trapezoid"

    class Config:
        frozen = True


class Spectrogram(BaseModel):
    """Transmission, lock-in signal and extinction on a (theta, coupling detuning) grid."""

    theta_axis: List[float]  # degrees
    detuning_axis: List[float]  # rad/s
    transmission: np.ndarray
    signal: np.ndarray
    alpha: np.ndarray
    reference: np.ndarray  # coupling-off transmission per theta
    metadata: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True

    @property
    def shape(self):
        return (len(self.theta_axis), len(self.detuning_axis))

    def row(self, theta_deg: float) -> int:
        for n, theta in enumerate(self.theta_axis):
            if abs(theta - theta_deg) < 1e-9:
                return n
        from rydpol.exceptions import DomainError

        raise DomainError(f"theta={theta_deg} deg is not on the grid")


class PeakSet(BaseModel):
    indices: List[int]
    positions: List[float]
    heights: List[float]
    prominences: List[float]

    @property
    def count(self) -> int:
        return len(self.indices)


class UndulationFit(BaseModel):
    """Least-squares fit values(theta) = offset + amplitude * cos(2 theta + phase)."""

    offset: float
    amplitude: float
    phase_deg: float
    rms_residual: float

    @property
    def relative_residual(self) -> float:
        if self.amplitude == 0:
            return math.inf
        return self.rms_residual / self.amplitude
