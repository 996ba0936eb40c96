# rydpol/models/scenario.py
import json
import math
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    Field,
    ValidationError,
    WithJsonSchema,
    field_validator,
    model_validator,
)

from rydpol.config.engine_config import engine_settings
from rydpol.exceptions import ConfigError
from rydpol.models.fields import FieldConfig, Polarization
from rydpol.models.master import DEFAULT_GAMMA_I, DecayRates
from rydpol.models.spectra import DopplerSettings, VaporConfig
from rydpol.models.units import parse_angle_grid, parse_detuning_grid, parse_frequency

PRESET_NAMES = ("type1", "type2", "model_atom")

Frequency = Annotated[
    float,
    BeforeValidator(parse_frequency),
    WithJsonSchema({"anyOf": [{"type": "number"}, {"type": "string"}], "description": "rad/s, or tagged string such as '2pi*10MHz'"}),
]


class PolarizationSpec(BaseModel):
    """Either a linear angle in the z-y plane or explicit Cartesian components."""

    theta_deg: Optional[float] = None
    vector: Optional[List[Union[float, str]]] = None

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _one_form(self):
        if self.theta_deg is not None and self.vector is not None:
            raise ValueError("give either theta_deg or vector, not both")
        if self.vector is not None:
            if len(self.vector) != 3:
                raise ValueError("vector needs three components")
            try:
                components = self._components()
            except ValueError:
                raise ValueError(f"vector components must be numbers or complex strings, got {self.vector}")
            norm = float(np.linalg.norm(components))
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"polarization vector must have unit norm, got {norm:.6g}")
        return self

    def _components(self) -> List[complex]:
        return [complex(v.replace(" ", "")) if isinstance(v, str) else complex(v) for v in self.vector]

    def to_polarization(self) -> Polarization:
        if self.theta_deg is not None:
            return Polarization.linear(math.radians(self.theta_deg))
        if self.vector is not None:
            return Polarization.from_vector(self._components(), normalize=True)
        return Polarization.z()


class FieldsSection(BaseModel):
    probe_rabi: Optional[Frequency] = None
    coupling_rabi: Frequency = 2 * math.pi * 2e6
    rf_rabi: Frequency = 2 * math.pi * 10e6
    probe_detuning: Frequency = 0.0
    rf_detuning: Frequency = 0.0
    probe_polarization: PolarizationSpec = Field(default_factory=PolarizationSpec)
    coupling_polarization: PolarizationSpec = Field(default_factory=PolarizationSpec)

    class Config:
        extra = "forbid"

    @field_validator("probe_rabi", "coupling_rabi", "rf_rabi")
    @classmethod
    def _non_negative(cls, v):
        if v is not None and v < 0:
            raise ValueError("Rabi frequencies must be non-negative")
        return v


class RatesSection(BaseModel):
    gamma_i: Frequency = DEFAULT_GAMMA_I
    gamma_transit: Frequency = 2 * math.pi * 0.2e6
    gamma_collision: Frequency = 2 * math.pi * 0.2e6
    gamma_r1_rad: Frequency = 2 * math.pi * 0.01e6
    gamma_r2_rad: Frequency = 2 * math.pi * 0.01e6
    gamma_dummy: Optional[Frequency] = None
    ground_relaxation: bool = True

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _non_negative(self):
        for name, value in self.model_dump().items():
            if isinstance(value, float) and value < 0:
                raise ValueError(f"{name} must be non-negative")
        return self

    def to_decay_rates(self) -> DecayRates:
        return DecayRates(**self.model_dump())


class VaporSection(VaporConfig):
    class Config:
        extra = "forbid"
        frozen = True

    def to_vapor(self) -> VaporConfig:
        return VaporConfig(**self.model_dump())


class DopplerSection(DopplerSettings):
    enabled: bool = True
    n_points: int = Field(default_factory=lambda: engine_settings.doppler_points)
    cutoff_sigmas: float = Field(default_factory=lambda: engine_settings.doppler_cutoff_sigmas, gt=0.0)
    weights: Literal["trapezoid", "gauss"] = Field(default_factory=lambda: engine_settings.doppler_weights)

    class Config:
        extra = "forbid"
        frozen = True

    @field_validator("n_points")
    @classmethod
    def _enough_points(cls, v):
        if v < 3:
            raise ValueError("n_points must be at least 3")
        return v

    def to_settings(self) -> DopplerSettings:
        return DopplerSettings(**self.model_dump())


class SweepSection(BaseModel):
    theta: Union[str, List[float]] = "0:355:5"
    # None means +/- 4x the largest dressed splitting with 201 points
    detuning: Optional[Union[str, List[Union[float, str]]]] = None
    detuning_points: int = Field(201, ge=3)
    solver: Literal["linear", "full"] = Field(default_factory=lambda: engine_settings.sweep_solver)

    class Config:
        extra = "forbid"

    @field_validator("theta")
    @classmethod
    def _theta_parses(cls, v):
        if not parse_angle_grid(v):
            raise ValueError("theta grid is empty")
        return v

    @field_validator("detuning")
    @classmethod
    def _detuning_parses(cls, v):
        if v is not None and not parse_detuning_grid(v):
            raise ValueError("detuning grid is empty")
        return v

    def theta_grid(self) -> List[float]:
        return parse_angle_grid(self.theta)

    def detuning_grid(self, max_splitting: float) -> List[float]:
        if self.detuning is not None:
            return parse_detuning_grid(self.detuning)
        span = 4 * max_splitting if max_splitting > 0 else 2 * math.pi * 20e6
        return parse_detuning_grid(f"{-span}:{span}:{self.detuning_points}")


class OutputSection(BaseModel):
    directory: str = "rydpol-output"
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])
    dump_operators: bool = False

    class Config:
        extra = "forbid"


class ScenarioConfig(BaseModel):
    """A complete simulation scenario, as read from a JSON file or assembled from CLI flags."""

    preset: str = "type1"
    drive: FieldsSection = Field(default_factory=FieldsSection)
    vapor: VaporSection = Field(default_factory=VaporSection)
    rates: RatesSection = Field(default_factory=RatesSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    doppler: DopplerSection = Field(default_factory=DopplerSection)
    output: OutputSection = Field(default_factory=OutputSection)
    workers: Optional[int] = Field(None, ge=1)

    class Config:
        extra = "forbid"

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, v):
        if v not in PRESET_NAMES:
            raise ValueError(f"unknown preset '{v}', valid presets: {', '.join(PRESET_NAMES)}")
        return v

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise config_error_from(e)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        try:
            data = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"Cannot read scenario file {path}: {e}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Scenario file {path} is not valid JSON: {e}")
        if not isinstance(data, dict):
            raise ConfigError(f"Scenario file {path} must contain a JSON object")
        return cls.from_dict(data)

    def probe_field(self, probe_rabi_fraction: Optional[float] = None) -> FieldConfig:
        fraction = engine_settings.probe_rabi_fraction if probe_rabi_fraction is None else probe_rabi_fraction
        rabi = self.drive.probe_rabi
        if rabi is None:
            rabi = fraction * self.rates.gamma_i
        return FieldConfig(
            polarization=self.drive.probe_polarization.to_polarization(),
            radial_rabi=rabi,
            detuning=self.drive.probe_detuning,
        )

    def coupling_field(self) -> FieldConfig:
        return FieldConfig(
            polarization=self.drive.coupling_polarization.to_polarization(),
            radial_rabi=self.drive.coupling_rabi,
            detuning=0.0,
        )

    def rf_field(self, theta_deg: float) -> FieldConfig:
        return FieldConfig(
            polarization=Polarization.linear(math.radians(theta_deg)),
            radial_rabi=self.drive.rf_rabi,
            detuning=self.drive.rf_detuning,
        )

    def echo(self) -> Dict[str, Any]:
        """JSON-ready dump that re-validates to an identical scenario."""
        return self.model_dump(mode="json")


def config_error_from(error: ValidationError) -> ConfigError:
    """Flatten a pydantic validation error into a ConfigError with dotted key paths."""
    messages = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        messages.append(f"{path}: {item['msg']}")
    return ConfigError("Invalid scenario configuration: " + "; ".join(messages), errors=messages)
