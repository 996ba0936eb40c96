# rydpol/models/fields.py
import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field

from rydpol.models.quantum import LevelSpec


class Polarization(BaseModel):
    """Cartesian components of the unit field vector."""

    ex: complex = 0j
    ey: complex = 0j
    ez: complex = 1 + 0j

    class Config:
        frozen = True

    @classmethod
    def z(cls) -> "Polarization":
        return cls(ex=0j, ey=0j, ez=1 + 0j)

    @classmethod
    def linear(cls, theta: float) -> "Polarization":
        """Linear polarization at angle theta (radians) from z in the z-y plane."""
        return cls(ex=0j, ey=complex(math.sin(theta)), ez=complex(math.cos(theta)))

    @classmethod
    def from_vector(cls, vector: Sequence[complex], normalize: bool = False) -> "Polarization":
        components = np.asarray(vector, dtype=complex)
        if components.shape != (3,):
            from rydpol.exceptions import DomainError

            raise DomainError(f"A polarization needs three components, got {components.shape}")
        if normalize:
            norm = np.linalg.norm(components)
            if norm == 0:
                from rydpol.exceptions import DomainError

                raise DomainError("Cannot normalize a zero polarization vector")
            components = components / norm
        return cls(ex=complex(components[0]), ey=complex(components[1]), ez=complex(components[2]))

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.ex, self.ey, self.ez], dtype=complex)

    @property
    def norm_squared(self) -> float:
        return abs(self.ex) ** 2 + abs(self.ey) ** 2 + abs(self.ez) ** 2

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm_squared - 1.0) <= tol


class FieldConfig(BaseModel):
    """One driving field: polarization, radial Rabi frequency and detuning (both rad/s)."""

    polarization: Polarization = Field(default_factory=Polarization.z)
    radial_rabi: float = Field(0.0, ge=0.0)
    detuning: float = 0.0

    class Config:
        frozen = True

    def with_detuning(self, detuning: float) -> "FieldConfig":
        return self.model_copy(update={"detuning": detuning})

    def with_rabi(self, radial_rabi: float) -> "FieldConfig":
        return self.model_copy(update={"radial_rabi": radial_rabi})


class CouplingBlock(BaseModel):
    """Coupling matrix between two adjacent manifolds, rows upper states, columns lower states."""

    matrix: np.ndarray
    lower: LevelSpec
    upper: LevelSpec

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def shape(self):
        return self.matrix.shape

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.matrix) <= tol))
