# rydpol/models/master.py
import math
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from rydpol.models.quantum import HyperfineBasis

# Natural linewidth of the Rb D2 line
DEFAULT_GAMMA_I = 2 * math.pi * 6.07e6

# Velocity x pole cells evaluated at once by PoleExpansion
_EVALUATION_CELLS = 1 << 20


class DecayRates(BaseModel):
    """Decay rates in 1/s. The dummy rate defaults to a multiple of the largest other rate."""

    gamma_i: float = DEFAULT_GAMMA_I
    gamma_transit: float
    gamma_collision: float
    gamma_r1_rad: float
    gamma_r2_rad: float
    gamma_dummy: Optional[float] = None
    # Transit and collisional broadening also relax the ground manifold
    ground_relaxation: bool = True

    class Config:
        frozen = True

    @property
    def incoherent(self) -> float:
        return self.gamma_transit + self.gamma_collision

    def level_rate(self, label: str) -> float:
        """Rate of the incoherent decay into the dummy state for one level."""
        if label == "g":
            return self.incoherent if self.ground_relaxation else 0.0
        if label == "i":
            return self.incoherent
        if label == "r1":
            return self.incoherent + self.gamma_r1_rad
        if label == "r2":
            return self.incoherent + self.gamma_r2_rad
        raise KeyError(label)

    def resolved_dummy_rate(self, factor: float) -> float:
        if self.gamma_dummy is not None:
            return self.gamma_dummy
        largest = max(self.gamma_i, self.level_rate("i"), self.level_rate("r1"), self.level_rate("r2"))
        return factor * largest

    def as_list(self) -> List[float]:
        values = [self.gamma_i, self.gamma_transit, self.gamma_collision, self.gamma_r1_rad, self.gamma_r2_rad]
        if self.gamma_dummy is not None:
            values.append(self.gamma_dummy)
        return values


class Hamiltonian(BaseModel):
    """Rotating-frame Hamiltonian in units of hbar (rad/s)."""

    matrix: np.ndarray
    basis: Optional[HyperfineBasis] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


class CollapseOperator(BaseModel):
    label: str
    matrix: np.ndarray
    rate: float = Field(ge=0.0)

    class Config:
        arbitrary_types_allowed = True
        frozen = True


class DissipatorSpec(BaseModel):
    """Collapse operators with their rates."""

    operators: List[CollapseOperator]
    dimension: int

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    def __len__(self) -> int:
        return len(self.operators)

    def by_label(self, prefix: str) -> List[CollapseOperator]:
        return [op for op in self.operators if op.label.startswith(prefix)]


class SteadyState(BaseModel):
    """Steady-state density matrix and solver diagnostics."""

    rho: np.ndarray
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def population(self, indices) -> float:
        return float(np.real(np.sum(np.diag(self.rho)[indices])))


class PoleExpansion(BaseModel):
    """
    A weak-probe observable as a function of atomic velocity v (m/s):
    value(v) = Im sum_k residues[k] / (v + poles[k]).
    """

    residues: np.ndarray
    poles: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    def evaluate(self, velocities) -> np.ndarray:
        v = np.atleast_1d(np.asarray(velocities, dtype=float))
        values = np.zeros(v.shape)
        if self.poles.size == 0:
            return values
        # Chunked so the (velocity, pole) table stays small
        step = max(1, _EVALUATION_CELLS // self.poles.size)
        for start in range(0, v.size, step):
            chunk = v[start : start + step]
            values[start : start + step] = np.imag(np.sum(self.residues / (chunk[:, None] + self.poles), axis=1))
        return values

    def narrowest(self) -> float:
        """Smallest pole half-width in m/s; inf without poles."""
        if self.poles.size == 0:
            return math.inf
        return float(np.min(np.abs(self.poles.imag)))
