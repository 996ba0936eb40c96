# rydpol/models/dressed.py
from typing import Dict, List, Tuple

from pydantic import BaseModel, Field, field_validator

from rydpol.models.quantum import HalfInt, HyperfineState


class DressedEntry(BaseModel):
    """One RF-dressed r1 state |mJ, mI> with its symmetry parameter s."""

    J: HalfInt
    mJ: HalfInt
    mI: HalfInt
    s: int
    energy_shift: float = 0.0

    class Config:
        frozen = True

    @field_validator("s")
    @classmethod
    def _check_s(cls, v):
        if v not in (-1, 0, 1):
            raise ValueError("s must be -1, 0 or +1")
        return v

    @property
    def mF(self) -> HalfInt:
        return self.mJ + self.mI

    @property
    def is_spectator(self) -> bool:
        return self.s == 0


class DressedManifold(BaseModel):
    entries: List[DressedEntry]
    rf_rabi: float
    rf_detuning: float = 0.0
    # Effective two-level Rabi frequency per coupled |mJ| (keyed by 2|mJ|)
    effective_rabi: Dict[int, float] = Field(default_factory=dict)

    class Config:
        frozen = True

    def with_mF(self, mF: HalfInt) -> List[DressedEntry]:
        return [e for e in self.entries if e.mF == mF]

    def spectators(self) -> List[DressedEntry]:
        return [e for e in self.entries if e.s == 0]

    def shifts(self) -> List[float]:
        return sorted(e.energy_shift for e in self.entries)


class TransitionStrengthRow(BaseModel):
    i_state: HyperfineState
    entry: DressedEntry
    strength: float = Field(ge=0.0)

    class Config:
        frozen = True


class TransitionStrengthTable(BaseModel):
    rows: List[TransitionStrengthRow]

    def nonzero(self, tol: float = 0.0) -> List[TransitionStrengthRow]:
        return [r for r in self.rows if r.strength > tol]

    def total(self) -> float:
        return sum(r.strength for r in self.rows)


class MFBlockSpectrum(BaseModel):
    """Spectrum of the fixed-mF RF coupling block across r1 and r2 hyperfine states."""

    mF: HalfInt
    dimension: int
    eigenvalues: List[float]
    # (value, multiplicity), ascending
    distinct: List[Tuple[float, int]]

    @property
    def distinct_count(self) -> int:
        return len(self.distinct)
