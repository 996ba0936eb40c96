# rydpol/models/quantum.py
from fractions import Fraction
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, PrivateAttr, field_validator, model_validator

HalfIntLike = Union["HalfInt", int, float, Fraction, str]


class HalfInt(BaseModel):
    """Angular momentum value stored as twice its value so half-integers stay exact."""

    twice_value: int

    class Config:
        frozen = True

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data):
        if isinstance(data, dict) or isinstance(data, HalfInt):
            return data
        return {"twice_value": twice_of(data)}

    @classmethod
    def of(cls, value: HalfIntLike) -> "HalfInt":
        if isinstance(value, HalfInt):
            return value
        return cls(twice_value=twice_of(value))

    @property
    def value(self) -> float:
        return self.twice_value / 2

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.twice_value, 2)

    @property
    def is_integer(self) -> bool:
        return self.twice_value % 2 == 0

    @property
    def multiplicity(self) -> int:
        """2j + 1 for a magnitude."""
        return self.twice_value + 1

    def projections(self) -> List["HalfInt"]:
        """All m from -j to j in ascending order."""
        return [HalfInt(twice_value=tm) for tm in range(-self.twice_value, self.twice_value + 1, 2)]

    def __add__(self, other: HalfIntLike) -> "HalfInt":
        return HalfInt(twice_value=self.twice_value + HalfInt.of(other).twice_value)

    def __sub__(self, other: HalfIntLike) -> "HalfInt":
        return HalfInt(twice_value=self.twice_value - HalfInt.of(other).twice_value)

    def __neg__(self) -> "HalfInt":
        return HalfInt(twice_value=-self.twice_value)

    def __abs__(self) -> "HalfInt":
        return HalfInt(twice_value=abs(self.twice_value))

    def __lt__(self, other: HalfIntLike) -> bool:
        return self.twice_value < HalfInt.of(other).twice_value

    def __le__(self, other: HalfIntLike) -> bool:
        return self.twice_value <= HalfInt.of(other).twice_value

    def __gt__(self, other: HalfIntLike) -> bool:
        return self.twice_value > HalfInt.of(other).twice_value

    def __ge__(self, other: HalfIntLike) -> bool:
        return self.twice_value >= HalfInt.of(other).twice_value

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        if self.is_integer:
            return str(self.twice_value // 2)
        return f"{self.twice_value}/2"

    def __repr__(self) -> str:
        return f"HalfInt({self})"


def twice_of(value) -> int:
    """Return 2*value as an int, rejecting anything that is not a half-integer."""
    from rydpol.exceptions import DomainError

    if isinstance(value, HalfInt):
        return value.twice_value
    if isinstance(value, bool):
        raise DomainError(f"Not an angular momentum value: {value!r}")
    if isinstance(value, int):
        return 2 * value
    if isinstance(value, str):
        try:
            value = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise DomainError(f"Not an angular momentum value: {value!r}")
    if isinstance(value, Fraction):
        doubled = 2 * value
        if doubled.denominator != 1:
            raise DomainError(f"{value} is not a multiple of 1/2")
        return int(doubled)
    if isinstance(value, float):
        doubled = round(2 * value)
        if abs(2 * value - doubled) > 1e-9:
            raise DomainError(f"{value} is not a multiple of 1/2")
        return int(doubled)
    raise DomainError(f"Not an angular momentum value: {value!r}")


class LevelSpec(BaseModel):
    """One fine-structure level of the ladder (g, i, r1 or r2)."""

    label: str
    S: HalfInt
    L: int
    J: HalfInt
    F_resolved: Optional[HalfInt] = None
    # rad/s, relative scale; detunings carry all energy information in the rotating frame
    energy_offset: float = 0.0

    class Config:
        frozen = True

    @field_validator("L")
    @classmethod
    def _non_negative_l(cls, v):
        if v < 0:
            raise ValueError("L must be non-negative")
        return v

    @model_validator(mode="after")
    def _check_coupling(self):
        twice_l = 2 * self.L
        if not (abs(twice_l - self.S.twice_value) <= self.J.twice_value <= twice_l + self.S.twice_value):
            raise ValueError(f"J={self.J} cannot be formed from L={self.L}, S={self.S}")
        if (twice_l + self.S.twice_value + self.J.twice_value) % 2 != 0:
            raise ValueError(f"L={self.L}, S={self.S}, J={self.J} do not differ by integers")
        return self

    @property
    def term(self) -> str:
        letters = "SPDFGHIK"
        letter = letters[self.L] if self.L < len(letters) else f"L{self.L}"
        return f"{letter}{self.J}"

    def hyperfine_manifolds(self, nuclear_spin: HalfInt) -> List[HalfInt]:
        """F values taking part in the ladder, ascending."""
        if self.F_resolved is not None:
            return [self.F_resolved]
        low = abs(self.J.twice_value - nuclear_spin.twice_value)
        high = self.J.twice_value + nuclear_spin.twice_value
        return [HalfInt(twice_value=tf) for tf in range(low, high + 1, 2)]


class HyperfineState(BaseModel):
    """A |F mF> basis state belonging to one ladder level."""

    level: LevelSpec
    F: HalfInt
    mF: HalfInt

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_projection(self):
        if abs(self.mF.twice_value) > self.F.twice_value:
            raise ValueError(f"|mF|={abs(self.mF)} exceeds F={self.F}")
        if (self.F.twice_value - self.mF.twice_value) % 2 != 0:
            raise ValueError(f"F={self.F} and mF={self.mF} do not differ by an integer")
        if self.level.F_resolved is not None and self.F != self.level.F_resolved:
            raise ValueError(f"Level {self.level.label} only carries F={self.level.F_resolved}")
        return self

    def __str__(self) -> str:
        return f"{self.level.label}|F={self.F}, mF={self.mF}>"


LEVEL_ORDER = ("g", "i", "r1", "r2")


class LadderSpec(BaseModel):
    """Four-level excitation ladder g -> i -> r1 -> r2 with a nuclear spin."""

    name: str
    nuclear_spin: HalfInt
    levels: List[LevelSpec]
    dummy_state_included: bool = True

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_levels(self):
        if len(self.levels) != 4:
            raise ValueError("A ladder needs exactly four levels (g, i, r1, r2)")
        I = self.nuclear_spin
        for level in self.levels:
            if level.F_resolved is None:
                continue
            tf = level.F_resolved.twice_value
            if not (abs(level.J.twice_value - I.twice_value) <= tf <= level.J.twice_value + I.twice_value):
                raise ValueError(f"F={level.F_resolved} is not allowed for J={level.J}, I={I}")
            if (tf - level.J.twice_value - I.twice_value) % 2 != 0:
                raise ValueError(f"F={level.F_resolved} does not differ from J+I by an integer")
        return self

    @property
    def g(self) -> LevelSpec:
        return self.levels[0]

    @property
    def i(self) -> LevelSpec:
        return self.levels[1]

    @property
    def r1(self) -> LevelSpec:
        return self.levels[2]

    @property
    def r2(self) -> LevelSpec:
        return self.levels[3]

    def level(self, label: str) -> LevelSpec:
        return self.levels[LEVEL_ORDER.index(label)]


class HyperfineBasis(BaseModel):
    """Ordered |F mF> basis of a ladder, with the optional dummy state last."""

    ladder: LadderSpec
    states: List[HyperfineState]
    has_dummy: bool

    _slices: Dict[str, slice] = PrivateAttr(default_factory=dict)
    _index: Dict[HyperfineState, int] = PrivateAttr(default_factory=dict)

    class Config:
        frozen = True

    def model_post_init(self, __context) -> None:
        start = 0
        for label, level in zip(LEVEL_ORDER, self.ladder.levels):
            count = sum(1 for s in self.states if s.level == level)
            self._slices[label] = slice(start, start + count)
            start += count
        self._index = {state: n for n, state in enumerate(self.states)}

    @property
    def size(self) -> int:
        """Total dimension, dummy included."""
        return len(self.states) + (1 if self.has_dummy else 0)

    @property
    def atomic_size(self) -> int:
        return len(self.states)

    @property
    def dummy_index(self) -> Optional[int]:
        return len(self.states) if self.has_dummy else None

    def level_slice(self, label: str) -> slice:
        return self._slices[label]

    def level_states(self, label: str) -> List[HyperfineState]:
        return self.states[self._slices[label]]

    def index_of(self, state: HyperfineState) -> int:
        return self._index[state]
