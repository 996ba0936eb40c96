# rydpol/services/basis_service.py
import logging
from typing import Dict, List

from rydpol.exceptions import DomainError
from rydpol.models.quantum import (
    HalfInt,
    HyperfineBasis,
    HyperfineState,
    LadderSpec,
    LevelSpec,
)
from rydpol.models.scenario import PRESET_NAMES

logger = logging.getLogger("rydpol.basis")

_HALF = HalfInt.of("1/2")


def _rb87_ladder(name: str, r1: LevelSpec, r2: LevelSpec) -> LadderSpec:
    """Rb-87 ladder starting 5S1/2(F=2) -> 5P3/2(F=3)."""
    return LadderSpec(
        name=name,
        nuclear_spin=HalfInt.of("3/2"),
        levels=[
            LevelSpec(label="g", S=_HALF, L=0, J=_HALF, F_resolved=HalfInt.of(2)),
            LevelSpec(label="i", S=_HALF, L=1, J=HalfInt.of("3/2"), F_resolved=HalfInt.of(3)),
            r1,
            r2,
        ],
    )


def _type1() -> LadderSpec:
    # nD5/2 <-> (n+1)P3/2
    return _rb87_ladder(
        "type1",
        LevelSpec(label="r1", S=_HALF, L=2, J=HalfInt.of("5/2")),
        LevelSpec(label="r2", S=_HALF, L=1, J=HalfInt.of("3/2")),
    )


def _type2() -> LadderSpec:
    # nD3/2 <-> (n+1)P1/2
    return _rb87_ladder(
        "type2",
        LevelSpec(label="r1", S=_HALF, L=2, J=HalfInt.of("3/2")),
        LevelSpec(label="r2", S=_HALF, L=1, J=_HALF),
    )


def _model_atom() -> LadderSpec:
    # Degeneracies 3, 1, 3, 1 from integer angular momenta without spin
    zero = HalfInt.of(0)
    one = HalfInt.of(1)
    return LadderSpec(
        name="model_atom",
        nuclear_spin=zero,
        levels=[
            LevelSpec(label="g", S=zero, L=1, J=one),
            LevelSpec(label="i", S=zero, L=0, J=zero),
            LevelSpec(label="r1", S=zero, L=1, J=one),
            LevelSpec(label="r2", S=zero, L=0, J=zero),
        ],
    )


_PRESETS = {
    "type1": _type1,
    "type2": _type2,
    "model_atom": _model_atom,
}


class BasisService:
    @staticmethod
    def preset(name: str) -> LadderSpec:
        """
        Return one of the built-in ladders.

        Args:
            name (str): "type1", "type2" or "model_atom"

        Returns:
            LadderSpec: the fully populated ladder

        Raises:
            DomainError: unknown preset name
        """
        builder = _PRESETS.get(name)
        if builder is None:
            raise DomainError(f"Unknown preset '{name}'. Valid presets: {', '.join(PRESET_NAMES)}")
        return builder()

    @staticmethod
    def preset_names() -> List[str]:
        return list(PRESET_NAMES)

    @staticmethod
    def level_states(level: LevelSpec, nuclear_spin: HalfInt) -> List[HyperfineState]:
        """Hyperfine states of one level, F ascending then mF ascending."""
        states = []
        for F in level.hyperfine_manifolds(nuclear_spin):
            for mF in F.projections():
                states.append(HyperfineState(level=level, F=F, mF=mF))
        return states

    @staticmethod
    def enumerate_basis(ladder: LadderSpec) -> HyperfineBasis:
        """
        Enumerate the |F mF> basis of a ladder.

        Ordering is by level (g, i, r1, r2), then F ascending, then mF
        ascending; the dummy state, when included, comes last.
        """
        states: List[HyperfineState] = []
        for level in ladder.levels:
            states.extend(BasisService.level_states(level, ladder.nuclear_spin))
        basis = HyperfineBasis(ladder=ladder, states=states, has_dummy=ladder.dummy_state_included)
        logger.debug(
            f"Basis for {ladder.name}: {basis.atomic_size} atomic states"
            f"{' + dummy' if basis.has_dummy else ''}"
        )
        return basis

    @staticmethod
    def describe(ladder: LadderSpec) -> Dict[str, object]:
        """Summary used by the presets listing."""
        basis = BasisService.enumerate_basis(ladder)
        return {
            "name": ladder.name,
            "nuclear_spin": str(ladder.nuclear_spin),
            "levels": [
                {
                    "label": level.label,
                    "term": level.term,
                    "F": str(level.F_resolved) if level.F_resolved is not None else "all",
                    "states": len(basis.level_states(level.label)),
                }
                for level in ladder.levels
            ],
            "atomic_states": basis.atomic_size,
            "total_states": basis.size,
        }
