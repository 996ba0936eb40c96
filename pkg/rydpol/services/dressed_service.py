# rydpol/services/dressed_service.py
"""
Analytic treatment of the RF-dressed Rydberg pair.

With the RF field along the quantization axis the r1 <-> r2 coupling is
diagonal in |mJ, mI>, so the pair separates into independent two-level
systems plus uncoupled r1 spectator states. The probe strength into each
dressed state follows from re-expanding it in the |F mF> basis of r1.
"""
import logging
import math
from typing import Dict, List, Optional

import numpy as np

from rydpol.exceptions import DomainError
from rydpol.models.dressed import (
    DressedEntry,
    DressedManifold,
    MFBlockSpectrum,
    TransitionStrengthRow,
    TransitionStrengthTable,
)
from rydpol.models.quantum import HalfInt, HyperfineState, LadderSpec, LevelSpec
from rydpol.services.angular_service import clebsch_gordan, wigner_3j, wigner_6j
from rydpol.services.basis_service import BasisService
from rydpol.services.coupling_service import CouplingService

logger = logging.getLogger("rydpol.dressed")

ABSENT = "absent"
PRESENT = "present"
DOMINANT = "dominant"

# Strengths below this fraction of the largest one for an i state are round-off
_ZERO_STRENGTH = 1e-15


def _pi_element(J1: HalfInt, J2: HalfInt, mJ: HalfInt) -> float:
    """|3j(J1 1 J2; -mJ 0 mJ)|, the relative pi coupling of r1 mJ to r2 mJ."""
    return abs(wigner_3j(J1, 1, J2, -mJ, 0, mJ))


def _group_distinct(values: List[float], tol: float) -> List[tuple]:
    distinct: List[list] = []
    for value in sorted(values):
        if distinct and abs(value - distinct[-1][0]) <= tol:
            distinct[-1][1] += 1
        else:
            distinct.append([value, 1])
    return [(float(v), int(n)) for v, n in distinct]


class DressedService:
    @staticmethod
    def effective_rabi(r1: LevelSpec, r2: LevelSpec, rf_rabi: float) -> Dict[int, float]:
        """Two-level Rabi frequency per coupled |mJ| (keyed by 2|mJ|), largest one equal to rf_rabi."""
        elements = {}
        for mJ in r1.J.projections():
            if mJ.twice_value < 0 or abs(mJ) > r2.J:
                continue
            elements[mJ.twice_value] = _pi_element(r1.J, r2.J, mJ)
        largest = max(elements.values(), default=0.0)
        if largest == 0.0:
            return {key: 0.0 for key in elements}
        return {key: rf_rabi * value / largest for key, value in elements.items()}

    @staticmethod
    def dress_rydberg_pair(
        r1: LevelSpec,
        r2: LevelSpec,
        rf_rabi: float,
        rf_detuning: float = 0.0,
        nuclear_spin: Optional[HalfInt] = None,
    ) -> DressedManifold:
        """
        Dress r1 by a pi-polarized RF field coupling it to r2.

        Args:
            r1 (LevelSpec): lower Rydberg level (probed through the coupling laser)
            r2 (LevelSpec): upper Rydberg level
            rf_rabi (float): RF Rabi frequency carried by the strongest mJ pair, rad/s
            rf_detuning (float): RF detuning, rad/s
            nuclear_spin (HalfInt): spectator nuclear spin, defaults to 0

        Returns:
            DressedManifold: one entry per (mJ, mI, s), shifts relative to the pair mean

        Raises:
            DomainError: dipole-forbidden pair
        """
        if abs(r1.L - r2.L) != 1:
            raise DomainError(f"RF coupling {r1.term} <-> {r2.term} is dipole-forbidden")
        I = HalfInt.of(nuclear_spin if nuclear_spin is not None else 0)
        rabi = DressedService.effective_rabi(r1, r2, rf_rabi)

        entries = []
        for mJ in r1.J.projections():
            omega = rabi.get(abs(mJ).twice_value)
            for mI in I.projections():
                if omega is None:
                    entries.append(DressedEntry(J=r1.J, mJ=mJ, mI=mI, s=0, energy_shift=0.0))
                    continue
                half_splitting = 0.5 * math.hypot(rf_detuning, omega)
                entries.append(DressedEntry(J=r1.J, mJ=mJ, mI=mI, s=1, energy_shift=half_splitting))
                entries.append(DressedEntry(J=r1.J, mJ=mJ, mI=mI, s=-1, energy_shift=-half_splitting))

        logger.debug(
            f"Dressed {r1.term}<->{r2.term}: {len(entries)} entries, "
            f"{sum(1 for e in entries if e.s == 0)} spectators"
        )
        return DressedManifold(entries=entries, rf_rabi=rf_rabi, rf_detuning=rf_detuning, effective_rabi=rabi)

    @staticmethod
    def dress_ladder(ladder: LadderSpec, rf_rabi: float, rf_detuning: float = 0.0) -> DressedManifold:
        return DressedService.dress_rydberg_pair(ladder.r1, ladder.r2, rf_rabi, rf_detuning, ladder.nuclear_spin)

    @staticmethod
    def transition_strength(i_state: HyperfineState, entry: DressedEntry, I: HalfInt) -> float:
        """
        Relative strength of the pi-polarized coupling-laser transition from an
        i hyperfine state into a dressed r1 state.

        Returns 0 unless mF' = mJ + mI.
        """
        Jp, Fp, mFp = i_state.level.J, i_state.F, i_state.mF
        if mFp != entry.mJ + entry.mI:
            return 0.0
        first = wigner_3j(Jp, entry.J, 1, -entry.mJ, entry.mJ, 0)
        if first == 0.0:
            return 0.0
        second = wigner_3j(Jp, Fp, I, -entry.mJ, mFp, entry.mJ - mFp)
        return 2.0 ** (-abs(entry.s)) * first ** 2 * second ** 2

    @staticmethod
    def strength_table(ladder: LadderSpec, manifold: DressedManifold) -> TransitionStrengthTable:
        """Strengths for every (i-state, dressed entry) pair with matching projection."""
        rows = []
        for i_state in BasisService.level_states(ladder.i, ladder.nuclear_spin):
            for entry in manifold.entries:
                if entry.mJ + entry.mI != i_state.mF:
                    continue
                strength = DressedService.transition_strength(i_state, entry, ladder.nuclear_spin)
                rows.append(TransitionStrengthRow(i_state=i_state, entry=entry, strength=strength))
        return TransitionStrengthTable(rows=rows)

    @staticmethod
    def explicit_strength(i_state: HyperfineState, entry: DressedEntry, I: HalfInt) -> float:
        """
        Strength from the explicit sum over the r1 hyperfine manifolds of
        CG coefficient times the Wigner-Eckart matrix element, reduced to the
        fine structure with a 6j symbol.
        """
        Jp, Fp, mFp = i_state.level.J, i_state.F, i_state.mF
        J, mJ, mI = entry.J, entry.mJ, entry.mI
        mF = mJ + mI
        if mFp != mF:
            return 0.0
        amplitude = 0.0
        low = abs(J.twice_value - I.twice_value)
        for tF in range(low, J.twice_value + I.twice_value + 1, 2):
            F = HalfInt(twice_value=tF)
            if abs(mF) > F:
                continue
            cg_decouple = clebsch_gordan(J, mJ, I, mI, F, mF)
            if cg_decouple == 0.0:
                continue
            cg_dipole = clebsch_gordan(F, mF, 1, 0, Fp, mFp)
            twice_exponent = Jp.twice_value + I.twice_value + F.twice_value + 2
            phase = -1.0 if (twice_exponent // 2) % 2 else 1.0
            reduced = phase * math.sqrt(F.multiplicity * Fp.multiplicity) * wigner_6j(Jp, Fp, I, F, J, 1)
            amplitude += cg_decouple * cg_dipole / math.sqrt(Fp.multiplicity) * reduced
        return 2.0 ** (-abs(entry.s)) * amplitude ** 2

    @staticmethod
    def hyperfine_closed_form_residual(i_state: HyperfineState, entry: DressedEntry, I: HalfInt) -> float:
        """
        Relative residual between the explicit hyperfine sum and the closed form.

        The explicit sum carries the |F' mF'> normalization (2F'+1) that the
        proportional closed form leaves out.
        Pairs whose strength is below 1e-15 of the strongest pair reaching the
        same i state count as forbidden on both sides.
        """
        explicit = DressedService.explicit_strength(i_state, entry, I)
        closed = i_state.F.multiplicity * DressedService.transition_strength(i_state, entry, I)
        floor = _ZERO_STRENGTH * i_state.F.multiplicity * DressedService.largest_strength(i_state, entry.J, I)
        scale = max(abs(explicit), abs(closed))
        if scale <= floor or scale == 0.0:
            return 0.0
        return abs(explicit - closed) / scale

    @staticmethod
    def largest_strength(i_state: HyperfineState, J: HalfInt, I: HalfInt) -> float:
        """Largest closed-form strength from i_state into any bare r1 |J mJ>|I mI> with matching mF."""
        largest = 0.0
        for mJ in J.projections():
            mI = i_state.mF - mJ
            if abs(mI) > I:
                continue
            entry = DressedEntry(J=J, mJ=mJ, mI=mI, s=0)
            largest = max(largest, DressedService.transition_strength(i_state, entry, I))
        return largest

    @staticmethod
    def diagonalize_mF_block(ladder: LadderSpec, mF: HalfInt, rf_rabi: float, tol: float = 1e-9) -> MFBlockSpectrum:
        """
        Diagonalize the resonant pi RF coupling among r1 and r2 hyperfine states at fixed mF.

        The radial factor is fixed so the strongest coupling in the full
        r1 <-> r2 block equals rf_rabi, matching dress_rydberg_pair.

        Raises:
            DomainError: no r1 or r2 state carries this mF
        """
        mF = HalfInt.of(mF)
        I = ladder.nuclear_spin
        r1_states = BasisService.level_states(ladder.r1, I)
        r2_states = BasisService.level_states(ladder.r2, I)
        rows = [n for n, s in enumerate(r2_states) if s.mF == mF]
        cols = [n for n, s in enumerate(r1_states) if s.mF == mF]
        if not rows and not cols:
            raise DomainError(f"No r1 or r2 hyperfine state has mF={mF}")

        u0 = CouplingService.angular_matrix(ladder.r1, ladder.r2, 0, I).matrix
        largest = DressedService.pi_element_scale(ladder)
        radial = rf_rabi / largest if largest > 0 else 0.0

        n1, n2 = len(cols), len(rows)
        block = np.zeros((n1 + n2, n1 + n2))
        sub = 0.5 * radial * u0[np.ix_(rows, cols)]
        block[n1:, :n1] = sub
        block[:n1, n1:] = sub.T
        eigenvalues = np.linalg.eigvalsh(block)
        scale = max(abs(rf_rabi), 1.0)
        return MFBlockSpectrum(
            mF=mF,
            dimension=n1 + n2,
            eigenvalues=[float(v) for v in eigenvalues],
            distinct=_group_distinct(list(eigenvalues), tol * scale),
        )

    @staticmethod
    def pi_element_scale(ladder: LadderSpec) -> float:
        """Largest pi angular element between r1 and r2, i.e. the strongest mJ pair."""
        u0 = CouplingService.angular_matrix(ladder.r1, ladder.r2, 0, ladder.nuclear_spin).matrix
        return float(np.linalg.svd(u0, compute_uv=False).max()) if u0.size else 0.0

    @staticmethod
    def pair_rabi(ladder: LadderSpec, radial_rabi: float) -> float:
        """Rabi frequency of the strongest r1-r2 mJ pair for a given radial RF Rabi frequency."""
        return radial_rabi * DressedService.pi_element_scale(ladder)

    @staticmethod
    def shifts_at_mF(ladder: LadderSpec, mF: HalfInt, rf_rabi: float) -> List[float]:
        """
        Resonant dressed shifts of the r1/r2 pair at fixed mF in the |J mJ> |I mI> picture.

        Coupled pairs contribute +/- Omega/2; uncoupled r1 and r2 sublevels contribute 0.
        """
        mF = HalfInt.of(mF)
        manifold = DressedService.dress_ladder(ladder, rf_rabi)
        shifts = [entry.energy_shift for entry in manifold.with_mF(mF)]
        for mJ in ladder.r2.J.projections():
            if abs(mJ) <= ladder.r1.J:
                continue
            for mI in ladder.nuclear_spin.projections():
                if mJ + mI == mF:
                    shifts.append(0.0)
        return sorted(shifts)

    @staticmethod
    def mF_values(ladder: LadderSpec) -> List[HalfInt]:
        """All mF carried by r1 or r2 hyperfine states, ascending."""
        I = ladder.nuclear_spin
        largest = max(
            (J + I).twice_value for J in (ladder.r1.J, ladder.r2.J)
        )
        return [HalfInt(twice_value=t) for t in range(-largest, largest + 1, 2)]

    @staticmethod
    def predict_central_peak(ladder: LadderSpec, theta: float) -> str:
        """
        Predict the central EIT peak for RF polarization angle theta (degrees)
        relative to the co-polarized optical fields.

        Returns:
            str: "absent", "present" or "dominant"
        """
        J_i, J1, J2 = ladder.i.J, ladder.r1.J, ladder.r2.J
        spectators = [mJ for mJ in J1.projections() if abs(mJ) > J2]
        if not spectators:
            return ABSENT

        reduced = math.fmod(theta, 180.0)
        co_polarized = abs(reduced) < 1e-9 or abs(abs(reduced) - 180.0) < 1e-9
        if not co_polarized:
            return PRESENT

        accessible = [mJ for mJ in spectators if abs(mJ) <= J_i]
        if not accessible:
            return ABSENT

        def weight(mJ: HalfInt) -> float:
            return wigner_3j(J_i, J1, 1, -mJ, mJ, 0) ** 2

        central = sum(weight(mJ) for mJ in accessible)
        # Each coupled |mJ| splits into a symmetric pair carrying half the weight each
        side_weights: Dict[float, float] = {}
        rabi = DressedService.effective_rabi(ladder.r1, ladder.r2, 1.0)
        for mJ in J1.projections():
            if abs(mJ) > J2 or abs(mJ) > J_i:
                continue
            key = round(rabi[abs(mJ).twice_value], 12)
            side_weights[key] = side_weights.get(key, 0.0) + 0.5 * weight(mJ)
        largest_side = max(side_weights.values(), default=0.0)
        return DOMINANT if central > largest_side else PRESENT
