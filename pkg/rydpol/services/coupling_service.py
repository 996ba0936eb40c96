# rydpol/services/coupling_service.py
import logging
import math
from functools import lru_cache
from typing import Tuple

import numpy as np

from rydpol.exceptions import DomainError
from rydpol.models.fields import CouplingBlock, FieldConfig, Polarization
from rydpol.models.quantum import HalfInt, LevelSpec
from rydpol.services.angular_service import six_j_offset, wigner_3j, wigner_6j
from rydpol.services.basis_service import BasisService

logger = logging.getLogger("rydpol.couplings")

SPHERICAL_COMPONENTS = (-1, 0, 1)


def _phase(twice_exponent: int) -> int:
    """(-1)**(twice_exponent / 2) for an even doubled exponent."""
    return -1 if (twice_exponent // 2) % 2 else 1


def angular_element(
    upper: LevelSpec, F: HalfInt, mF: HalfInt,
    lower: LevelSpec, Fp: HalfInt, mFp: HalfInt,
    q: int, nuclear_spin: HalfInt,
) -> float:
    """<S L J F mF| u^(q) |S L' J' F' mF'> with the upper state in the bra."""
    S, L, J = upper.S, upper.L, upper.J
    Lp, Jp = lower.L, lower.J
    I = nuclear_spin
    three_j = wigner_3j(F, 1, Fp, mF, q, -mFp)
    if three_j == 0.0:
        return 0.0
    six_j_fine = wigner_6j(Lp, Jp, S, J, L, 1)
    six_j_hyperfine = wigner_6j(Jp, Fp, I, F, J, 1)
    # 1 + L' + S + J + J' + I - mF', all doubled
    exponent = 2 + 2 * Lp + S.twice_value + J.twice_value + Jp.twice_value + I.twice_value - mFp.twice_value
    magnitude = math.sqrt(J.multiplicity * Jp.multiplicity * F.multiplicity * Fp.multiplicity)
    return _phase(exponent) * magnitude * six_j_fine * six_j_hyperfine * three_j


@lru_cache(maxsize=256)
def _angular_matrix_cached(lower: LevelSpec, upper: LevelSpec, q: int, nuclear_spin: HalfInt, offset: float) -> np.ndarray:
    upper_states = BasisService.level_states(upper, nuclear_spin)
    lower_states = BasisService.level_states(lower, nuclear_spin)
    matrix = np.zeros((len(upper_states), len(lower_states)))
    for a, u in enumerate(upper_states):
        for b, l in enumerate(lower_states):
            if l.mF.twice_value != u.mF.twice_value + 2 * q:
                continue
            matrix[a, b] = angular_element(upper, u.F, u.mF, lower, l.F, l.mF, q, nuclear_spin)
    matrix.setflags(write=False)
    return matrix


class CouplingService:
    @staticmethod
    def spherical_coefficients(p: Polarization) -> Tuple[complex, complex, complex]:
        """
        Spherical-basis expansion of a unit polarization vector.

        Returns:
            tuple: (A^(-1), A^(0), A^(+1))

        Raises:
            DomainError: the polarization is not normalized
        """
        if not p.is_normalized():
            raise DomainError(f"Polarization is not normalized: |E|^2 = {p.norm_squared:.15g}")
        a_plus = -(p.ex + 1j * p.ey) / math.sqrt(2)
        a_zero = complex(p.ez)
        a_minus = (p.ex - 1j * p.ey) / math.sqrt(2)
        return a_minus, a_zero, a_plus

    @staticmethod
    def rf_polarization(theta: float) -> Polarization:
        """RF unit vector at angle theta (radians) from the optical polarization, in the z-y plane."""
        return Polarization.linear(theta)

    @staticmethod
    def angular_matrix(lower: LevelSpec, upper: LevelSpec, q: int, I: HalfInt) -> CouplingBlock:
        """
        Angular matrix u^(q) between two levels, rows upper states, columns lower states.

        Element (F mF | F' mF') is non-zero only when mF' = mF + q.

        Raises:
            DomainError: |L - L'| != 1, mismatched spin, or q outside {-1, 0, 1}
        """
        if q not in SPHERICAL_COMPONENTS:
            raise DomainError(f"q must be -1, 0 or +1, got {q}")
        if abs(upper.L - lower.L) != 1:
            raise DomainError(
                f"Dipole-forbidden coupling {lower.label}({lower.term}) -> {upper.label}({upper.term}): |dL| must be 1"
            )
        if upper.S != lower.S:
            raise DomainError(f"Levels {lower.label} and {upper.label} have different spin")
        matrix = _angular_matrix_cached(lower, upper, q, HalfInt.of(I), six_j_offset())
        return CouplingBlock(matrix=matrix, lower=lower, upper=upper)

    @staticmethod
    def coupling_operator(field: FieldConfig, lower: LevelSpec, upper: LevelSpec, I: HalfInt) -> CouplingBlock:
        """Rabi coupling block Omega = radial_rabi * sum_q A^(q) u^(q)."""
        coefficients = CouplingService.spherical_coefficients(field.polarization)
        matrix = None
        for q, a_q in zip(SPHERICAL_COMPONENTS, coefficients):
            u = CouplingService.angular_matrix(lower, upper, q, I).matrix
            term = a_q * u
            matrix = term if matrix is None else matrix + term
        matrix = field.radial_rabi * matrix
        return CouplingBlock(matrix=matrix, lower=lower, upper=upper)

    @staticmethod
    def angular_operator(p: Polarization, lower: LevelSpec, upper: LevelSpec, I: HalfInt) -> np.ndarray:
        """sum_q A^(q) u^(q) without the radial factor."""
        field = FieldConfig(polarization=p, radial_rabi=1.0)
        return CouplingService.coupling_operator(field, lower, upper, I).matrix
