# rydpol/services/angular_service.py
"""
Wigner 3j / 6j symbols and Clebsch-Gordan coefficients.

All arguments are carried as doubled integers internally. The Racah sums are
evaluated exactly with rational arithmetic; only the final square root is
taken in floating point. Results are memoised per process.
"""
import logging
import math
from contextlib import contextmanager
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Tuple

from rydpol.exceptions import DomainError
from rydpol.models.quantum import HalfIntLike, twice_of

logger = logging.getLogger("rydpol.angular")

# Additive offset applied to triangle-valid 6j symbols; only touched by perturbed_six_j
_SIX_J_OFFSET = 0.0


def _factorial(n: int) -> int:
    return math.factorial(n)


def _check_magnitude(tj: int, name: str) -> None:
    if tj < 0:
        raise DomainError(f"{name} must be non-negative, got {tj}/2")


def _check_pair(tj: int, tm: int) -> bool:
    """Validate a (j, m) pair. Returns False when |m| > j."""
    _check_magnitude(tj, "j")
    if (tj - tm) % 2 != 0:
        raise DomainError(f"j={tj}/2 and m={tm}/2 do not differ by an integer")
    return abs(tm) <= tj


def _triangle(ta: int, tb: int, tc: int) -> bool:
    return (ta + tb + tc) % 2 == 0 and abs(ta - tb) <= tc <= ta + tb


def _delta_squared(ta: int, tb: int, tc: int) -> Fraction:
    """Triangle coefficient (a+b-c)!(a-b+c)!(-a+b+c)!/(a+b+c+1)! for doubled arguments."""
    return Fraction(
        _factorial((ta + tb - tc) // 2) * _factorial((ta - tb + tc) // 2) * _factorial((-ta + tb + tc) // 2),
        _factorial((ta + tb + tc) // 2 + 1),
    )


def _signed_sqrt(sign_and_sum: Fraction, radicand: Fraction) -> float:
    if sign_and_sum == 0:
        return 0.0
    return float(sign_and_sum) * math.sqrt(radicand)


@lru_cache(maxsize=None)
def _three_j_twice(tj1: int, tj2: int, tj3: int, tm1: int, tm2: int, tm3: int) -> float:
    if tm1 + tm2 + tm3 != 0 or not _triangle(tj1, tj2, tj3):
        return 0.0

    j1pm1, j1mm1 = (tj1 + tm1) // 2, (tj1 - tm1) // 2
    j2pm2, j2mm2 = (tj2 + tm2) // 2, (tj2 - tm2) // 2
    j3pm3, j3mm3 = (tj3 + tm3) // 2, (tj3 - tm3) // 2

    radicand = _delta_squared(tj1, tj2, tj3) * (
        _factorial(j1pm1) * _factorial(j1mm1) * _factorial(j2pm2)
        * _factorial(j2mm2) * _factorial(j3pm3) * _factorial(j3mm3)
    )

    # k runs over all values keeping every factorial argument non-negative
    a = (tj3 - tj2 + tm1) // 2
    b = (tj3 - tj1 - tm2) // 2
    c = (tj1 + tj2 - tj3) // 2
    k_min = max(0, -a, -b)
    k_max = min(c, j1mm1, j2pm2)

    total = Fraction(0)
    for k in range(k_min, k_max + 1):
        term = Fraction(
            1,
            _factorial(k) * _factorial(a + k) * _factorial(b + k)
            * _factorial(c - k) * _factorial(j1mm1 - k) * _factorial(j2pm2 - k),
        )
        total += -term if k % 2 else term

    phase = (tj1 - tj2 - tm3) // 2
    if phase % 2:
        total = -total
    return _signed_sqrt(total, radicand)


@lru_cache(maxsize=None)
def _six_j_twice(tj1: int, tj2: int, tj3: int, tj4: int, tj5: int, tj6: int) -> float:
    triads = ((tj1, tj2, tj3), (tj1, tj5, tj6), (tj4, tj2, tj6), (tj4, tj5, tj3))
    if not all(_triangle(*t) for t in triads):
        return 0.0

    radicand = Fraction(1)
    for t in triads:
        radicand *= _delta_squared(*t)

    a = [sum(t) // 2 for t in triads]
    b = [
        (tj1 + tj2 + tj4 + tj5) // 2,
        (tj2 + tj3 + tj5 + tj6) // 2,
        (tj3 + tj1 + tj6 + tj4) // 2,
    ]

    total = Fraction(0)
    for t in range(max(a), min(b) + 1):
        denominator = 1
        for x in a:
            denominator *= _factorial(t - x)
        for y in b:
            denominator *= _factorial(y - t)
        term = Fraction(_factorial(t + 1), denominator)
        total += -term if t % 2 else term
    return _signed_sqrt(total, radicand)


def wigner_3j(
    j1: HalfIntLike, j2: HalfIntLike, j3: HalfIntLike,
    m1: HalfIntLike, m2: HalfIntLike, m3: HalfIntLike,
) -> float:
    """
    Wigner 3j symbol (j1 j2 j3; m1 m2 m3).

    Returns 0 when a projection exceeds its j, when the projections do not sum
    to zero, or when the triangle rule fails.

    Raises:
        DomainError: negative j, or a j and m that do not differ by an integer.
    """
    tj = (twice_of(j1), twice_of(j2), twice_of(j3))
    tm = (twice_of(m1), twice_of(m2), twice_of(m3))
    in_range = [_check_pair(j, m) for j, m in zip(tj, tm)]
    if not all(in_range):
        return 0.0
    return _three_j_twice(*tj, *tm)


def wigner_6j(
    j1: HalfIntLike, j2: HalfIntLike, j3: HalfIntLike,
    j4: HalfIntLike, j5: HalfIntLike, j6: HalfIntLike,
) -> float:
    """
    Wigner 6j symbol {j1 j2 j3; j4 j5 j6}.

    Returns 0 when any of the four triads violates the triangle rule.

    Raises:
        DomainError: a negative argument.
    """
    tj = tuple(twice_of(j) for j in (j1, j2, j3, j4, j5, j6))
    for t in tj:
        _check_magnitude(t, "6j argument")
    value = _six_j_twice(*tj)
    if _SIX_J_OFFSET and _six_j_is_allowed(*tj):
        value += _SIX_J_OFFSET
    return value


def _six_j_is_allowed(tj1: int, tj2: int, tj3: int, tj4: int, tj5: int, tj6: int) -> bool:
    triads = ((tj1, tj2, tj3), (tj1, tj5, tj6), (tj4, tj2, tj6), (tj4, tj5, tj3))
    return all(_triangle(*t) for t in triads)


def clebsch_gordan(
    j1: HalfIntLike, m1: HalfIntLike,
    j2: HalfIntLike, m2: HalfIntLike,
    J: HalfIntLike, M: HalfIntLike,
) -> float:
    """<j1 m1 j2 m2 | J M> in the Condon-Shortley convention."""
    tj1, tm1, tj2, tm2, tJ, tM = (twice_of(x) for x in (j1, m1, j2, m2, J, M))
    pairs_ok = [_check_pair(tj1, tm1), _check_pair(tj2, tm2), _check_pair(tJ, tM)]
    if not all(pairs_ok) or tM != tm1 + tm2:
        return 0.0
    phase = (tj1 - tj2 + tM) // 2
    value = math.sqrt(tJ + 1) * _three_j_twice(tj1, tj2, tJ, tm1, tm2, -tM)
    return -value if phase % 2 else value


def six_j_offset() -> float:
    return _SIX_J_OFFSET


def cache_info() -> Tuple:
    return _three_j_twice.cache_info(), _six_j_twice.cache_info()


@contextmanager
def perturbed_six_j(offset: float) -> Iterator[None]:
    """
    Temporarily add a constant to every triangle-allowed 6j symbol.

    Mutation hook for the verification suite: checks that depend on 6j
    values must fail while this is active.
    """
    global _SIX_J_OFFSET
    previous = _SIX_J_OFFSET
    _SIX_J_OFFSET = offset
    logger.warning(f"⚠️ 6j symbols perturbed by {offset:g}")
    try:
        yield
    finally:
        _SIX_J_OFFSET = previous
