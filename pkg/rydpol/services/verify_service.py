# rydpol/services/verify_service.py
"""
Cross-module oracle checks run by `rydpol verify`.

Each check compares two independent routes to the same quantity (explicit
hyperfine sums against closed forms, J-basis against F-basis dressing,
algebraic steady state against long-time integration, first-order probe
response against the full steady state, velocity quadrature against the
exact Gaussian average) and reports the measured residual against its
tolerance.
"""
import logging
import math
import time
from contextlib import nullcontext
from datetime import datetime, timezone
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp

from rydpol.config.engine_config import ENGINE_VERSION
from rydpol.exceptions import RydpolError
from rydpol.models.fields import FieldConfig, Polarization
from rydpol.models.master import DecayRates
from rydpol.models.quantum import HalfInt, LadderSpec, LevelSpec
from rydpol.models.spectra import VaporConfig
from rydpol.models.verify import CheckResult, VerificationReport
from rydpol.services.angular_service import perturbed_six_j, wigner_3j
from rydpol.services.basis_service import BasisService
from rydpol.services.dressed_service import DressedService
from rydpol.services.master_service import (
    LiouvillianTemplate,
    MasterService,
    ProbeResponse,
    initial_ground_state,
    trace_distance,
)
from rydpol.services.spectra_service import SpectraService

logger = logging.getLogger("rydpol.verify")

HYPERFINE_PRESETS = ("type1", "type2")

# Fields and rates for the dynamics cross-check; strong enough to relax in microseconds
CHECK_RATES = DecayRates(
    gamma_transit=2 * math.pi * 0.5e6,
    gamma_collision=2 * math.pi * 0.5e6,
    gamma_r1_rad=2 * math.pi * 0.1e6,
    gamma_r2_rad=2 * math.pi * 0.1e6,
)
CHECK_DUMMY_FACTOR = 10.0
CHECK_EVOLUTION_TIME = 20e-6
CHECK_THETA_DEG = 45.0
# Probe Rabi frequency for the first-order checks
CHECK_WEAK_PROBE = 2 * math.pi * 0.02e6


def truncated_hyperfine_ladder() -> LadderSpec:
    """Rb-87 style ladder cut down to one F per level: 12 atomic states plus the dummy."""
    half = HalfInt.of("1/2")
    return LadderSpec(
        name="truncated_hyperfine",
        nuclear_spin=HalfInt.of("3/2"),
        levels=[
            LevelSpec(label="g", S=half, L=0, J=half, F_resolved=HalfInt.of(1)),
            LevelSpec(label="i", S=half, L=1, J=HalfInt.of("3/2"), F_resolved=HalfInt.of(2)),
            LevelSpec(label="r1", S=half, L=2, J=HalfInt.of("5/2"), F_resolved=HalfInt.of(1)),
            LevelSpec(label="r2", S=half, L=1, J=HalfInt.of("3/2"), F_resolved=HalfInt.of(0)),
        ],
    )


def check_fields(theta_deg: float = CHECK_THETA_DEG):
    """Probe, coupling and RF fields used by the dynamics checks."""
    probe = FieldConfig(radial_rabi=2 * math.pi * 2e6, detuning=2 * math.pi * 0.5e6)
    coupling = FieldConfig(radial_rabi=2 * math.pi * 4e6, detuning=-2 * math.pi * 1e6)
    rf = FieldConfig(
        polarization=Polarization.linear(math.radians(theta_deg)),
        radial_rabi=2 * math.pi * 6e6,
        detuning=2 * math.pi * 0.3e6,
    )
    return probe, coupling, rf


def _result(name: str, value: float, tolerance: float, expected: Optional[float] = None, detail: str = "", **extra) -> CheckResult:
    if expected is None:
        passed = bool(np.isfinite(value)) and value <= tolerance
    else:
        passed = bool(np.isfinite(value)) and abs(value - expected) <= tolerance
    return CheckResult(name=name, passed=passed, value=float(value), tolerance=tolerance, expected=expected,
                       detail=detail, extra=extra)


class VerifyService:
    @staticmethod
    def check_hyperfine_closed_form() -> CheckResult:
        """Explicit hyperfine CG sum against the closed-form two-3j strength, both presets."""
        worst = 0.0
        pairs = 0
        for name in HYPERFINE_PRESETS:
            ladder = BasisService.preset(name)
            manifold = DressedService.dress_ladder(ladder, rf_rabi=1.0)
            for i_state in BasisService.level_states(ladder.i, ladder.nuclear_spin):
                for entry in manifold.with_mF(i_state.mF):
                    worst = max(worst, DressedService.hyperfine_closed_form_residual(i_state, entry, ladder.nuclear_spin))
                    pairs += 1
        return _result("hyperfine_closed_form", worst, 1e-10, detail=f"max relative residual over {pairs} pairs")

    @staticmethod
    def check_ninefold_ratio() -> CheckResult:
        """First-3j-squared factor of type-II mJ=3/2 over mJ=1/2."""
        ladder = BasisService.preset("type2")
        Jp, J = ladder.i.J, ladder.r1.J
        outer = wigner_3j(Jp, J, 1, HalfInt.of("-3/2"), HalfInt.of("3/2"), 0) ** 2
        inner = wigner_3j(Jp, J, 1, HalfInt.of("-1/2"), HalfInt.of("1/2"), 0) ** 2
        return _result("ninefold_ratio", outer / inner, 1e-9, expected=9.0)

    @staticmethod
    def check_dipole_ratio() -> CheckResult:
        """Ratio of the two pi matrix-element magnitudes of the type-I D5/2 <-> P3/2 block."""
        ladder = BasisService.preset("type1")
        rabi = DressedService.effective_rabi(ladder.r1, ladder.r2, 1.0)
        ratio = min(rabi.values()) / max(rabi.values())
        return _result("dipole_ratio", ratio, 1e-9, expected=math.sqrt(2.0 / 3.0))

    @staticmethod
    def check_jf_equivalence(rf_rabi: float = 2 * math.pi * 10e6) -> CheckResult:
        """
        F-basis block eigenvalues against J-basis dressed shifts for every mF of
        both presets, plus the type-I mF=1 block structure (7 states, 5 distinct levels).
        """
        worst = 0.0
        blocks = 0
        for name in HYPERFINE_PRESETS:
            ladder = BasisService.preset(name)
            for mF in DressedService.mF_values(ladder):
                spectrum = DressedService.diagonalize_mF_block(ladder, mF, rf_rabi)
                expected = DressedService.shifts_at_mF(ladder, mF, rf_rabi)
                if len(expected) != spectrum.dimension:
                    worst = math.inf
                    continue
                deviation = np.max(np.abs(np.sort(spectrum.eigenvalues) - np.asarray(expected))) / rf_rabi
                worst = max(worst, float(deviation))
                blocks += 1

        structure = DressedService.diagonalize_mF_block(BasisService.preset("type1"), HalfInt.of(1), rf_rabi)
        structure_ok = structure.dimension == 7 and structure.distinct_count == 5
        result = _result(
            "jf_basis_equivalence",
            worst,
            1e-10,
            detail=f"max |dE|/rf_rabi over {blocks} blocks",
            type1_mF1_dimension=structure.dimension,
            type1_mF1_distinct=structure.distinct_count,
        )
        if not structure_ok:
            result = result.model_copy(update={"passed": False, "detail": result.detail + "; type1 mF=1 block structure wrong"})
        return result

    @staticmethod
    def check_collapse_sum_rule() -> CheckResult:
        """Radiative operators of every preset drain each i state at exactly gamma_i."""
        worst = 0.0
        rates = CHECK_RATES
        for name in BasisService.preset_names():
            basis = BasisService.enumerate_basis(BasisService.preset(name))
            D = MasterService.build_collapse_operators(basis, rates)
            total = sum(op.matrix.conj().T @ op.matrix for op in D.by_label("radiative"))
            i = basis.level_slice("i")
            block = total[i, i]
            worst = max(worst, float(np.max(np.abs(block - np.eye(block.shape[0])))))
        return _result("collapse_sum_rule", worst, 1e-12, detail="max |sum_q L_q^dag L_q - 1| on the i block")

    @staticmethod
    def check_trace_preservation() -> CheckResult:
        """The trace functional annihilates every Liouvillian column."""
        worst = 0.0
        probe, coupling, rf = check_fields(30.0)
        for ladder in [BasisService.preset(n) for n in BasisService.preset_names()] + [truncated_hyperfine_ladder()]:
            template = LiouvillianTemplate(ladder, probe, coupling, rf, CHECK_RATES)
            L = template.at(probe.detuning, coupling.detuning)
            N = template.basis.size
            trace_row = sp.csr_matrix(
                (np.ones(N), (np.zeros(N, dtype=int), np.arange(N) * (N + 1))), shape=(1, N * N)
            )
            leak = np.abs((trace_row @ L).toarray()).max()
            worst = max(worst, float(leak / abs(L).max()))
        return _result("trace_preservation", worst, 1e-12, detail="max |tr(L rho)| relative to max |L|")

    @staticmethod
    def check_steady_state_dynamics() -> CheckResult:
        """Algebraic steady state against long-time integration from the ground manifold."""
        worst = 0.0
        trace_error = 0.0
        min_eigenvalue = math.inf
        probe, coupling, rf = check_fields()
        for ladder in (BasisService.preset("model_atom"), truncated_hyperfine_ladder()):
            template = LiouvillianTemplate(ladder, probe, coupling, rf, CHECK_RATES, CHECK_DUMMY_FACTOR)
            steady = template.steady_state(probe.detuning, coupling.detuning)
            H = template.hamiltonian(probe.detuning, coupling.detuning)
            rho = MasterService.time_evolve(H, template.dissipator, initial_ground_state(template.basis), CHECK_EVOLUTION_TIME)
            worst = max(worst, trace_distance(steady.rho, rho))
            trace_error = max(trace_error, abs(np.trace(rho) - 1.0), steady.diagnostics["trace_error"])
            min_eigenvalue = min(min_eigenvalue, steady.diagnostics["min_eigenvalue"])
        result = _result(
            "steady_state_vs_time_evolution",
            worst,
            1e-6,
            detail="trace distance on the model atom and a truncated hyperfine ladder",
            trace_error=float(trace_error),
            min_eigenvalue=float(min_eigenvalue),
        )
        if trace_error > 1e-8 or min_eigenvalue < -1e-9:
            result = result.model_copy(update={"passed": False, "detail": result.detail + "; trace or positivity violated"})
        return result

    @staticmethod
    def check_weak_probe_response() -> CheckResult:
        """First-order probe response against the full steady state at a weak probe."""
        worst = 0.0
        _, coupling, rf = check_fields()
        probe = FieldConfig(radial_rabi=CHECK_WEAK_PROBE, detuning=2 * math.pi * 0.5e6)
        for ladder in (BasisService.preset("model_atom"), truncated_hyperfine_ladder()):
            template = LiouvillianTemplate(ladder, probe, coupling, rf, CHECK_RATES)
            g, i = template.basis.level_slice("g"), template.basis.level_slice("i")
            linear = ProbeResponse(template).density_matrix(probe.detuning, coupling.detuning)[g, i]
            full = template.steady_state(probe.detuning, coupling.detuning).rho[g, i]
            worst = max(worst, float(np.max(np.abs(linear - full)) / np.max(np.abs(full))))
        return _result(
            "weak_probe_response", worst, 1e-2, detail="max |rho_gi| deviation relative to the full steady state"
        )

    @staticmethod
    def check_doppler_quadrature() -> CheckResult:
        """Refined trapezoid velocity average against the exact Gaussian average of the pole expansion."""
        probe, coupling, rf = check_fields()
        probe = probe.with_rabi(CHECK_WEAK_PROBE)
        vapor = VaporConfig(density=1e14)
        template = LiouvillianTemplate(BasisService.preset("model_atom"), probe, coupling, rf, CHECK_RATES)
        response = ProbeResponse(template)
        basis = template.basis
        observable = np.zeros((basis.size, basis.size), dtype=complex)
        observable[basis.level_slice("g"), basis.level_slice("i")] = SpectraService.extinction_kernel(basis, probe, vapor)
        expansion = response.pole_expansion(
            response.weights(observable),
            probe.detuning,
            coupling.detuning,
            vapor.probe_wavenumber,
            vapor.coupling_wavenumber,
        )
        exact = SpectraService.analytic_doppler_average(expansion, vapor)
        quadrature = SpectraService.doppler_average(
            expansion.evaluate, vapor, velocity_width=expansion.narrowest(), vectorized=True
        )
        return _result(
            "doppler_quadrature",
            abs(quadrature - exact) / abs(exact),
            1e-3,
            detail="relative error of the default velocity mesh at 300 K",
            poles=int(expansion.poles.size),
        )

    @staticmethod
    def checks(include_dynamics: bool = True) -> List[Callable[[], CheckResult]]:
        selected = [
            VerifyService.check_hyperfine_closed_form,
            VerifyService.check_ninefold_ratio,
            VerifyService.check_dipole_ratio,
            VerifyService.check_jf_equivalence,
            VerifyService.check_collapse_sum_rule,
            VerifyService.check_trace_preservation,
            VerifyService.check_weak_probe_response,
            VerifyService.check_doppler_quadrature,
        ]
        if include_dynamics:
            selected.append(VerifyService.check_steady_state_dynamics)
        return selected

    @staticmethod
    def run_verify(six_j_offset: float = 0.0, include_dynamics: bool = True) -> VerificationReport:
        """
        Run every check and collect a pass/fail report.

        A non-zero six_j_offset perturbs all 6j symbols for the duration of the
        run; checks that depend on them are expected to fail.
        """
        started_at = datetime.now(timezone.utc)
        started = time.time()
        results = []
        with perturbed_six_j(six_j_offset) if six_j_offset else nullcontext():
            for check in VerifyService.checks(include_dynamics):
                name = check.__name__.replace("check_", "")
                try:
                    result = check()
                except RydpolError as e:
                    logger.error(f"❌ Check {name} raised: {e.detail}")
                    result = CheckResult(name=name, passed=False, value=math.nan, tolerance=0.0, detail=e.detail)
                status = "✅" if result.passed else "❌"
                logger.info(f"{status} {result.name}: {result.value:.3e} (tolerance {result.tolerance:g})")
                results.append(result)

        report = VerificationReport(
            checks=results,
            engine_version=ENGINE_VERSION,
            started_at=started_at,
            duration_seconds=time.time() - started,
            six_j_offset=six_j_offset,
        )
        if report.passed:
            logger.info(f"✅ All {len(results)} checks passed in {report.duration_seconds:.2f} s")
        else:
            logger.warning(f"⚠️ {len(report.failures)} of {len(results)} checks failed")
        return report

