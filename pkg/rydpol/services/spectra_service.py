# rydpol/services/spectra_service.py
import hashlib
import json
import logging
import math
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from pydantic import BaseModel
from scipy import constants
from scipy.signal import find_peaks
from scipy.special import wofz

from rydpol.config.engine_config import engine_settings
from rydpol.exceptions import DomainError, NumericalConsistencyError, SolverError
from rydpol.models.fields import FieldConfig, Polarization
from rydpol.models.master import DecayRates, PoleExpansion, SteadyState
from rydpol.models.quantum import HyperfineBasis, LadderSpec
from rydpol.models.spectra import DopplerSettings, PeakSet, Spectrogram, UndulationFit, VaporConfig
from rydpol.services.basis_service import BasisService
from rydpol.services.coupling_service import CouplingService
from rydpol.services.master_service import LiouvillianTemplate, ProbeResponse
from rydpol.workers.pool_manager import PoolManager

logger = logging.getLogger("rydpol.spectra")

NO_DOPPLER = DopplerSettings(enabled=False)

# Row solvers
LINEAR = "linear"
FULL = "full"
SOLVERS = (LINEAR, FULL)


class SpectrogramRowTask(BaseModel):
    """Everything needed to compute one theta row; picklable for worker processes."""

    ladder: LadderSpec
    theta_deg: float
    detunings: List[float]
    probe: FieldConfig
    coupling: FieldConfig
    rf: FieldConfig
    vapor: VaporConfig
    rates: DecayRates
    doppler: DopplerSettings
    dummy_rate_factor: float
    solver: str = LINEAR


class SpectraService:
    @staticmethod
    def extinction_kernel(basis: HyperfineBasis, probe: FieldConfig, vapor: VaporConfig) -> np.ndarray:
        """
        Per-(g, i) weights K with alpha = sum Im(rho_gi * K_gi).

        K_gi = 2 n w_p / (c eps0 hbar) * |mu_ig|^2 / Omega_ig, zero where the
        probe does not couple the pair.
        """
        spec = basis.ladder
        angular = CouplingService.angular_operator(probe.polarization, spec.g, spec.i, spec.nuclear_spin)
        kernel = np.zeros(angular.T.shape, dtype=complex)
        if probe.radial_rabi == 0:
            return kernel
        prefactor = 2 * vapor.density * vapor.probe_angular_frequency / (constants.c * constants.epsilon_0 * constants.hbar)
        coupled = np.abs(angular) > 1e-14
        # |mu|^2 / Omega = d^2 |a|^2 / (Omega_r a) = d^2 conj(a) / Omega_r
        values = np.where(coupled, vapor.probe_dipole ** 2 * np.conj(angular) / probe.radial_rabi, 0.0)
        kernel[:, :] = prefactor * values.T
        return kernel

    @staticmethod
    def alpha_from_kernel(rho: np.ndarray, basis: HyperfineBasis, kernel: np.ndarray) -> float:
        g, i = basis.level_slice("g"), basis.level_slice("i")
        return float(np.sum(np.imag(rho[g, i] * kernel)))

    @staticmethod
    def extinction(
        rho: Union[SteadyState, np.ndarray],
        ladder: Union[LadderSpec, HyperfineBasis],
        probe: FieldConfig,
        vapor: VaporConfig,
    ) -> float:
        """
        Extinction coefficient alpha (1/m) from the g-i coherences.

        Pairs the probe does not couple are skipped.
        """
        basis = ladder if isinstance(ladder, HyperfineBasis) else BasisService.enumerate_basis(ladder)
        matrix = rho.rho if isinstance(rho, SteadyState) else np.asarray(rho)
        kernel = SpectraService.extinction_kernel(basis, probe, vapor)
        return SpectraService.alpha_from_kernel(matrix, basis, kernel)

    @staticmethod
    def transmission(alpha, vapor: VaporConfig, negative_tolerance: float = 1e-6):
        """
        Beer-Lambert transmission exp(-alpha * length).

        Raises:
            NumericalConsistencyError: alpha below -negative_tolerance
        """
        values = np.asarray(alpha, dtype=float)
        if np.any(values < -negative_tolerance):
            raise NumericalConsistencyError(f"Negative extinction coefficient {values.min():.3e} 1/m")
        result = np.exp(-np.clip(values, 0.0, None) * vapor.length)
        return float(result) if result.ndim == 0 else result

    @staticmethod
    def velocity_classes(
        vapor: VaporConfig,
        n_points: int,
        cutoff_sigmas: float,
        weights: str = "trapezoid",
        velocity_width: Optional[float] = None,
        steps_per_width: Optional[float] = None,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Velocity nodes and normalized Maxwell-Boltzmann weights along the beams.

        velocity_width is the narrowest feature of the averaged quantity in m/s
        (a linewidth divided by the wavenumber that maps it to velocity). The
        trapezoid mesh is refined past n_points until its step is at most
        velocity_width / steps_per_width; Gauss-Hermite nodes are fixed and only
        warn when under-resolved.

        Raises:
            DomainError: fewer than three points, or an unknown weighting scheme
        """
        if n_points < 3:
            raise DomainError(f"Doppler averaging needs at least 3 velocity points, got {n_points}")
        sigma = vapor.thermal_velocity
        if sigma == 0:
            return np.zeros(1), np.ones(1)
        per_width = engine_settings.doppler_steps_per_width if steps_per_width is None else steps_per_width

        if weights == "gauss":
            nodes, w = hermegauss(n_points)
            velocities = sigma * nodes
        elif weights == "trapezoid":
            count = n_points
            if velocity_width and math.isfinite(velocity_width):
                needed = int(math.ceil(2 * cutoff_sigmas * sigma * per_width / velocity_width)) + 1
                if needed > engine_settings.doppler_max_points:
                    logger.warning(
                        f"⚠️ Velocity mesh capped at {engine_settings.doppler_max_points} points "
                        f"({needed} needed for a {velocity_width:.3g} m/s feature)"
                    )
                    needed = engine_settings.doppler_max_points
                count = max(n_points, needed)
            velocities = np.linspace(-cutoff_sigmas * sigma, cutoff_sigmas * sigma, count)
            step = velocities[1] - velocities[0]
            trapezoid = np.full(count, step)
            trapezoid[0] = trapezoid[-1] = 0.5 * step
            w = trapezoid * np.exp(-0.5 * (velocities / sigma) ** 2)
        else:
            raise DomainError(f"Unknown Doppler weighting '{weights}', use 'trapezoid' or 'gauss'")

        if velocity_width:
            spacing = float(np.max(np.diff(velocities)))
            if spacing > velocity_width:
                logger.warning(
                    f"⚠️ Doppler grid under-resolved: velocity step {spacing:.2f} m/s exceeds "
                    f"feature width {velocity_width:.2f} m/s"
                )
        return velocities, w / w.sum()

    @staticmethod
    def doppler_average(
        model_builder: Callable,
        vapor: VaporConfig,
        n_points: Optional[int] = None,
        cutoff_sigmas: Optional[float] = None,
        weights: Optional[str] = None,
        velocity_width: Optional[float] = None,
        vectorized: bool = False,
    ) -> float:
        """
        Maxwell-Boltzmann average of model_builder(v) over the 1-D velocity distribution.

        model_builder maps a velocity (m/s) to the extinction of that class, or
        with vectorized=True an array of velocities to an array of extinctions;
        per class the probe sees dp - k_p v and the counter-propagating coupling dc + k_c v.
        """
        n_points = engine_settings.doppler_points if n_points is None else n_points
        cutoff_sigmas = engine_settings.doppler_cutoff_sigmas if cutoff_sigmas is None else cutoff_sigmas
        weights = engine_settings.doppler_weights if weights is None else weights
        velocities, w = SpectraService.velocity_classes(vapor, n_points, cutoff_sigmas, weights, velocity_width)
        if vectorized:
            values = np.asarray(model_builder(velocities), dtype=float)
            return float(np.dot(w, values))
        total = 0.0
        for v, weight in zip(velocities, w):
            total += weight * model_builder(float(v))
        return float(total)

    @staticmethod
    def analytic_doppler_average(expansion: PoleExpansion, vapor: VaporConfig) -> float:
        """
        Exact Gaussian average of Im sum r / (v + lambda) through the Faddeeva function.

        For v ~ N(0, sigma^2) and z = -lambda / (sqrt(2) sigma):
        <1/(v + lambda)> = i sqrt(pi/2) w(z) / sigma when Im z > 0, and
        -i sqrt(pi/2) conj(w(conj z)) / sigma when Im z < 0.
        """
        sigma = vapor.thermal_velocity
        if expansion.poles.size == 0:
            return 0.0
        if sigma == 0:
            return float(expansion.evaluate(np.zeros(1))[0])
        z = -expansion.poles / (math.sqrt(2) * sigma)
        upper = z.imag > 0
        mean = np.where(
            upper,
            1j * wofz(np.where(upper, z, 0.0)),
            -1j * np.conj(wofz(np.where(upper, 0.0, np.conj(z)))),
        ) * math.sqrt(math.pi / 2) / sigma
        return float(np.imag(np.sum(expansion.residues * mean)))

    @staticmethod
    def lock_in_correct(raw, reference):
        """
        Subtract the coupling-off baseline.

        Raises:
            DomainError: reference is neither a scalar nor shaped like raw
        """
        raw_values = np.asarray(raw, dtype=float)
        reference_values = np.asarray(reference, dtype=float)
        if reference_values.ndim != 0 and reference_values.shape != raw_values.shape:
            raise DomainError(
                f"Reference shape {reference_values.shape} does not match transmission shape {raw_values.shape}"
            )
        return raw_values - reference_values

    @staticmethod
    def sweep_spectrogram(
        preset: Union[str, LadderSpec],
        rf_rabi: float,
        theta_grid: Sequence[float],
        detuning_grid: Sequence[float],
        vapor: VaporConfig,
        rates: DecayRates,
        coupling_rabi: float = 2 * math.pi * 2e6,
        probe_rabi: Optional[float] = None,
        probe_detuning: float = 0.0,
        rf_detuning: float = 0.0,
        doppler: Optional[DopplerSettings] = None,
        workers: Optional[int] = None,
        dummy_rate_factor: Optional[float] = None,
        probe_polarization: Optional[Polarization] = None,
        coupling_polarization: Optional[Polarization] = None,
        solver: Optional[str] = None,
    ) -> Spectrogram:
        """
        Probe transmission over a (theta, coupling detuning) grid.

        Each theta row is an independent work item: fields at that RF angle,
        probe response per detuning and velocity class, Doppler average,
        Beer-Lambert transmission and lock-in correction against the
        coupling-off reference. solver picks the first-order weak-probe
        response ("linear") or the full steady state ("full").

        Raises:
            DomainError: empty grid or unknown solver
            SolverError: a failed grid point, tagged with its coordinates
        """
        if not len(theta_grid) or not len(detuning_grid):
            raise DomainError("Sweep grids must be non-empty")
        ladder = BasisService.preset(preset) if isinstance(preset, str) else preset
        doppler = DopplerSettings() if doppler is None else doppler
        if probe_rabi is None:
            probe_rabi = engine_settings.probe_rabi_fraction * rates.gamma_i
        factor = engine_settings.dummy_rate_factor if dummy_rate_factor is None else dummy_rate_factor
        solver = engine_settings.sweep_solver if solver is None else solver
        if solver not in SOLVERS:
            raise DomainError(f"Unknown sweep solver '{solver}', use 'linear' or 'full'")

        probe = FieldConfig(polarization=probe_polarization or Polarization.z(), radial_rabi=probe_rabi, detuning=probe_detuning)
        coupling = FieldConfig(polarization=coupling_polarization or Polarization.z(), radial_rabi=coupling_rabi)
        tasks = [
            SpectrogramRowTask(
                ladder=ladder,
                theta_deg=float(theta),
                detunings=[float(d) for d in detuning_grid],
                probe=probe,
                coupling=coupling,
                rf=FieldConfig(
                    polarization=CouplingService.rf_polarization(math.radians(theta)),
                    radial_rabi=rf_rabi,
                    detuning=rf_detuning,
                ),
                vapor=vapor,
                rates=rates,
                doppler=doppler,
                dummy_rate_factor=factor,
                solver=solver,
            )
            for theta in theta_grid
        ]

        pool = PoolManager(workers)
        rows = pool.map_ordered(compute_spectrogram_row, tasks, label="theta rows")

        metadata = {
            "preset": ladder.name,
            "rf_rabi": rf_rabi,
            "coupling_rabi": coupling_rabi,
            "probe_rabi": probe_rabi,
            "probe_detuning": probe_detuning,
            "rf_detuning": rf_detuning,
            "doppler": doppler.model_dump(),
            "rates": rates.model_dump(),
            "vapor_hash": vapor_hash(vapor),
            "solver": solver,
        }
        return Spectrogram(
            theta_axis=[float(t) for t in theta_grid],
            detuning_axis=[float(d) for d in detuning_grid],
            transmission=np.array([r["transmission"] for r in rows]),
            signal=np.array([r["signal"] for r in rows]),
            alpha=np.array([r["alpha"] for r in rows]),
            reference=np.array([r["reference"] for r in rows]),
            metadata=metadata,
        )

    @staticmethod
    def central_cut(spec: Spectrogram) -> Tuple[np.ndarray, np.ndarray]:
        """
        Lock-in signal along the zero coupling-detuning line.

        Raises:
            DomainError: zero detuning is not on the grid
        """
        axis = np.asarray(spec.detuning_axis)
        scale = max(float(np.max(np.abs(axis))), 1.0)
        matches = np.flatnonzero(np.abs(axis) <= 1e-9 * scale)
        if matches.size == 0:
            raise DomainError("Coupling detuning 0 is not on the spectrogram grid")
        column = int(matches[0])
        return np.asarray(spec.theta_axis), np.asarray(spec.signal)[:, column]

    @staticmethod
    def find_spectral_peaks(x: Sequence[float], y: Sequence[float], prominence: Optional[float] = None) -> PeakSet:
        """Local maxima with prominence above a fraction of the global maximum."""
        fraction = engine_settings.peak_prominence if prominence is None else prominence
        values = np.asarray(y, dtype=float)
        positions = np.asarray(x, dtype=float)
        top = float(values.max()) if values.size else 0.0
        if top <= 0:
            return PeakSet(indices=[], positions=[], heights=[], prominences=[])
        indices, properties = find_peaks(values, prominence=fraction * top)
        return PeakSet(
            indices=[int(n) for n in indices],
            positions=[float(positions[n]) for n in indices],
            heights=[float(values[n]) for n in indices],
            prominences=[float(p) for p in properties["prominences"]],
        )

    @staticmethod
    def fit_undulation(theta_deg: Sequence[float], values: Sequence[float]) -> UndulationFit:
        """Least-squares fit of A + B cos(2 theta + phi) with B >= 0."""
        theta = np.radians(np.asarray(theta_deg, dtype=float))
        y = np.asarray(values, dtype=float)
        if theta.size < 3:
            raise DomainError("A sinusoid fit needs at least three angles")
        design = np.column_stack([np.ones_like(theta), np.cos(2 * theta), np.sin(2 * theta)])
        (offset, c, s), *_ = np.linalg.lstsq(design, y, rcond=None)
        residual = y - design @ np.array([offset, c, s])
        amplitude = float(math.hypot(c, s))
        phase = math.degrees(math.atan2(-s, c))
        return UndulationFit(
            offset=float(offset),
            amplitude=amplitude,
            phase_deg=phase,
            rms_residual=float(np.sqrt(np.mean(residual ** 2))),
        )


def vapor_hash(vapor: VaporConfig) -> str:
    payload = json.dumps(vapor.model_dump(), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _extinction_observable(basis: HyperfineBasis, kernel: np.ndarray) -> np.ndarray:
    observable = np.zeros((basis.size, basis.size), dtype=complex)
    observable[basis.level_slice("g"), basis.level_slice("i")] = kernel
    return observable


def _linear_builder(
    response: ProbeResponse, weights: np.ndarray, task: SpectrogramRowTask, coupling_detuning: float, doppler_on: bool
) -> Tuple[Callable, Optional[PoleExpansion]]:
    k_p, k_c = task.vapor.probe_wavenumber, task.vapor.coupling_wavenumber
    dp = task.probe.detuning
    direct = np.vectorize(lambda v: response.value(weights, dp - k_p * v, coupling_detuning + k_c * v), otypes=[float])
    if not doppler_on:
        return direct, None
    try:
        expansion = response.pole_expansion(weights, dp, coupling_detuning, k_p, k_c)
    except SolverError as e:
        logger.warning(f"⚠️ Pole expansion unusable at coupling detuning {coupling_detuning:.6g} rad/s, solving per velocity class: {e.detail}")
        return direct, None
    return expansion.evaluate, expansion


def _full_builder(template: LiouvillianTemplate, kernel: np.ndarray, task: SpectrogramRowTask, coupling_detuning: float) -> Callable:
    k_p, k_c = task.vapor.probe_wavenumber, task.vapor.coupling_wavenumber
    dp = task.probe.detuning

    def alpha(v: float) -> float:
        steady = template.steady_state(dp - k_p * v, coupling_detuning + k_c * v)
        return SpectraService.alpha_from_kernel(steady.rho, template.basis, kernel)

    return np.vectorize(alpha, otypes=[float])


def _mesh_width(expansions: Sequence[PoleExpansion], task: SpectrogramRowTask) -> Optional[float]:
    """Narrowest velocity-space linewidth across a row, the probe line when no poles are known."""
    widths = [e.narrowest() for e in expansions]
    finite = [w for w in widths if math.isfinite(w) and w > 0]
    if finite:
        return min(finite)
    if task.rates.gamma_i > 0:
        return 0.5 * task.rates.gamma_i / task.vapor.probe_wavenumber
    return None


def compute_spectrogram_row(task: SpectrogramRowTask) -> Dict[str, List[float]]:
    """Extinction, transmission and lock-in signal across the detuning grid for one RF angle."""
    solver = task.solver
    if solver == LINEAR and not task.rates.ground_relaxation:
        logger.warning("⚠️ No ground relaxation: the probe-off state is not unique, solving the full model")
        solver = FULL
    doppler_on = task.doppler.enabled and task.vapor.thermal_velocity > 0
    points = [0.0] + list(task.detunings)

    detuning = 0.0
    try:
        basis = BasisService.enumerate_basis(task.ladder)
        template = LiouvillianTemplate(basis, task.probe, task.coupling, task.rf, task.rates, task.dummy_rate_factor)
        reference_template = LiouvillianTemplate(
            basis, task.probe, task.coupling.with_rabi(0.0), task.rf, task.rates, task.dummy_rate_factor
        )
        kernel = SpectraService.extinction_kernel(basis, task.probe, task.vapor)

        builders: List[Callable] = []
        expansions: List[PoleExpansion] = []
        if solver == LINEAR:
            reference, response = ProbeResponse(reference_template), ProbeResponse(template)
            weights = response.weights(_extinction_observable(basis, kernel))
            # The first point is the coupling-off reference
            for n, detuning in enumerate(points):
                builder, expansion = _linear_builder(reference if n == 0 else response, weights, task, detuning, doppler_on)
                builders.append(builder)
                if expansion is not None:
                    expansions.append(expansion)
        else:
            builders = [
                _full_builder(reference_template if n == 0 else template, kernel, task, d) for n, d in enumerate(points)
            ]

        width = _mesh_width(expansions, task) if doppler_on else None
        values = []
        for detuning, builder in zip(points, builders):
            if doppler_on:
                values.append(
                    SpectraService.doppler_average(
                        builder,
                        task.vapor,
                        task.doppler.n_points,
                        task.doppler.cutoff_sigmas,
                        task.doppler.weights,
                        velocity_width=width,
                        vectorized=True,
                    )
                )
            else:
                values.append(float(builder(np.zeros(1))[0]))
    except SolverError as e:
        tagged = e.at(task.theta_deg, detuning)
        logger.error(f"❌ Steady-state solve failed: {tagged.detail} | diagnostics: {tagged.diagnostics}")
        raise tagged

    reference_alpha, alphas = values[0], values[1:]
    transmission = SpectraService.transmission(np.array(alphas), task.vapor)
    reference = SpectraService.transmission(reference_alpha, task.vapor)
    signal = SpectraService.lock_in_correct(transmission, reference)
    logger.debug(f"theta={task.theta_deg:g} deg done ({solver}), reference transmission {reference:.6f}")
    return {
        "alpha": [float(a) for a in alphas],
        "transmission": [float(t) for t in transmission],
        "signal": [float(s) for s in signal],
        "reference": float(reference),
    }
