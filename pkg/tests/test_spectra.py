import logging
import math
import time

import numpy as np
import pytest

from rydpol.config.engine_config import engine_settings
from rydpol.exceptions import DomainError, NumericalConsistencyError, SolverError
from rydpol.models.fields import FieldConfig
from rydpol.models.master import DecayRates, PoleExpansion
from rydpol.models.spectra import DopplerSettings, Spectrogram, VaporConfig
from rydpol.api.figure_commands import central_to_side_ratio
from rydpol.services.basis_service import BasisService
from rydpol.services.dressed_service import DressedService
from rydpol.services.master_service import LiouvillianTemplate, ProbeResponse
from rydpol.services.spectra_service import NO_DOPPLER, SpectraService, vapor_hash

from conftest import MHZ, rf_at

DETUNINGS = np.linspace(-8, 8, 161) * MHZ
STEP = 0.1 * MHZ


@pytest.fixture
def thin_vapor():
    """Cold, optically thin vapor so the lock-in signal stays linear in the extinction."""
    return VaporConfig(temperature=0.0, density=1e14)


def _radial_for(preset, pair_rabi):
    return pair_rabi / DressedService.pi_element_scale(BasisService.preset(preset))


def _sweep(preset, thetas, vapor, rates, rf_rabi=10 * MHZ, detunings=DETUNINGS, doppler=NO_DOPPLER, solver=None):
    return SpectraService.sweep_spectrogram(
        preset, rf_rabi, thetas, detunings, vapor, rates, doppler=doppler, workers=1, solver=solver
    )


class TestVelocityClasses:
    def test_cold_vapor_is_a_single_class(self, cold_vapor):
        velocities, weights = SpectraService.velocity_classes(cold_vapor, 41, 4.0)
        assert velocities.tolist() == [0.0]
        assert weights.tolist() == [1.0]

    def test_trapezoid_weights(self):
        vapor = VaporConfig()
        velocities, weights = SpectraService.velocity_classes(vapor, 41, 4.0)
        assert len(velocities) == 41
        assert velocities[-1] == pytest.approx(4.0 * vapor.thermal_velocity)
        assert weights.sum() == pytest.approx(1.0)
        np.testing.assert_allclose(weights, weights[::-1])
        variance = np.sum(weights * velocities ** 2)
        assert variance == pytest.approx(vapor.thermal_velocity ** 2, rel=1e-2)

    def test_gauss_hermite_moments_are_exact(self):
        vapor = VaporConfig(temperature=350.0)
        velocities, weights = SpectraService.velocity_classes(vapor, 9, 4.0, weights="gauss")
        sigma = vapor.thermal_velocity
        assert np.sum(weights * velocities) == pytest.approx(0.0, abs=1e-12 * sigma)
        assert np.sum(weights * velocities ** 2) == pytest.approx(sigma ** 2, rel=1e-12)
        assert np.sum(weights * velocities ** 4) == pytest.approx(3 * sigma ** 4, rel=1e-12)

    def test_invalid_settings(self):
        with pytest.raises(DomainError):
            SpectraService.velocity_classes(VaporConfig(), 2, 4.0)
        with pytest.raises(DomainError):
            SpectraService.velocity_classes(VaporConfig(), 11, 4.0, weights="simpson")

    def test_trapezoid_mesh_refines_to_the_feature_width(self):
        vapor = VaporConfig()
        velocities, weights = SpectraService.velocity_classes(vapor, 41, 4.0, velocity_width=2.0)
        assert len(velocities) > 41
        assert np.max(np.diff(velocities)) <= 1.0 + 1e-9
        assert weights.sum() == pytest.approx(1.0)
        assert velocities[-1] == pytest.approx(4.0 * vapor.thermal_velocity)

    def test_wide_features_keep_the_requested_count(self):
        velocities, _ = SpectraService.velocity_classes(VaporConfig(), 41, 4.0, velocity_width=1e4)
        assert len(velocities) == 41

    def test_mesh_cap(self, monkeypatch, caplog):
        monkeypatch.setattr(engine_settings, "doppler_max_points", 101)
        with caplog.at_level(logging.WARNING, logger="rydpol.spectra"):
            velocities, _ = SpectraService.velocity_classes(VaporConfig(), 41, 4.0, velocity_width=0.1)
        assert len(velocities) == 101
        assert "capped" in caplog.text
        assert "under-resolved" in caplog.text

    def test_under_resolved_gauss_nodes_warn(self, caplog):
        with caplog.at_level(logging.WARNING, logger="rydpol.spectra"):
            velocities, _ = SpectraService.velocity_classes(VaporConfig(), 5, 4.0, weights="gauss", velocity_width=4.7)
        assert len(velocities) == 5
        assert "under-resolved" in caplog.text

    def test_vectorized_average(self):
        vapor = VaporConfig()
        sigma = vapor.thermal_velocity
        quadratic = SpectraService.doppler_average(lambda v: v * v, vapor, 7, 4.0, weights="gauss", vectorized=True)
        assert quadratic == pytest.approx(sigma ** 2, rel=1e-12)

    @pytest.mark.parametrize("pole", [5j, -3j, 40.0 + 5j, -120.0 - 0.8j])
    def test_analytic_average_of_one_pole(self, pole):
        vapor = VaporConfig()
        expansion = PoleExpansion(residues=np.array([1.0 + 0.3j]), poles=np.array([pole]))
        width = abs(pole.imag)
        quadrature = SpectraService.doppler_average(expansion.evaluate, vapor, velocity_width=width, vectorized=True)
        analytic = SpectraService.analytic_doppler_average(expansion, vapor)
        assert quadrature == pytest.approx(analytic, rel=1e-3)

    def test_analytic_average_limits(self, cold_vapor):
        expansion = PoleExpansion(residues=np.array([2.0]), poles=np.array([0.5j]))
        assert SpectraService.analytic_doppler_average(expansion, cold_vapor) == pytest.approx(-4.0)
        empty = PoleExpansion(residues=np.zeros(0, dtype=complex), poles=np.zeros(0, dtype=complex))
        assert SpectraService.analytic_doppler_average(empty, VaporConfig()) == 0.0

    def test_doppler_average_of_moments(self):
        vapor = VaporConfig()
        sigma = vapor.thermal_velocity
        assert SpectraService.doppler_average(lambda v: 2.5, vapor, 21, 4.0) == pytest.approx(2.5)
        assert SpectraService.doppler_average(lambda v: v, vapor, 21, 4.0) == pytest.approx(0.0, abs=1e-9 * sigma)
        quadratic = SpectraService.doppler_average(lambda v: v * v, vapor, 7, 4.0, weights="gauss")
        assert quadratic == pytest.approx(sigma ** 2, rel=1e-12)


class TestTransmissionAndLockIn:
    def test_beer_lambert(self):
        vapor = VaporConfig(length=0.02)
        assert SpectraService.transmission(50.0, vapor) == pytest.approx(math.exp(-1.0))
        values = SpectraService.transmission([0.0, 100.0], vapor)
        np.testing.assert_allclose(values, [1.0, math.exp(-2.0)])

    def test_negative_extinction(self):
        vapor = VaporConfig()
        assert SpectraService.transmission(-1e-9, vapor) == 1.0
        with pytest.raises(NumericalConsistencyError):
            SpectraService.transmission([1.0, -0.5], vapor)

    def test_lock_in(self):
        np.testing.assert_allclose(SpectraService.lock_in_correct([0.9, 0.7], 0.6), [0.3, 0.1])
        np.testing.assert_allclose(SpectraService.lock_in_correct([0.9, 0.7], [0.5, 0.5]), [0.4, 0.2])
        with pytest.raises(DomainError):
            SpectraService.lock_in_correct([0.9, 0.7, 0.1], [0.5, 0.5])


class TestExtinction:
    def test_probe_off_gives_zero_kernel(self, model_atom):
        basis = BasisService.enumerate_basis(model_atom)
        kernel = SpectraService.extinction_kernel(basis, FieldConfig(radial_rabi=0.0), VaporConfig())
        assert kernel.shape == (3, 1)
        assert not np.any(kernel)

    def test_resonant_absorption_is_symmetric(self, model_atom, rates, weak_probe, thin_vapor):
        template = LiouvillianTemplate(model_atom, weak_probe, FieldConfig(), rf_at(0, rabi=0.0), rates)

        def alpha(dp):
            return SpectraService.extinction(template.steady_state(dp, 0.0), template.basis, weak_probe, thin_vapor)

        on_resonance = alpha(0.0)
        assert on_resonance > 0
        assert alpha(3 * MHZ) == pytest.approx(alpha(-3 * MHZ), rel=1e-8)
        assert alpha(3 * MHZ) < on_resonance

    def test_linear_in_density(self, model_atom, rates, weak_probe):
        template = LiouvillianTemplate(model_atom, weak_probe, FieldConfig(), rf_at(0, rabi=0.0), rates)
        rho = template.steady_state(0.0, 0.0).rho
        dilute = SpectraService.extinction(rho, model_atom, weak_probe, VaporConfig(density=1e14))
        dense = SpectraService.extinction(rho, model_atom, weak_probe, VaporConfig(density=4e14))
        assert dense == pytest.approx(4 * dilute, rel=1e-12)


class TestAnalysis:
    def test_fit_undulation_recovers_parameters(self):
        theta = np.arange(0, 360, 15.0)
        values = 0.2 + 0.05 * np.cos(np.radians(2 * theta + 40.0))
        fit = SpectraService.fit_undulation(theta, values)
        assert fit.offset == pytest.approx(0.2)
        assert fit.amplitude == pytest.approx(0.05)
        assert fit.phase_deg == pytest.approx(40.0)
        assert fit.relative_residual < 1e-10

    def test_fit_needs_three_angles(self):
        with pytest.raises(DomainError):
            SpectraService.fit_undulation([0.0, 90.0], [1.0, 2.0])

    def test_find_spectral_peaks(self):
        x = np.linspace(-10, 10, 401)
        y = np.exp(-((x - 3) ** 2)) + 0.4 * np.exp(-((x + 4) ** 2)) + 0.01 * np.exp(-((x - 8) ** 2) / 0.01)
        peaks = SpectraService.find_spectral_peaks(x, y)
        assert peaks.count == 2
        assert peaks.positions == pytest.approx([-4.0, 3.0], abs=0.05)
        assert SpectraService.find_spectral_peaks(x, y, prominence=0.005).count == 3

    def test_no_peaks_in_a_non_positive_trace(self):
        assert SpectraService.find_spectral_peaks([0, 1, 2], [-1.0, -0.5, -1.0]).count == 0

    def test_central_cut(self):
        spec = Spectrogram(
            theta_axis=[0.0, 90.0],
            detuning_axis=[-1.0, 0.0, 1.0],
            transmission=np.ones((2, 3)),
            signal=np.array([[0.1, 0.2, 0.3], [0.4, 0.5, 0.6]]),
            alpha=np.zeros((2, 3)),
            reference=np.ones(2),
        )
        theta, signal = SpectraService.central_cut(spec)
        assert theta.tolist() == [0.0, 90.0]
        assert signal.tolist() == [0.2, 0.5]
        off_grid = spec.model_copy(update={"detuning_axis": [-1.0, 1.0, 2.0]})
        with pytest.raises(DomainError):
            SpectraService.central_cut(off_grid)

    def test_vapor_hash_tracks_content(self):
        assert vapor_hash(VaporConfig()) == vapor_hash(VaporConfig())
        assert vapor_hash(VaporConfig()) != vapor_hash(VaporConfig(length=0.02))


class TestSweep:
    def test_model_atom_polarization_triplet(self, model_atom, rates, thin_vapor):
        spec = _sweep(model_atom, [0.0, 45.0, 90.0], thin_vapor, rates)
        assert spec.shape == (3, 161)
        np.testing.assert_allclose(spec.signal, spec.transmission - spec.reference[:, None], atol=1e-15)

        half_splitting = 10 * MHZ / math.sqrt(3) / 2
        counts = []
        for row, theta in enumerate(spec.theta_axis):
            peaks = SpectraService.find_spectral_peaks(spec.detuning_axis, spec.signal[row])
            counts.append(peaks.count)
            if theta == 0.0:
                assert peaks.positions[0] == pytest.approx(-peaks.positions[1], abs=1.01 * STEP)
                assert abs(peaks.positions[1]) == pytest.approx(half_splitting, abs=0.3 * MHZ)
            if theta == 90.0:
                assert abs(peaks.positions[0]) <= STEP
        assert counts == [2, 3, 1]

    def test_side_peaks_do_not_move_with_angle(self, model_atom, rates, thin_vapor):
        spec = _sweep(model_atom, [30.0, 60.0], thin_vapor, rates)
        first, second = (SpectraService.find_spectral_peaks(spec.detuning_axis, row) for row in spec.signal)
        assert first.count == second.count == 3
        np.testing.assert_allclose(first.positions, second.positions, atol=1.01 * STEP)

    def test_metadata(self, model_atom, rates, thin_vapor):
        spec = _sweep(model_atom, [0.0], thin_vapor, rates, detunings=[0.0, 1 * MHZ])
        assert spec.metadata["preset"] == "model_atom"
        assert spec.metadata["doppler"]["enabled"] is False
        assert spec.metadata["probe_rabi"] == pytest.approx(0.05 * rates.gamma_i)
        assert spec.metadata["vapor_hash"] == vapor_hash(thin_vapor)

    def test_empty_grid(self, rates, thin_vapor):
        with pytest.raises(DomainError):
            _sweep("model_atom", [], thin_vapor, rates)

    def test_solver_failure_is_tagged(self, thin_vapor):
        undamped = DecayRates(
            gamma_i=0.0,
            gamma_transit=0.0,
            gamma_collision=0.0,
            gamma_r1_rad=0.0,
            gamma_r2_rad=0.0,
            ground_relaxation=False,
        )
        with pytest.raises(SolverError) as excinfo:
            _sweep("model_atom", [15.0], thin_vapor, undamped, detunings=[0.0])
        assert excinfo.value.grid_point[0] == 15.0
        assert "theta=15" in str(excinfo.value)

    def test_central_to_side_ratio_grows_towards_ninety_degrees(self, model_atom, rates, thin_vapor):
        spec = _sweep(model_atom, [45.0, 55.0, 65.0], thin_vapor, rates)
        ratios = [central_to_side_ratio(spec.detuning_axis, row) for row in spec.signal]
        assert None not in ratios
        assert ratios[0] < ratios[1] < ratios[2]

    def test_central_cuts_undulate_out_of_phase(self, rates, thin_vapor):
        thetas = np.arange(0.0, 181.0, 15.0)
        phases = []
        for preset in ("type1", "type2"):
            spec = _sweep(preset, thetas, thin_vapor, rates, rf_rabi=_radial_for(preset, 12 * MHZ), detunings=[0.0])
            theta, signal = SpectraService.central_cut(spec)
            fit = SpectraService.fit_undulation(theta, signal)
            assert fit.amplitude > 0
            assert fit.relative_residual < 0.05
            phases.append(fit.phase_deg)
        assert abs((phases[0] - phases[1]) % 360.0 - 180.0) < 10.0

    @pytest.mark.slow
    def test_type1_four_peaks_without_central_peak(self, rates, thin_vapor):
        pair = 30 * MHZ
        detunings = np.linspace(-22.5, 22.5, 451) * MHZ
        spec = _sweep("type1", [0.0], thin_vapor, rates, rf_rabi=_radial_for("type1", pair), detunings=detunings)
        peaks = SpectraService.find_spectral_peaks(spec.detuning_axis, spec.signal[0])
        assert peaks.count == 4
        positions = peaks.positions
        assert positions[0] == pytest.approx(-positions[3], abs=1.01 * STEP)
        assert positions[1] == pytest.approx(-positions[2], abs=1.01 * STEP)
        assert positions[2] / positions[3] == pytest.approx(math.sqrt(2 / 3), rel=0.02)
        assert positions[3] == pytest.approx(pair / 2, abs=2 * STEP)
        _, central = SpectraService.central_cut(spec)
        assert central[0] < 0.1 * spec.signal.max()

    @pytest.mark.slow
    def test_hyperfine_central_peak_contrast(self, rates, thin_vapor):
        detunings = np.linspace(-20, 20, 201) * MHZ
        type1 = _sweep("type1", [0.0], thin_vapor, rates, rf_rabi=_radial_for("type1", 12 * MHZ), detunings=detunings)
        type2 = _sweep("type2", [0.0], thin_vapor, rates, rf_rabi=_radial_for("type2", 12 * MHZ), detunings=detunings)
        _, central1 = SpectraService.central_cut(type1)
        _, central2 = SpectraService.central_cut(type2)
        assert central1[0] < 0.1 * type1.signal.max()
        assert central2[0] > 0.5 * type2.signal.max()

    def test_peaks_are_rigid_across_all_angles(self, rates, thin_vapor):
        spec = _sweep("type2", np.arange(0.0, 180.0, 15.0), thin_vapor, rates, rf_rabi=_radial_for("type2", 12 * MHZ))
        positions = sorted(
            p for row in spec.signal for p in SpectraService.find_spectral_peaks(spec.detuning_axis, row).positions
        )
        assert positions
        clusters = [[positions[0]]]
        for p in positions[1:]:
            if p - clusters[-1][-1] > 5 * STEP:
                clusters.append([p])
            else:
                clusters[-1].append(p)
        for cluster in clusters:
            assert max(cluster) - min(cluster) <= 1.01 * STEP

    @pytest.mark.slow
    def test_central_peak_complementarity_with_doppler(self, rates):
        warm = VaporConfig(density=1e14)
        detunings = np.linspace(-20, 20, 201) * MHZ
        center = 100
        rows = {}
        for preset in ("type1", "type2"):
            spec = _sweep(
                preset,
                [0.0, 90.0],
                warm,
                rates,
                rf_rabi=_radial_for(preset, 12 * MHZ),
                detunings=detunings,
                doppler=DopplerSettings(),
            )
            rows[preset] = spec.signal
        type1, type2 = rows["type1"], rows["type2"]
        assert type1[0, center] < 0.1 * type1[0].max()
        assert int(np.argmax(type2[0])) == pytest.approx(center, abs=1)
        assert center in SpectraService.find_spectral_peaks(detunings, type1[1]).indices
        assert type2[1, center] < type2[0, center]


class TestSweepInvariants:
    GRID = np.linspace(-8, 8, 41) * MHZ

    @pytest.mark.parametrize("preset", ["model_atom", "type2"])
    def test_half_turn_periodicity(self, preset, rates, thin_vapor):
        spec = _sweep(preset, [20.0, 200.0], thin_vapor, rates, detunings=self.GRID)
        scale = np.max(np.abs(spec.alpha))
        np.testing.assert_allclose(spec.alpha[0], spec.alpha[1], rtol=0, atol=1e-9 * scale)
        np.testing.assert_allclose(spec.signal[0], spec.signal[1], rtol=0, atol=1e-12)

    @pytest.mark.parametrize("preset", ["model_atom", "type2"])
    def test_reflection_about_the_optical_axis(self, preset, rates, thin_vapor):
        spec = _sweep(preset, [35.0, -35.0], thin_vapor, rates, detunings=self.GRID)
        scale = np.max(np.abs(spec.alpha))
        np.testing.assert_allclose(spec.alpha[0], spec.alpha[1], rtol=0, atol=1e-9 * scale)

    @pytest.mark.parametrize("theta", [0.0, 45.0])
    def test_doppler_averaged_spectrum_is_even_in_coupling_detuning(self, theta, rates):
        warm = VaporConfig(density=1e14)
        detunings = np.array([-3.0, -1.0, 0.0, 1.0, 3.0]) * MHZ
        spec = _sweep("model_atom", [theta], warm, rates, detunings=detunings, doppler=DopplerSettings())
        alpha = spec.alpha[0]
        assert alpha.min() > 0
        np.testing.assert_allclose(alpha, alpha[::-1], rtol=1e-6)

    def test_unknown_solver(self, rates, thin_vapor):
        with pytest.raises(DomainError):
            _sweep("model_atom", [0.0], thin_vapor, rates, detunings=[0.0], solver="exact")

    def test_linear_and_full_solvers_agree_for_a_weak_probe(self, rates, thin_vapor):
        linear = _sweep("model_atom", [30.0], thin_vapor, rates, detunings=self.GRID, solver="linear")
        full = _sweep("model_atom", [30.0], thin_vapor, rates, detunings=self.GRID, solver="full")
        scale = np.max(np.abs(full.alpha))
        np.testing.assert_allclose(linear.alpha, full.alpha, rtol=0, atol=1e-2 * scale)
        assert linear.metadata["solver"] == "linear"
        assert full.metadata["solver"] == "full"


class TestDopplerConvergence:
    """Warm-vapor averages against the exact Gaussian average of the pole expansion."""

    @pytest.fixture
    def warm(self):
        return VaporConfig(density=1e14)

    def _expansion(self, preset, theta, coupling_detuning, rates, vapor):
        ladder = BasisService.preset(preset)
        probe = FieldConfig(radial_rabi=0.05 * rates.gamma_i)
        template = LiouvillianTemplate(ladder, probe, FieldConfig(radial_rabi=2 * MHZ), rf_at(theta), rates)
        response = ProbeResponse(template)
        kernel = SpectraService.extinction_kernel(template.basis, probe, vapor)
        observable = np.zeros((template.basis.size, template.basis.size), dtype=complex)
        observable[template.basis.level_slice("g"), template.basis.level_slice("i")] = kernel
        return response.pole_expansion(
            response.weights(observable), 0.0, coupling_detuning, vapor.probe_wavenumber, vapor.coupling_wavenumber
        )

    @pytest.mark.parametrize("preset, theta", [("model_atom", 45.0), ("type1", 0.0), ("type2", 90.0)])
    @pytest.mark.parametrize("coupling_detuning", [0.0, 3 * MHZ])
    def test_refined_mesh_matches_the_exact_average(self, preset, theta, coupling_detuning, rates, warm):
        expansion = self._expansion(preset, theta, coupling_detuning, rates, warm)
        exact = SpectraService.analytic_doppler_average(expansion, warm)
        quadrature = SpectraService.doppler_average(
            expansion.evaluate, warm, velocity_width=expansion.narrowest(), vectorized=True
        )
        assert exact > 0
        assert quadrature == pytest.approx(exact, rel=1e-3)

    def test_coarse_mesh_alone_aliases(self, rates, warm):
        expansion = self._expansion("model_atom", 45.0, 0.0, rates, warm)
        exact = SpectraService.analytic_doppler_average(expansion, warm)
        coarse = SpectraService.doppler_average(expansion.evaluate, warm, 41, 4.0, vectorized=True)
        assert abs(coarse - exact) > 0.1 * exact

    def test_doubling_points_changes_little(self, rates, warm):
        detunings = [0.0, 3 * MHZ]
        default = _sweep("model_atom", [45.0], warm, rates, detunings=detunings, doppler=DopplerSettings(n_points=41))
        doubled = _sweep("model_atom", [45.0], warm, rates, detunings=detunings, doppler=DopplerSettings(n_points=82))
        np.testing.assert_allclose(doubled.alpha, default.alpha, rtol=1e-3)

    def test_doubling_mesh_density_changes_little(self, rates, warm, monkeypatch):
        detunings = [0.0, 3 * MHZ]
        default = _sweep("model_atom", [45.0], warm, rates, detunings=detunings, doppler=DopplerSettings())
        monkeypatch.setattr(engine_settings, "doppler_steps_per_width", 2 * engine_settings.doppler_steps_per_width)
        finer = _sweep("model_atom", [45.0], warm, rates, detunings=detunings, doppler=DopplerSettings())
        np.testing.assert_allclose(finer.alpha, default.alpha, rtol=1e-3)

    def test_sweep_row_matches_the_exact_average(self, rates, warm):
        spec = _sweep("model_atom", [45.0], warm, rates, detunings=[0.0], doppler=DopplerSettings())
        exact = SpectraService.analytic_doppler_average(self._expansion("model_atom", 45.0, 0.0, rates, warm), warm)
        assert spec.alpha[0, 0] == pytest.approx(exact, rel=1e-3)

    @pytest.mark.slow
    def test_warm_type1_row_fits_the_spectrogram_budget(self, rates):
        # 72 rows across 8 workers within 10 minutes leaves 66 s per row
        detunings = np.linspace(-20, 20, 201) * MHZ
        started = time.perf_counter()
        spec = _sweep(
            "type1", [45.0], VaporConfig(density=1e14), rates,
            rf_rabi=_radial_for("type1", 12 * MHZ), detunings=detunings, doppler=DopplerSettings(),
        )
        elapsed = time.perf_counter() - started
        assert np.all(np.isfinite(spec.alpha))
        assert elapsed < 60.0
