import json
import math

import pytest

from rydpol.exceptions import ConfigError, DomainError
from rydpol.models.scenario import ScenarioConfig
from rydpol.models.units import parse_angle_grid, parse_detuning_grid, parse_frequency

TWO_PI = 2 * math.pi


class TestParseFrequency:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("2pi*10MHz", TWO_PI * 10e6),
            ("2π×5 MHz", TWO_PI * 5e6),
            ("10 MHz", TWO_PI * 10e6),
            ("-2pi*1.5MHz", -TWO_PI * 1.5e6),
            ("2pi*3e6", TWO_PI * 3e6),
            ("6.3e7 rad/s", 6.3e7),
            ("1.2Mrad/s", 1.2e6),
            ("400 kHz", TWO_PI * 4e5),
        ],
    )
    def test_tagged_strings(self, text, expected):
        assert parse_frequency(text) == pytest.approx(expected)

    def test_bare_numbers_are_rad_per_second(self):
        assert parse_frequency(1234.5) == 1234.5
        assert parse_frequency("1234.5") == 1234.5

    @pytest.mark.parametrize("text", ["ten MHz", "5 M", "3 THz/s", ""])
    def test_rejects_garbage(self, text):
        with pytest.raises(DomainError):
            parse_frequency(text)


class TestGrids:
    def test_angle_range_is_inclusive(self):
        assert parse_angle_grid("0:90:45") == [0.0, 45.0, 90.0]
        assert len(parse_angle_grid("0:355:5")) == 72

    def test_angle_lists(self):
        assert parse_angle_grid("0, 30,60") == [0.0, 30.0, 60.0]
        assert parse_angle_grid(15) == [15.0]

    def test_bad_angle_grids(self):
        with pytest.raises(DomainError):
            parse_angle_grid("0:90:0")
        with pytest.raises(DomainError):
            parse_angle_grid("0:90")

    def test_detuning_range_counts_points(self):
        grid = parse_detuning_grid("-2pi*10MHz:2pi*10MHz:5")
        assert len(grid) == 5
        assert grid[0] == pytest.approx(-TWO_PI * 10e6)
        assert grid[2] == pytest.approx(0.0, abs=1e-6)

    def test_detuning_lists(self):
        assert parse_detuning_grid(["1 MHz", 0.0]) == [pytest.approx(TWO_PI * 1e6), 0.0]
        with pytest.raises(DomainError):
            parse_detuning_grid("0:1:many")


class TestScenarioConfig:
    def test_defaults(self):
        scenario = ScenarioConfig()
        assert scenario.preset == "type1"
        assert scenario.drive.rf_rabi == pytest.approx(TWO_PI * 10e6)
        assert len(scenario.sweep.theta_grid()) == 72
        assert scenario.doppler.enabled

    def test_tagged_values_are_converted(self):
        scenario = ScenarioConfig.from_dict({"drive": {"rf_rabi": "2pi*20MHz"}, "rates": {"gamma_transit": "100 kHz"}})
        assert scenario.drive.rf_rabi == pytest.approx(TWO_PI * 20e6)
        assert scenario.rates.to_decay_rates().gamma_transit == pytest.approx(TWO_PI * 1e5)

    def test_errors_name_the_key_path(self):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"drive": {"rf_rabi": -1.0}, "doppler": {"n_points": 2}})
        message = str(excinfo.value)
        assert "drive.rf_rabi" in message
        assert "doppler.n_points" in message

    def test_unknown_keys_and_presets(self):
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"drive": {"rf_power": 1.0}})
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"preset": "cesium"})
        assert "model_atom" in str(excinfo.value)

    def test_polarization_forms(self):
        scenario = ScenarioConfig.from_dict(
            {"drive": {"probe_polarization": {"vector": ["0.70710678118654752", "0.70710678118654752j", 0]}}}
        )
        vector = scenario.probe_field().polarization.vector
        assert abs(vector[1]) == pytest.approx(1 / math.sqrt(2))
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"drive": {"coupling_polarization": {"vector": [1, 1, 0]}}})
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict({"drive": {"coupling_polarization": {"theta_deg": 10, "vector": [0, 0, 1]}}})

    @pytest.mark.parametrize("vector", [[1, 1, 0], [0, 0, 0], [0, 0, 1.001], ["0.6", "0.6j", 0]])
    def test_unnormalized_polarization_is_rejected(self, vector):
        with pytest.raises(ConfigError) as excinfo:
            ScenarioConfig.from_dict({"drive": {"coupling_polarization": {"vector": vector}}})
        assert "unit norm" in str(excinfo.value)

    def test_unit_vector_is_kept(self):
        scenario = ScenarioConfig.from_dict({"drive": {"coupling_polarization": {"vector": ["0.6", 0, "0.8j"]}}})
        vector = scenario.coupling_field().polarization.vector
        assert vector[0] == pytest.approx(0.6)
        assert vector[2] == pytest.approx(0.8j)

    def test_default_probe_is_weak(self):
        scenario = ScenarioConfig()
        assert scenario.probe_field().radial_rabi == pytest.approx(0.05 * scenario.rates.gamma_i)

    def test_rf_field_angle(self):
        rf = ScenarioConfig().rf_field(90.0)
        assert abs(rf.polarization.ez) < 1e-15
        assert rf.polarization.ey == pytest.approx(1.0)

    def test_default_detuning_grid_spans_the_splitting(self):
        grid = ScenarioConfig().sweep.detuning_grid(TWO_PI * 5e6)
        assert len(grid) == 201
        assert grid[-1] == pytest.approx(4 * TWO_PI * 5e6)

    def test_echo_round_trips_through_a_file(self, tmp_path):
        scenario = ScenarioConfig.from_dict({"preset": "type2", "sweep": {"theta": "0:90:30"}, "workers": 2})
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(scenario.echo()))
        assert ScenarioConfig.load(path) == scenario

    def test_unreadable_files(self, tmp_path):
        with pytest.raises(ConfigError):
            ScenarioConfig.load(tmp_path / "missing.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json")
        with pytest.raises(ConfigError):
            ScenarioConfig.load(broken)
