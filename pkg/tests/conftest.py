import math

import pytest

from rydpol.models.fields import FieldConfig, Polarization
from rydpol.models.master import DecayRates
from rydpol.models.spectra import VaporConfig
from rydpol.services.basis_service import BasisService
from rydpol.services.verify_service import truncated_hyperfine_ladder

MHZ = 2 * math.pi * 1e6


@pytest.fixture(scope="session")
def type1():
    return BasisService.preset("type1")


@pytest.fixture(scope="session")
def type2():
    return BasisService.preset("type2")


@pytest.fixture(scope="session")
def model_atom():
    return BasisService.preset("model_atom")


@pytest.fixture(scope="session")
def truncated():
    return truncated_hyperfine_ladder()


@pytest.fixture
def rates():
    return DecayRates(
        gamma_transit=0.2 * MHZ,
        gamma_collision=0.2 * MHZ,
        gamma_r1_rad=0.01 * MHZ,
        gamma_r2_rad=0.01 * MHZ,
    )


@pytest.fixture
def fast_rates():
    """Large incoherent rates so that dynamics settle within microseconds."""
    return DecayRates(
        gamma_transit=0.5 * MHZ,
        gamma_collision=0.5 * MHZ,
        gamma_r1_rad=0.1 * MHZ,
        gamma_r2_rad=0.1 * MHZ,
    )


@pytest.fixture
def cold_vapor():
    return VaporConfig(temperature=0.0)


@pytest.fixture
def weak_probe():
    return FieldConfig(radial_rabi=0.3 * MHZ)


@pytest.fixture
def coupling():
    return FieldConfig(radial_rabi=2 * MHZ)


def rf_at(theta_deg: float, rabi: float = 10 * MHZ, detuning: float = 0.0) -> FieldConfig:
    return FieldConfig(polarization=Polarization.linear(math.radians(theta_deg)), radial_rabi=rabi, detuning=detuning)
