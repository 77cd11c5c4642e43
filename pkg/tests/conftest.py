"""Shared fixtures: small geometries and coarse quadrature settings.

Unit tests run at deliberately coarse grids (seconds, not minutes); the
acceptance suite in test_acceptance.py carries its own tuned settings.
"""

import numpy as np
import pytest

from otecasimir.geometry import GratingGeometry
from otecasimir.materials import OscillatorModel, get_material
from otecasimir.neqforce import ThermalState
from otecasimir.results import QuadratureSpec


@pytest.fixture(scope="session")
def silica():
    return get_material("silica-model")


@pytest.fixture(scope="session")
def silicon():
    return get_material("silicon-model")


@pytest.fixture(scope="session")
def lossless4():
    return OscillatorModel(name="eps4", eps_inf=4.0)


@pytest.fixture
def grating1(silica):
    return GratingGeometry(
        period=1.0e-6, depth=0.5e-6, thickness=1.0e-6, filling=0.5, ridge=silica
    )


@pytest.fixture
def grating2(silicon):
    return GratingGeometry(
        period=1.0e-6, depth=0.3e-6, thickness=None, filling=0.4, ridge=silicon
    )


@pytest.fixture
def thermal_neq():
    return ThermalState(200.0, 400.0, 10.0)


@pytest.fixture
def thermal_eq():
    return ThermalState(300.0, 300.0, 300.0)


@pytest.fixture
def coarse_spec():
    return QuadratureSpec(
        kx_nodes=4, ky_nodes=6, origin_levels=3, tail_kappa=10.0,
        matsubara_rel_cut=1.0e-8, omega_panels=6,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(7)
