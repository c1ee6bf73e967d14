"""Shared fixtures: small grids, seeded generators, standard parameters and states."""
import numpy as np
import pytest

from smectic.config import get_settings
from smectic.core.energy import ModelParams
from smectic.core.fields import PeriodicGrid
from smectic.core.stepper import initial_state
from smectic.services.checks import random_q, random_scalar
from smectic.services.harness import standard_initial_data


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch, tmp_path):
    monkeypatch.setenv("SMECTIC_OUTPUT_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("SMECTIC_LOG_JSON", "true")
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def params() -> ModelParams:
    return ModelParams()


@pytest.fixture
def params3d() -> ModelParams:
    return ModelParams(d=3, B=0.5)


@pytest.fixture
def grid() -> PeriodicGrid:
    return PeriodicGrid(d=2, J=16)


@pytest.fixture
def grid3d() -> PeriodicGrid:
    return PeriodicGrid(d=3, J=8)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def random_state(grid, rng):
    return random_q(grid, rng, 0.3), random_scalar(grid, rng, 0.25)


@pytest.fixture
def standard_state(grid, params):
    Q0, u0 = standard_initial_data(grid, params)
    return initial_state(Q0, u0, params)
