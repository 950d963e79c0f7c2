import sys

import numpy as np
import pytest

from thermal_wick.config import random_hamiltonian
from thermal_wick.modular import matrix_units
from thermal_wick.oracle import finite_system_oracle
from thermal_wick.system import Observable, ThermalSystem

SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS


def qubit(E=1.0, beta=1.0):
    return ThermalSystem(np.diag([0.0, E]), beta)


def random_system(d, seed, beta=1.0):
    return ThermalSystem(random_hamiltonian(d, seed), beta)


def random_observable(rng, d, label="a"):
    return Observable(label, rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))


def unit_oracle(sys):
    """Finite-system oracle on the full matrix-unit generator set."""
    units = matrix_units(sys.dim)
    return finite_system_oracle(sys, units), units


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def qubit_sys():
    return qubit()


@pytest.fixture
def qubit_oracle(qubit_sys):
    return unit_oracle(qubit_sys)[0]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "SUMMARY_LINES", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
