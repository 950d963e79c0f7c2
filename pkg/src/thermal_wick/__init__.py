"""Thermal Green functions, their analytic structure, and reconstruction of
thermal dynamics from imaginary-time correlators."""

from .estimator import ThermalReconstruction
from .exceptions import ConfigError, ThermalWickError
from .oracle import (
    FiniteSystemOracle,
    Generator,
    QuasiFreeBosonOracle,
    QuasiFreeFermionOracle,
    TogfOracle,
    check_cyclic_periodicity,
    fermion_fock_system,
    finite_system_oracle,
    quasifree_boson_oracle,
    quasifree_fermion_oracle,
)
from .system import Observable, ThermalSystem, gibbs_state, green_function, kms_residual, rtgf, togf

__version__ = "0.1.0"

__all__ = [
    "FiniteSystemOracle",
    "Generator",
    "Observable",
    "QuasiFreeBosonOracle",
    "QuasiFreeFermionOracle",
    "ThermalReconstruction",
    "ThermalSystem",
    "TogfOracle",
    "ConfigError",
    "ThermalWickError",
    "check_cyclic_periodicity",
    "fermion_fock_system",
    "finite_system_oracle",
    "gibbs_state",
    "green_function",
    "kms_residual",
    "quasifree_boson_oracle",
    "quasifree_fermion_oracle",
    "rtgf",
    "togf",
]
