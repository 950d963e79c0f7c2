"""Experiment configuration: schema validation, defaults and object construction."""

import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .exceptions import ConfigError, ThermalWickError
from .modular import matrix_units
from .oracle import fermion_fock_system, finite_system_oracle, quasifree_boson_oracle, quasifree_fermion_oracle
from .system import ThermalSystem

SCHEMA_VERSION = 1

# Every tolerance that appears in a report comes from this table (overridable per config).
DEFAULT_TOLERANCES = {
    "kms": 1e-9,
    "reflection_positivity": 1e-9,
    "cyclic_kms": 1e-9,
    "tube_bound": 1e-9,
    "periodicity": 1e-10,
    "gram_psd": 1e-9,
    "shift_asymmetry": 1e-9,
    "consistency": 1e-8,
    "liouvillian_hermiticity": 1e-8,
    "bohr_spectrum": 1e-7,
    "J_antiunitarity": 1e-9,
    "J_involution": 1e-8,
    "J_omega": 1e-8,
    "JL_anticommutator": 1e-7,
    "L_omega": 1e-8,
    "omega_norm": 1e-8,
    "lambda_norm_excess": 1e-7,
    "lambda_adjoint": 1e-8,
    "rho_J_lambda_J": 1e-8,
    "realtime_kms": 1e-8,
    "roundtrip": 1e-7,
    "modular_identities": 1e-9,
    "commutant_span": 1e-9,
    "commutant_commutator": 1e-9,
    "cesaro": 1e-4,
    "cesaro_quadrature": 1e-6,
}

DEFAULT_NUMERICS = {
    "n_max": 1,
    "m": 1,
    "rel_tol": 1e-10,
    "delta": None,
    "t_grid": [0.0, 0.3, 0.7, 1.1, 1.7, 2.3, 3.0, 4.1, 5.5, 7.0],
    "seed": 0,
    "n_words": 50,
    "cesaro_T": 200.0,
    "cesaro_steps": 8192,
}

# Tasks that need an exact finite-dimensional system behind the oracle.
NEEDS_SYSTEM = {"verify-kms", "roundtrip", "modular", "cesaro"}


def load_schema():
    text = resources.files("thermal_wick").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def validate_config(config):
    """Schema and semantic validation; raises :class:`ConfigError`."""
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    kind = config.get("oracle", {}).get("kind", "finite")
    has_system = "system" in config
    if kind == "finite" and not has_system:
        raise ConfigError("oracle kind 'finite' needs a 'system' entry")
    if kind != "finite" and has_system:
        raise ConfigError(f"oracle kind {kind!r} defines its own system; drop the 'system' entry")
    if kind == "boson":
        bad = sorted(NEEDS_SYSTEM.intersection(config["tasks"]))
        if bad:
            raise ConfigError(f"tasks {bad} need a finite system and are not available for the boson oracle")
    unknown = set(config.get("tolerances", {})) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"unknown tolerance names {sorted(unknown)}")
    return config


def load_config(path):
    """Read and validate a JSON config file."""
    try:
        with open(path, encoding="utf-8") as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return validate_config(config)


def _matrix(real, imag=None):
    m = np.asarray(real, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ConfigError(f"expected a square matrix, got shape {m.shape}")
    if imag is None:
        return m.astype(complex)
    im = np.asarray(imag, dtype=float)
    if im.shape != m.shape:
        raise ConfigError("H_imag must have the same shape as H")
    return m + 1j * im


def random_hamiltonian(dim, seed, scale=1.0):
    """GUE-type Hermitian matrix from a seeded generator."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * (x + x.conj().T) / 2


def build_system(entry):
    preset = entry.get("preset")
    beta = entry["beta"]
    if preset == "qubit":
        return ThermalSystem(np.diag([0.0, entry.get("E", 1.0)]), beta)
    if preset == "random-seeded":
        return ThermalSystem(random_hamiltonian(entry["dim"], entry["seed"], entry.get("scale", 1.0)), beta)
    H = _matrix(entry["H"], entry.get("H_imag"))
    charges = [_matrix(q) for q in entry.get("charges", [])]
    return ThermalSystem(H, beta, charges=charges, mu=entry.get("mu", []))


@dataclass(frozen=True)
class Context:
    """Everything a task needs.

    ``system`` and ``observables`` are the exact reference behind the oracle
    (``observables[i]`` represents oracle generator ``i``); both are None for
    the boson oracle.
    """

    config: dict
    oracle: object
    system: object
    observables: tuple
    numerics: dict
    tolerances: dict


def build_context(config):
    """Construct system, oracle and merged defaults; numerical input errors become ConfigError."""
    numerics = {**DEFAULT_NUMERICS, **config.get("numerics", {})}
    tolerances = {**DEFAULT_TOLERANCES, **config.get("tolerances", {})}
    entry = config.get("oracle", {"kind": "finite"})
    try:
        if entry["kind"] == "finite":
            system = build_system(config["system"])
            observables = tuple(matrix_units(system.dim))
            oracle = finite_system_oracle(system, list(observables))
        elif entry["kind"] == "fermion":
            oracle = quasifree_fermion_oracle(entry["energies"], entry["beta"])
            system, gens = fermion_fock_system(entry["energies"], entry["beta"])
            observables = tuple(gens)
        else:
            oracle = quasifree_boson_oracle(entry["frequencies"], entry["beta"], entry.get("n_trunc", 40))
            system, observables = None, None
    except ThermalWickError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(f"invalid system: {exc}") from None
    return Context(
        config=config,
        oracle=oracle,
        system=system,
        observables=observables,
        numerics=numerics,
        tolerances=tolerances,
    )
