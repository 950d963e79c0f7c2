import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg
from scipy.special import logsumexp

from conftest import SIGMA_MINUS, SIGMA_PLUS, qubit, random_observable, random_system
from thermal_wick.exceptions import NonHermitianInput, OrderViolation, TubeViolation
from thermal_wick.system import (
    Observable,
    ThermalSystem,
    evolve,
    gibbs_state,
    green_function,
    is_cyclically_ordered,
    kms_residual,
    rtgf,
    togf,
)


def trace_reference(sys, word):
    """Green function from dense matrix exponentials, no eigenbasis tricks."""
    Hm = sys.H_mu
    rho = linalg.expm(-sys.beta * Hm)
    rho /= np.trace(rho)
    prod = np.eye(sys.dim, dtype=complex)
    for a, z in word:
        prod = prod @ linalg.expm(1j * z * Hm) @ a.matrix @ linalg.expm(-1j * z * Hm)
    return np.trace(rho @ prod)


def test_gibbs_state_is_a_density_matrix():
    sys = random_system(4, 1, beta=2.0)
    g = gibbs_state(sys)
    assert np.trace(g.rho).real == pytest.approx(1.0, abs=1e-14)
    assert np.allclose(g.rho, g.rho.conj().T)
    assert np.linalg.eigvalsh(g.rho).min() > 0
    assert g.logXi == pytest.approx(logsumexp(-sys.beta * sys.energies), rel=1e-13)


def test_gibbs_state_survives_large_beta():
    sys = qubit(E=1.0, beta=2000.0)
    g = gibbs_state(sys)
    assert np.isfinite(g.logXi)
    assert g.rho[0, 0].real == pytest.approx(1.0)


def test_chemical_potential_enters_grand_canonical_hamiltonian():
    H = np.diag([0.0, 1.0, 1.0, 2.5])
    N = np.diag([0.0, 1.0, 1.0, 2.0])
    sys = ThermalSystem(H, 0.7, charges=[N], mu=[0.4])
    expected = linalg.expm(-0.7 * (H - 0.4 * N))
    assert np.allclose(gibbs_state(sys).rho, expected / np.trace(expected))


def test_input_validation():
    with pytest.raises(NonHermitianInput):
        ThermalSystem(np.array([[0, 1], [0, 0]]), 1.0)
    with pytest.raises(ValueError):
        ThermalSystem(np.eye(2), 0.0)
    with pytest.raises(ValueError, match="commute"):
        ThermalSystem(np.diag([0.0, 1.0]), 1.0, charges=[np.array([[0, 1], [1, 0]])], mu=[0.1])
    with pytest.raises(ValueError):
        ThermalSystem(np.eye(2), 1.0, charges=[np.eye(2)], mu=[])


def test_qubit_togf_closed_form():
    # tr(rho E01 e^{-tau H} E10 e^{tau H}) = e^{-tau E} / (1 + e^{-beta E})
    E, beta = 1.3, 0.9
    sys = qubit(E, beta)
    lower, raise_ = Observable("E01", SIGMA_MINUS), Observable("E10", SIGMA_PLUS)
    for tau in (0.0, 0.2, 0.5, 0.9):
        expected = np.exp(-tau * E) / (1 + np.exp(-beta * E))
        assert togf(sys, [(lower, 0.0), (raise_, tau)]) == pytest.approx(expected, rel=1e-13)


def test_green_function_matches_dense_reference(rng):
    sys = random_system(3, 5, beta=1.4)
    ops = [random_observable(rng, 3, f"a{k}") for k in range(3)]
    for _ in range(10):
        taus = np.sort(rng.uniform(0, sys.beta, 3))
        zs = rng.normal(size=3) + 1j * taus
        word = list(zip(ops, zs))
        assert green_function(sys, word) == pytest.approx(trace_reference(sys, word), rel=1e-10, abs=1e-12)


def test_rtgf_invariants(rng):
    sys = random_system(3, 2)
    a = random_observable(rng, 3)
    assert rtgf(sys, []) == 1.0
    values = [rtgf(sys, [(a, t)]) for t in (-3.0, 0.0, 2.5)]
    assert np.allclose(values, values[0])
    assert values[0] == pytest.approx(np.trace(gibbs_state(sys).rho @ a.matrix))


def test_evolve_is_a_homomorphism(rng):
    sys = random_system(3, 8)
    a, b = random_observable(rng, 3, "a"), random_observable(rng, 3, "b")
    z = 0.3 + 0.2j
    lhs = evolve(sys, a @ b, z).matrix
    rhs = evolve(sys, a, z).matrix @ evolve(sys, b, z).matrix
    assert np.allclose(lhs, rhs)


def test_order_and_tube_violations():
    sys = qubit()
    a = Observable("x", np.eye(2))
    with pytest.raises(OrderViolation):
        togf(sys, [(a, 0.5), (a, 0.1)])
    with pytest.raises(OrderViolation):
        togf(sys, [(a, 0.0), (a, 1.5)])
    with pytest.raises(TubeViolation):
        green_function(sys, [(a, 0.0), (a, -0.1j)])
    assert is_cyclically_ordered([0.0, 1.0], 1.0)
    assert not is_cyclically_ordered([0.0, 1.01], 1.0)


def test_kms_residual_requires_a_grid():
    sys = qubit()
    with pytest.raises(ValueError):
        kms_residual(sys, np.eye(2), np.eye(2), [])


@settings(max_examples=25, deadline=None)
@given(d=st.integers(1, 5), seed=st.integers(0, 10_000), beta=st.floats(0.1, 5.0))
def test_kms_condition_holds(d, seed, beta):
    sys = random_system(d, seed, beta)
    rng = np.random.default_rng(seed)
    a, b = random_observable(rng, d, "a"), random_observable(rng, d, "b")
    res = kms_residual(sys, a, b, np.linspace(-2, 2, 7))
    assert res < 1e-9 * a.norm * b.norm
