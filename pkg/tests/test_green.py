import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_observable, random_system, unit_oracle
from thermal_wick.exceptions import OrderViolation, ReflectionRangeError
from thermal_wick.green import (
    build_pi_matrix,
    cyclic_kms_residual,
    pair_word,
    reflect,
    sample_closed_tube,
    translation_residual,
    tube_bound_check,
)
from thermal_wick.oracle import quasifree_boson_oracle, quasifree_fermion_oracle
from thermal_wick.system import check_tube


def _half_words(rng, oracle, count, max_len=3):
    gens = [i for i in range(oracle.n_generators) if i != oracle.identity_index]
    out = []
    for _ in range(count):
        n = int(rng.integers(1, max_len + 1))
        taus = np.sort(rng.uniform(0.01, oracle.beta / 2 - 0.01, n))
        out.append(list(zip(rng.choice(gens, n).tolist(), taus)))
    return out


def test_reflect_and_pair_word(qubit_oracle):
    word = [("E01", 0.1), ("E11", 0.3)]
    assert reflect(qubit_oracle, word, 1.0) == [(3, 0.7), (2, 0.9)]
    assert pair_word(qubit_oracle, word, [("E00", 0.2)]) == [(1, 0.1), (3, 0.3), (0, 0.8)]


@pytest.mark.parametrize(
    "make",
    [
        lambda: unit_oracle(random_system(3, 9, beta=1.2))[0],
        lambda: quasifree_fermion_oracle([0.3, -0.8], 1.4),
        lambda: quasifree_boson_oracle([1.1], 0.9),
    ],
    ids=["finite", "fermion", "boson"],
)
def test_reflection_positivity(make, rng):
    oracle = make()
    for _ in range(5):
        pi = build_pi_matrix(oracle, _half_words(rng, oracle, 8))
        assert pi.hermiticity_residual < 1e-10
        assert pi.is_psd()
        ev = pi.eigenvalues
        assert ev[0] >= -1e-9 * ev[-1]


def test_pi_matrix_rejects_out_of_range_half_words(qubit_oracle):
    with pytest.raises(ReflectionRangeError):
        build_pi_matrix(qubit_oracle, [[("E01", 0.6)]])
    with pytest.raises(ReflectionRangeError):
        build_pi_matrix(qubit_oracle, [[("E01", 0.3), ("E10", 0.2)]])


def test_cyclic_kms_and_translation(rng):
    oracle = quasifree_fermion_oracle([0.5, 1.2], 1.0)
    word = [("psi0*", 0.1), ("psi1*", 0.2), ("psi1", 0.6), ("psi0", 0.9)]
    for j in (1, 2, 3):
        assert cyclic_kms_residual(oracle, word, j) < 1e-12
    assert translation_residual(oracle, word, 0.07) < 1e-12
    with pytest.raises(OrderViolation):
        cyclic_kms_residual(oracle, word, 0)
    with pytest.raises(OrderViolation):
        cyclic_kms_residual(oracle, word[::-1], 1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**16), n=st.integers(2, 3))
def test_sampled_points_lie_in_the_closed_tube(seed, n):
    sys = random_system(2, seed, beta=0.8)
    for z in sample_closed_tube(n, sys.beta, n_interior=16, seed=seed):
        check_tube(sys, z)


def test_tube_bound(rng):
    for d, n in [(2, 2), (3, 3), (4, 2)]:
        sys = random_system(d, d + n, beta=1.5)
        obs = [random_observable(rng, d, f"a{k}") for k in range(n)]
        assert tube_bound_check(sys, obs, sample_closed_tube(n, sys.beta, n_interior=32)) <= 1e-9
