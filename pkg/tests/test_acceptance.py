"""Acceptance criteria, one test each, with wall-clock limits.

Every test prints a single ``[PASS]``/``[FAIL]`` line.  Run directly with
``python3 tests/test_acceptance.py`` for just the summary lines.
"""

import pathlib
import sys
import tempfile
import time

import numpy as np
import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from conftest import SIGMA_X, qubit, random_observable, random_system, unit_oracle  # noqa: E402
from thermal_wick import cli  # noqa: E402
from thermal_wick import reconstruct as rc  # noqa: E402
from thermal_wick.estimator import ThermalReconstruction  # noqa: E402
from thermal_wick.green import build_pi_matrix, sample_closed_tube, tube_bound_check  # noqa: E402
from thermal_wick.modular import (  # noqa: E402
    cesaro_average,
    cesaro_limit,
    gns,
    modular_residuals,
    perturbed_state,
    tomita,
    verify_commutant_theorem,
)
from thermal_wick.oracle import check_cyclic_periodicity, quasifree_boson_oracle, quasifree_fermion_oracle  # noqa: E402
from thermal_wick.system import kms_residual, rtgf  # noqa: E402

REPO = pathlib.Path(__file__).resolve().parents[1]

# collected for the pytest terminal summary (see conftest.py)
SUMMARY_LINES = []


def _report(tag, title, ok, detail, elapsed, limit):
    ok = ok and elapsed < limit
    line = f"[{'PASS' if ok else 'FAIL'}] {tag} {title}: {detail} ({elapsed:.2f}s, limit {limit:g}s)"
    SUMMARY_LINES.append(line)
    print(line, file=sys.__stdout__, flush=True)
    return ok


def _timed(fn):
    start = time.perf_counter()
    ok, detail = fn()
    return ok, detail, time.perf_counter() - start


def criterion_kms():
    worst = 0.0
    for seed in range(50):
        d = 1 + seed % 5
        sys_ = random_system(d, 1000 + seed, beta=0.2 + 0.1 * (seed % 20))
        rng = np.random.default_rng(seed)
        a, b = random_observable(rng, d, "a"), random_observable(rng, d, "b")
        res = kms_residual(sys_, a, b, np.linspace(-3, 3, 10)) / (a.norm * b.norm)
        worst = max(worst, res)
    return worst < 1e-9, f"max relative residual {worst:.2e} < 1e-9"


def _half_words(rng, oracle, count):
    gens = [i for i in range(oracle.n_generators) if i != oracle.identity_index]
    words = []
    for _ in range(count):
        n = int(rng.integers(1, 4))
        taus = np.sort(rng.uniform(1e-3, oracle.beta / 2 - 1e-3, n))
        words.append(list(zip(rng.choice(gens, n).tolist(), taus)))
    return words


def criterion_reflection_positivity():
    rng = np.random.default_rng(2)
    oracles = []
    for k in range(4):
        oracles.append(unit_oracle(random_system(2 + k % 3, 50 + k, beta=0.5 + k))[0])
        oracles.append(quasifree_fermion_oracle(rng.normal(size=2), 0.5 + k))
        oracles.append(quasifree_boson_oracle([0.8 + 0.3 * k], 1.0 + 0.5 * k))
    worst = -np.inf
    for oracle in oracles:
        for _ in range(5):
            ev = build_pi_matrix(oracle, _half_words(rng, oracle, int(rng.integers(2, 9)))).eigenvalues
            worst = max(worst, -ev[0] / ev[-1])
    return worst <= 1e-9, f"max -lambda_min/lambda_max {worst:.2e} <= 1e-9 over finite/fermion/boson"


def criterion_tube_bound():
    rng = np.random.default_rng(3)
    worst = -np.inf
    total = 0
    for d in (2, 3, 4):
        for n in (2, 3):
            sys_ = random_system(d, 10 * d + n, beta=1.2)
            obs = [random_observable(rng, d, f"a{k}") for k in range(n)]
            samples = sample_closed_tube(n, sys_.beta, n_interior=25 if n == 3 else 34, seed=d + n)[:100]
            total += len(samples)
            worst = max(worst, tube_bound_check(sys_, obs, samples))
    return worst <= 1e-9, f"max excess {worst:.2e} <= 1e-9 over {total} points"


def criterion_spectrum():
    worst = consistency = 0.0
    for E in (1.0, 2.3):
        oracle, _ = unit_oracle(qubit(E, 1.0))
        est = ThermalReconstruction(n_max=1, m=1, delta=1 / 8).fit(oracle)
        worst = max(worst, np.abs(est.spectrum_ - np.array([-E, 0, 0, E])).max())
        consistency = max(consistency, est.liouvillian_.consistency)
    return worst < 1e-7 and consistency < 1e-8, f"spectrum error {worst:.2e} < 1e-7, 2-delta mismatch {consistency:.2e} < 1e-8"


def criterion_round_trip():
    worst = 0.0
    for d in (2, 3, 4):
        sys_ = random_system(d, 70 + d, beta=1.0)
        oracle, units = unit_oracle(sys_)
        est = ThermalReconstruction().fit(oracle)
        rng = np.random.default_rng(d)
        for _ in range(50):
            n = int(rng.integers(1, 4))
            word = [(int(g), float(t)) for g, t in zip(rng.integers(0, d * d, n), rng.normal(scale=2.0, size=n))]
            exact = rtgf(sys_, [(units[g], t) for g, t in word])
            worst = max(worst, abs(exact - rc.reconstructed_rtgf(est.space_, word)))
    return worst < 1e-7, f"max |reconstructed - exact| {worst:.2e} < 1e-7 (50 words each, d = 2, 3, 4)"


def _reconstruction_residuals(space, oracle):
    L, U = space.L, space.J.matrix
    r = space.rank
    half = space.exp_L(-space.beta / 2)
    res = {
        "J^2": np.linalg.norm(U @ np.conj(U) - np.eye(r), 2),
        "J Omega": np.linalg.norm(space.J(space.omega) - space.omega),
        "JL + LJ": np.linalg.norm(U @ np.conj(L) + L @ U, 2),
        "S - J Delta^1/2": 0.0,
        "rho - J lambda J": 0.0,
        "||lambda(a)|| - ||a||": 0.0,
        "[alpha_t lambda, rho]": 0.0,
    }
    for g, lam in space.lam.items():
        # S lambda(g) Omega = lambda(g*) Omega with S = J exp(-beta L / 2)
        lhs = space.J(half @ lam @ space.omega)
        rhs = space.lam[oracle.star(g)] @ space.omega
        res["S - J Delta^1/2"] = max(res["S - J Delta^1/2"], np.linalg.norm(lhs - rhs))
        res["rho - J lambda J"] = max(res["rho - J lambda J"], np.linalg.norm(space.rho[g] - space.J.sandwich(lam), 2))
        excess = np.linalg.norm(lam, 2) - oracle.generators[g].norm_bound
        res["||lambda(a)|| - ||a||"] = max(res["||lambda(a)|| - ||a||"], excess)
        for t in (0.0, 0.3, 1.7):
            ev = space.heisenberg(g, t)
            for rho in space.rho.values():
                res["[alpha_t lambda, rho]"] = max(res["[alpha_t lambda, rho]"], np.linalg.norm(ev @ rho - rho @ ev, 2))
    return res


def criterion_modular():
    worst = {}
    for d in (1, 2, 3, 4):
        sys_ = random_system(d, 90 + d, beta=0.9)
        g = gns(sys_)
        md = tomita(g, sys_.beta)
        merged = {f"gns {k}": v for k, v in modular_residuals(g, md).items()}
        comm = verify_commutant_theorem(g, md, n_pairs=20, seed=d)
        merged["gns [rho(a), lambda(b)]"] = comm["max_commutator"]
        oracle, _ = unit_oracle(sys_)
        space = ThermalReconstruction().fit(oracle).space_
        merged.update({f"reconstructed {k}": v for k, v in _reconstruction_residuals(space, oracle).items()})
        for k, v in merged.items():
            worst[k] = max(worst.get(k, -np.inf), float(v))
    name, value = max(worst.items(), key=lambda kv: kv[1])
    return value < 1e-7, f"{len(worst)} identities, worst {name} = {value:.2e} < 1e-7"


def criterion_commutant():
    worst = 0.0
    for d in (2, 3):
        g = gns(random_system(d, 120 + d, beta=1.1))
        report = verify_commutant_theorem(g, tomita(g))
        worst = max(worst, report["span_residual"])
        if report["commutant_dim"] != d * d:
            return False, f"commutant dimension {report['commutant_dim']} != {d * d}"
    return worst < 1e-9, f"span residual {worst:.2e} < 1e-9 (d = 2, 3)"


def criterion_statistics():
    beta = 1.4
    grid = np.linspace(0, beta, 15)
    f = check_cyclic_periodicity(quasifree_fermion_oracle([0.5, -1.2], beta), "psi1*", "psi1", grid)
    b = check_cyclic_periodicity(quasifree_boson_oracle([0.5, 1.2], beta, n_trunc=80), "phi0*", "phi0", grid)
    ok = f.sign == -1 and b.sign == 1 and max(f.residual, b.residual) < 1e-10
    return ok, f"fermion s={f.sign:+d} ({f.residual:.1e}), boson s={b.sign:+d} ({b.residual:.1e}), residual < 1e-10"


def criterion_cesaro():
    g = gns(qubit(1.0, 1.0))
    psi = perturbed_state(g, SIGMA_X)
    avg = cesaro_average(g, psi, SIGMA_X, 200.0)
    gap = abs(avg - cesaro_limit(g, psi, SIGMA_X))
    return gap < 1e-4, f"|average(T=200) - kernel projection| = {gap:.2e} < 1e-4"


def criterion_determinism():
    config = str(REPO / "configs" / "qubit.json")
    with tempfile.TemporaryDirectory() as tmp:
        outs = [pathlib.Path(tmp) / name for name in ("a", "b")]
        for out in outs:
            cli.run(config, str(out), environ={})
        names = sorted(p.name for p in outs[0].iterdir())
        same = names == sorted(p.name for p in outs[1].iterdir()) and all(
            (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes() for n in names
        )
    return same, f"{len(names)} output files byte-identical across two runs"


CRITERIA = [
    ("AC1", "KMS residual, 50 random systems", criterion_kms, 5),
    ("AC2", "reflection positivity", criterion_reflection_positivity, 10),
    ("AC3", "tube bound", criterion_tube_bound, 10),
    ("AC4", "qubit reconstruction spectrum", criterion_spectrum, 2),
    ("AC5", "real-time round trip", criterion_round_trip, 30),
    ("AC6", "modular identities", criterion_modular, 10),
    ("AC7", "commutant theorem", criterion_commutant, 5),
    ("AC8", "statistics dichotomy", criterion_statistics, 2),
    ("AC9", "Cesaro average", criterion_cesaro, 2),
    ("AC10", "CLI determinism", criterion_determinism, 5),
]


@pytest.mark.acceptance
@pytest.mark.parametrize("tag, title, fn, limit", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_acceptance(tag, title, fn, limit):
    ok, detail, elapsed = _timed(fn)
    passed = _report(tag, title, ok, detail, elapsed, limit)
    assert ok, detail
    assert elapsed < limit, f"took {elapsed:.2f}s, limit {limit}s"
    assert passed


if __name__ == "__main__":
    results = []
    for tag, title, fn, limit in CRITERIA:
        ok, detail, elapsed = _timed(fn)
        results.append(_report(tag, title, ok, detail, elapsed, limit))
    print(f"{sum(results)}/{len(results)} criteria passed")
    sys.exit(0 if all(results) else 1)
