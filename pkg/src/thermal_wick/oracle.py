r"""Temperature-ordered Green function oracles.

An oracle is the only input to reconstruction.  It exposes a list of
:class:`Generator` descriptors (label, index of the star partner, declared norm
bound, Grassmann parity) and evaluates words ``[(g_1, tau_1), ..., (g_n, tau_n)]``
of generator indices and imaginary-time angles.

Words that are cyclically ordered as written are evaluated directly.  Other
words are brought into that form by the (anti)symmetric time-ordering
extension: letters are stably sorted by angle with a sign ``-1`` for every
transposition of two odd letters, and if the sorted window still exceeds
``beta`` each angle is folded into ``[tau_min, tau_min + beta)`` with a sign
``-1`` per fold of an odd letter.  For even generators this is the periodic
(bosonic) extension.

Three implementations are provided: the exact finite system, the quasi-free
fermion (Wick determinant) and the quasi-free boson (Wick pairing sum).
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive, operator_norm
from .exceptions import StarClosureError, TruncationWarning
from .system import Observable, ThermalSystem, is_cyclically_ordered, togf

STAR_RTOL = 1e-12


@dataclass(frozen=True)
class Generator:
    label: str
    star: int
    norm_bound: float
    parity: int = 0
    is_identity: bool = False


class TogfOracle:
    """Base class for imaginary-time Green function oracles.

    Subclasses implement :meth:`_evaluate_ordered` for words whose angles are
    already cyclically ordered and whose identity letters have been removed.
    """

    kind = "abstract"

    def __init__(self, generators, beta):
        self.generators = tuple(generators)
        self.beta = check_positive(beta, "beta")
        for i, g in enumerate(self.generators):
            if not 0 <= g.star < len(self.generators) or self.generators[g.star].star != i:
                raise StarClosureError(f"star is not an involution at generator {g.label!r}")
            if not g.norm_bound > 0:
                raise ValueError(f"norm bound of {g.label!r} must be positive")

    @property
    def n_generators(self):
        return len(self.generators)

    @property
    def labels(self):
        return [g.label for g in self.generators]

    def index(self, label):
        """Generator index from a label (integers pass through)."""
        if isinstance(label, (int, np.integer)):
            return int(label)
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown generator {label!r}; known: {self.labels}") from None

    @property
    def identity_index(self):
        for i, g in enumerate(self.generators):
            if g.is_identity:
                return i
        return None

    @property
    def satisfies_cstar(self):
        """Whether all declared norm bounds are finite (the C*-level property)."""
        return all(np.isfinite(g.norm_bound) for g in self.generators)

    def star(self, i):
        return self.generators[i].star

    def norm_bound(self, word):
        return float(np.prod([self.generators[g].norm_bound for g, _ in word])) if word else 1.0

    def __call__(self, word):
        return self.evaluate(word)

    def evaluate(self, word):
        """Evaluate ``phi_beta`` on a word of ``(generator, tau)`` letters."""
        letters = [(self.index(g), float(t)) for g, t in word]
        letters = [(g, t) for g, t in letters if not self.generators[g].is_identity]
        if not letters:
            return 1.0 + 0j
        sign, letters = self._canonical(letters)
        if sign == 0:
            return 0j
        return sign * complex(self._evaluate_ordered(letters))

    def _canonical(self, letters):
        beta = self.beta
        taus = [t for _, t in letters]
        if is_cyclically_ordered(taus, beta):
            return 1, letters
        sign, letters = self._sorted(letters)
        if letters[-1][1] - letters[0][1] <= beta * (1 + 1e-12):
            return sign, letters
        base = letters[0][1]
        folded = []
        for g, t in letters:
            wraps = int(np.floor((t - base) / beta))
            if wraps and self.generators[g].parity and wraps % 2:
                sign = -sign
            folded.append((g, t - wraps * beta))
        s2, letters = self._sorted(folded)
        return sign * s2, letters

    def _sorted(self, letters):
        order = sorted(range(len(letters)), key=lambda k: letters[k][1])
        odd = [k for k in order if self.generators[letters[k][0]].parity]
        # parity of the permutation restricted to odd letters
        inversions = sum(1 for x, y in itertools.combinations(odd, 2) if x > y)
        return (-1) ** inversions, [letters[k] for k in order]

    def _evaluate_ordered(self, letters):
        raise NotImplementedError

    def describe(self):
        """JSON-serializable descriptor: generator labels, star pairing, beta."""
        return {
            "kind": self.kind,
            "beta": self.beta,
            "generators": [
                {
                    "label": g.label,
                    "star": self.generators[g.star].label,
                    "norm_bound": g.norm_bound if np.isfinite(g.norm_bound) else "inf",
                    "parity": g.parity,
                }
                for g in self.generators
            ],
        }


class FiniteSystemOracle(TogfOracle):
    """Oracle backed by exact traces over a :class:`ThermalSystem`."""

    kind = "finite"

    def __init__(self, sys, gens, parities=None):
        self.system = sys
        self.observables = tuple(gens)
        mats = [g.matrix for g in self.observables]
        parities = list(parities) if parities is not None else [0] * len(mats)
        generators = []
        eye = np.eye(sys.dim)
        for i, (obs, m) in enumerate(zip(self.observables, mats)):
            if m.shape != (sys.dim, sys.dim):
                raise ValueError(f"generator {obs.label!r} has shape {m.shape}, system dim is {sys.dim}")
            adj = m.conj().T
            scale = max(operator_norm(m), 1.0)
            star = next(
                (j for j, other in enumerate(mats) if operator_norm(other - adj) <= STAR_RTOL * scale),
                None,
            )
            if star is None:
                raise StarClosureError(f"generator {obs.label!r} has no star partner in the set")
            generators.append(
                Generator(
                    label=obs.label,
                    star=star,
                    norm_bound=max(operator_norm(m), np.finfo(float).tiny),
                    parity=int(parities[i]),
                    is_identity=bool(np.allclose(m, eye, rtol=0, atol=1e-14)),
                )
            )
        super().__init__(generators, sys.beta)

    def _evaluate_ordered(self, letters):
        return togf(self.system, [(self.observables[g], t) for g, t in letters])


def finite_system_oracle(sys, gens, parities=None):
    """Wrap a :class:`ThermalSystem` and a star-closed generator list as an oracle."""
    return FiniteSystemOracle(sys, gens, parities)


def _log_fermi(x):
    """Return ``(log n, log(1 - n))`` for ``n = 1 / (e^x + 1)``."""
    return -np.logaddexp(0.0, x), -np.logaddexp(0.0, -x)


class _QuasiFreeOracle(TogfOracle):
    """Shared layout: identity, then annihilator/creator pairs per mode."""

    field_name = "a"

    def __init__(self, levels, beta, parity, bound):
        beta = check_positive(beta, "beta")
        self.levels = np.asarray(levels, dtype=float).ravel()
        gens = [Generator("1", 0, 1.0, 0, True)]
        for k in range(self.levels.size):
            a, c = 1 + 2 * k, 2 + 2 * k
            gens.append(Generator(f"{self.field_name}{k}", c, bound, parity))
            gens.append(Generator(f"{self.field_name}{k}*", a, bound, parity))
        super().__init__(gens, beta)

    def mode(self, i):
        """``(mode index, is_creator)`` for a non-identity generator index."""
        return (i - 1) // 2, (i - 1) % 2 == 1

    def annihilator(self, k):
        return 1 + 2 * k

    def creator(self, k):
        return 2 + 2 * k

    def _contraction(self, left, right):
        """``<A_left A_right>`` for two letters in cyclic order (left first)."""
        (gi, ti), (gj, tj) = left, right
        ki, ci = self.mode(gi)
        kj, cj = self.mode(gj)
        if ki != kj or ci == cj:
            return 0.0
        e = self.levels[ki]
        log_occ, log_vac = self._log_occupations(e)
        gap = tj - ti
        if ci:
            # <a*(ti) a(tj)> = e^{e (tj - ti)} n
            return np.exp(e * gap + log_occ)
        # <a(ti) a*(tj)> = e^{-e (tj - ti)} (1 +- n)
        return np.exp(-e * gap + log_vac)

    def two_point(self, k, tau1, tau2, creator_first=True):
        """Two-point kernel of mode ``k`` with angles ``tau1`` then ``tau2``."""
        first = (self.creator(k) if creator_first else self.annihilator(k), tau1)
        second = (self.annihilator(k) if creator_first else self.creator(k), tau2)
        return self.evaluate([first, second])


class QuasiFreeFermionOracle(_QuasiFreeOracle):
    r"""Gaussian state of free fermions ``H = sum_k e_k c_k^* c_k``.

    Ordered words are evaluated by Wick's theorem.  With number conservation
    the Pfaffian over contractions reduces to a determinant over
    creator/annihilator pairs, times the sign of the permutation that moves the
    creators in front.
    """

    kind = "fermion"
    field_name = "psi"

    def __init__(self, energies, beta):
        super().__init__(energies, beta, parity=1, bound=1.0)

    def _log_occupations(self, e):
        return _log_fermi(self.beta * e)

    def _evaluate_ordered(self, letters):
        n = len(letters)
        if n % 2:
            return 0.0
        cre = [p for p, (g, _) in enumerate(letters) if self.mode(g)[1]]
        ann = [p for p, (g, _) in enumerate(letters) if not self.mode(g)[1]]
        if len(cre) != len(ann):
            return 0.0
        B = np.empty((len(cre), len(ann)), dtype=complex)
        for r, p in enumerate(cre):
            for s, q in enumerate(ann):
                if p < q:
                    B[r, s] = self._contraction(letters[p], letters[q])
                else:
                    B[r, s] = -self._contraction(letters[q], letters[p])
        perm = cre + ann
        inversions = sum(1 for x, y in itertools.combinations(perm, 2) if x > y)
        half = len(cre)
        sign = (-1) ** (inversions + half * (half - 1) // 2)
        return sign * np.linalg.det(B) if half else 1.0


class QuasiFreeBosonOracle(_QuasiFreeOracle):
    r"""Gaussian thermal state of free bosons ``H = sum_k w_k b_k^* b_k``.

    Generators are the polynomial field insertions ``b_k`` and ``b_k^*``.  They
    are unbounded, so the declared norm bounds are infinite and the oracle is
    only admissible for the Hilbert space / Liouvillian / conjugation part of
    reconstruction.  Ordered words are evaluated by the Wick sum over pairings.

    On construction the two-point kernel of every mode is compared against a
    Fock space truncated at ``n_trunc`` levels; a disagreement above
    ``check_tol`` emits :class:`TruncationWarning`.
    """

    kind = "boson"
    field_name = "phi"

    def __init__(self, frequencies, beta, n_trunc=40, check_tol=1e-8):
        freqs = np.asarray(frequencies, dtype=float).ravel()
        if np.any(freqs <= 0):
            raise ValueError("all boson frequencies must be positive")
        if int(n_trunc) < 2:
            raise ValueError("n_trunc must be at least 2")
        super().__init__(freqs, beta, parity=0, bound=np.inf)
        self.n_trunc = int(n_trunc)
        self.truncation_error = self._cross_check()
        if self.truncation_error > check_tol:
            warnings.warn(
                f"truncated Fock cross-check differs by {self.truncation_error:.2e} "
                f"(n_trunc={self.n_trunc}); raise n_trunc",
                TruncationWarning,
                stacklevel=2,
            )

    def _log_occupations(self, e):
        x = self.beta * e
        log_occ = -x - np.log1p(-np.exp(-x))  # n_B = 1 / (e^x - 1)
        log_vac = -np.log1p(-np.exp(-x))  # 1 + n_B
        return log_occ, log_vac

    def _evaluate_ordered(self, letters):
        if len(letters) % 2:
            return 0.0
        n_cre = sum(1 for g, _ in letters if self.mode(g)[1])
        if 2 * n_cre != len(letters):
            return 0.0
        return self._hafnian(tuple(letters))

    def _hafnian(self, letters):
        if not letters:
            return 1.0
        first, rest = letters[0], letters[1:]
        total = 0.0
        for j, other in enumerate(rest):
            c = self._contraction(first, other)
            if c != 0.0:
                total += c * self._hafnian(rest[:j] + rest[j + 1:])
        return total

    def truncated_reference(self, n_trunc=None):
        """Finite-system oracle on the truncated Fock space (single-mode oracles only)."""
        if self.levels.size != 1:
            raise ValueError("truncated reference is only built for a single mode")
        n_trunc = int(n_trunc or self.n_trunc)
        return finite_system_oracle(*_boson_fock(self.levels[0], self.beta, n_trunc))

    def _cross_check(self):
        worst = 0.0
        grid = np.linspace(0.0, self.beta, 5)
        for k, w in enumerate(self.levels):
            sys, gens = _boson_fock(w, self.beta, self.n_trunc)
            ref = finite_system_oracle(sys, gens)
            for t1, t2 in itertools.combinations_with_replacement(grid, 2):
                for creator_first in (True, False):
                    mine = self.two_point(k, t1, t2, creator_first)
                    cre, ann = ("phi0*", "phi0") if creator_first else ("phi0", "phi0*")
                    theirs = ref([(cre, t1), (ann, t2)])
                    worst = max(worst, abs(mine - theirs))
        return worst


def _boson_fock(w, beta, n_trunc):
    b = np.diag(np.sqrt(np.arange(1, n_trunc)), 1).astype(complex)
    H = w * np.diag(np.arange(n_trunc)).astype(complex)
    gens = [Observable("1", np.eye(n_trunc)), Observable("phi0", b), Observable("phi0*", b.conj().T)]
    return ThermalSystem(H, beta), gens


def quasifree_fermion_oracle(energies, beta):
    return QuasiFreeFermionOracle(energies, beta)


def quasifree_boson_oracle(frequencies, beta, n_trunc=40):
    return QuasiFreeBosonOracle(frequencies, beta, n_trunc)


def fermion_fock_system(energies, beta):
    """Jordan-Wigner Fock space of free fermions, for brute-force cross-checks.

    Returns the system and the generator list ``[1, psi0, psi0*, psi1, ...]``
    in the same order as :class:`QuasiFreeFermionOracle`.
    """
    energies = np.asarray(energies, dtype=float).ravel()
    n = energies.size
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    z = np.diag([1.0, -1.0]).astype(complex)
    eye2 = np.eye(2, dtype=complex)
    dim = 2 ** n
    gens = [Observable("1", np.eye(dim))]
    H = np.zeros((dim, dim), dtype=complex)
    for k in range(n):
        factors = [z] * k + [lower] + [eye2] * (n - k - 1)
        c = factors[0]
        for f in factors[1:]:
            c = np.kron(c, f)
        H += energies[k] * c.conj().T @ c
        gens += [Observable(f"psi{k}", c), Observable(f"psi{k}*", c.conj().T)]
    return ThermalSystem(H, beta), gens


@dataclass(frozen=True)
class PeriodicityReport:
    sign: int
    residual_minus: float
    residual_plus: float
    scale: float

    @property
    def residual(self):
        return self.residual_minus if self.sign < 0 else self.residual_plus


def check_cyclic_periodicity(oracle, creation, annihilation, tau_grid):
    r"""Compare ``phi(c, tau_1 + beta, a, tau_2)`` with ``s * phi(c, tau_1, a, tau_2)``.

    All pairs ``tau_1 <= tau_2 < tau_1 + beta`` from ``tau_grid`` are used (at
    ``tau_2 = tau_1 + beta`` the shifted letters coincide and the ordering is
    ambiguous).  Returns the max
    residuals for ``s = -1`` and ``s = +1`` and the sign with the smaller one.
    """
    c, a = oracle.index(creation), oracle.index(annihilation)
    beta = oracle.beta
    res = {-1: 0.0, 1: 0.0}
    scale = 0.0
    grid = np.sort(np.asarray(tau_grid, dtype=float))
    for t1, t2 in itertools.combinations_with_replacement(grid, 2):
        if t2 - t1 >= beta * (1 - 1e-12):
            continue
        base = oracle([(c, t1), (a, t2)])
        shifted = oracle([(c, t1 + beta), (a, t2)])
        scale = max(scale, abs(base))
        for s in res:
            res[s] = max(res[s], abs(shifted - s * base))
    sign = -1 if res[-1] < res[1] else 1
    return PeriodicityReport(sign=sign, residual_minus=res[-1], residual_plus=res[1], scale=scale)
