r"""Reconstruction of thermal quantum mechanics from imaginary-time Green functions.

The Hilbert space is sampled by a finite :class:`WordBasis` of formal words
``[g_1, tau_1, ..., g_n, tau_n]`` with ``0 < tau_1 < ... < tau_n < beta/2`` on a
uniform grid.  The oracle supplies the inner product

.. math:: \langle v, w\rangle = \phi_\beta(v,\ \text{star-reversed } w \text{ at } \beta - \sigma),

and every other object is a matrix of such inner products compressed onto
whitened coordinates of the quotient by the Gram kernel.

Index conventions
-----------------
``G[i, j] = <w_i, w_j>`` (Gram, as returned by :func:`gram_matrix`) and
``A[i, j] = <(w_i)_delta, w_j>`` (shift Gram).  An operator ``T`` is first
assembled as ``R[i, j] = <T w_j, w_i>`` and then compressed as ``X^* R X``,
where the columns of ``X`` are the coefficient vectors of an orthonormal basis
of the quotient.  In particular ``G.T`` is the raw identity.

Sign convention
---------------
Shifting all angles of a word by ``tau`` acts as ``exp(-tau L)`` with ``L`` the
Liouvillian that satisfies ``exp(itL) lambda(a) exp(-itL) = lambda(alpha_t(a))``.
"""

import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .exceptions import (
    ClosureError,
    EmptyDomain,
    NonPositiveSemigroup,
    NormViolation,
    OraclePSDViolation,
    RankZero,
    SizeLimit,
)
from .green import pair_word, reflect

GRID_SLACK = 1e-12
PSD_VIOLATION_RTOL = 1e-6
NORM_VIOLATION_ATOL = 1e-4


@dataclass(frozen=True)
class WordBasis:
    """Ordered list of reconstruction words on a symmetric angle grid.

    Attributes
    ----------
    words : tuple of tuple of (int, float)
    grid : ndarray
        Angles ``k * step`` for ``k = 1..m``, symmetric under ``tau -> beta/2 - tau``.
    step : float
        Grid spacing ``(beta/2) / (m + 1)``.
    """

    words: tuple
    grid: np.ndarray
    step: float
    beta: float
    n_max: int
    reflection: tuple = field(repr=False)

    def __len__(self):
        return len(self.words)

    def max_tau(self, i):
        w = self.words[i]
        return max((t for _, t in w), default=0.0)


def count_words(g, n_max, m, include_empty=False):
    """Number of words in :func:`build_basis` output: ``sum_n g^n C(m, n)``."""
    return int(include_empty) + sum(g ** n * comb(m, n) for n in range(1, n_max + 1))


def build_basis(oracle, n_max, m, include_empty=False, max_size=4096):
    """All words of length ``1..n_max`` over all generators on the ``m``-point grid.

    Ordering is by length, then lexicographic in ``(grid index, generator)``
    letter tuples.  ``m = 1`` places the single angle at ``beta/4``.

    Raises
    ------
    SizeLimit
        If the word count exceeds ``max_size``.
    ClosureError
        If the basis is not closed under the star-reflection.
    """
    if n_max < 0 or m < 1:
        raise ValueError("need n_max >= 0 and m >= 1")
    g = oracle.n_generators
    total = count_words(g, n_max, m, include_empty)
    if total > max_size:
        raise SizeLimit(f"basis would contain {total} words (cap {max_size})")
    beta = oracle.beta
    step = (beta / 2) / (m + 1)
    grid = step * np.arange(1, m + 1)
    keys = [()] if include_empty else []
    for n in range(1, n_max + 1):
        for slots in itertools.combinations(range(m), n):
            for gens in itertools.product(range(g), repeat=n):
                keys.append(tuple(zip(slots, gens)))
    keys.sort(key=lambda k: (len(k), k))
    words = tuple(tuple((gen, float(grid[slot])) for slot, gen in key) for key in keys)
    position = {key: i for i, key in enumerate(keys)}
    reflection = []
    for key in keys:
        image = tuple((m - 1 - slot, oracle.star(gen)) for slot, gen in reversed(key))
        if image not in position:
            raise ClosureError(f"reflection of word {key} is not in the basis")
        reflection.append(position[image])
    return WordBasis(words=words, grid=grid, step=step, beta=beta, n_max=n_max, reflection=tuple(reflection))


def _inner(oracle, v, w):
    return oracle(pair_word(oracle, v, w))


def gram_matrix(oracle, basis):
    """``G[v, w] = <v, w>`` over the basis, Hermitian-symmetrized.

    Raises
    ------
    OraclePSDViolation
        If ``min eig(G) < -1e-6 * max eig(G)``.
    """
    words = basis.words
    N = len(words)
    G = np.empty((N, N), dtype=complex)
    for i in range(N):
        for j in range(i, N):
            G[i, j] = _inner(oracle, words[i], words[j])
            G[j, i] = np.conj(G[i, j]) if j != i else G[i, i].real
    ev = np.linalg.eigvalsh(G) if N else np.zeros(0)
    if N and ev[0] < -PSD_VIOLATION_RTOL * max(ev[-1], 0.0):
        raise OraclePSDViolation(f"Gram matrix has eigenvalue {ev[0]:.3e} (max {ev[-1]:.3e})")
    return G


@dataclass(frozen=True)
class Quotient:
    """Whitened coordinates of ``span(basis) / kernel``.

    Attributes
    ----------
    coords : (N, r) ndarray
        Column ``k`` holds the coefficients of orthonormal vector ``e_k``.
    rank : int
    cutoff : float
        Absolute eigenvalue threshold ``rel_tol * max eigenvalue``.
    eigenvalues : ndarray
        Full Gram spectrum, descending.
    """

    coords: np.ndarray
    rank: int
    cutoff: float
    rel_tol: float
    eigenvalues: np.ndarray

    def compress(self, raw):
        """``X^* R X`` for a raw operator matrix ``R[i, j] = <T w_j, w_i>``."""
        X = self.coords
        return X.conj().T @ raw @ X

    def coordinates(self, overlaps):
        """Coordinates of a vector ``u`` from ``b[i] = <u, w_i>``."""
        return self.coords.conj().T @ np.asarray(overlaps)


def quotient(G, rel_tol=1e-10):
    """Quotient by the Gram kernel and whiten.

    Eigen-directions of the inner product with eigenvalue at most
    ``rel_tol * max eigenvalue`` are discarded.
    """
    G = np.asarray(G, dtype=complex)
    if G.shape[0] == 0:
        return Quotient(np.zeros((0, 0), complex), 0, 0.0, rel_tol, np.zeros(0))
    M = G.T
    ev, V = np.linalg.eigh(0.5 * (M + M.conj().T))
    order = np.argsort(-ev, kind="stable")  # keeps G = I coordinates in place
    ev, V = ev[order], V[:, order]
    cutoff = rel_tol * max(ev[0], 0.0)
    keep = ev > cutoff
    r = int(keep.sum())
    if r == 0:
        raise RankZero("Gram matrix has no direction above the cutoff")
    X = V[:, keep] / np.sqrt(ev[keep])
    return Quotient(coords=X, rank=r, cutoff=float(cutoff), rel_tol=rel_tol, eigenvalues=ev)


def shift_domain(basis, delta, domain="strict"):
    """Indices admitted by a shift of ``delta``.

    ``"strict"`` keeps words with ``max tau <= beta/2 - delta``.  ``"all"``
    keeps every word and only requires each pairing ``<v_delta, w>`` to stay
    cyclically ordered, ``2 * max tau + delta <= beta``.
    """
    slack = GRID_SLACK * basis.beta
    if domain == "strict":
        return [i for i in range(len(basis)) if basis.max_tau(i) <= basis.beta / 2 - delta + slack]
    if domain == "all":
        top = max((basis.max_tau(i) for i in range(len(basis))), default=0.0)
        if 2 * top + delta > basis.beta + slack:
            raise EmptyDomain(f"shift {delta} too large for the full basis (max angle {top})")
        return list(range(len(basis)))
    raise ValueError(f"unknown domain {domain!r}")


def shift_gram(oracle, basis, delta=None, domain="strict"):
    """Shift Gram matrix ``A[v, w] = <v shifted by delta, w>`` on the shift domain.

    Returns
    -------
    indices : list of int
    A : ndarray
        Hermitian by the shift symmetry of the inner product.
    """
    delta = basis.step if delta is None else float(delta)
    if delta <= 0:
        raise ValueError("delta must be positive")
    idx = shift_domain(basis, delta, domain)
    if not idx:
        raise EmptyDomain(f"no word admits a shift of {delta}")
    words = [basis.words[i] for i in idx]
    n = len(words)
    A = np.empty((n, n), dtype=complex)
    for a, v in enumerate(words):
        shifted = [(g, t + delta) for g, t in v]
        for b, w in enumerate(words):
            A[a, b] = _inner(oracle, shifted, w)
    return idx, A


@dataclass(frozen=True)
class LiouvillianResult:
    """Liouvillian in whitened coordinates of the shift domain.

    Attributes
    ----------
    L : (r, r) ndarray
    quotient : Quotient
        Whitening of the Gram matrix restricted to the domain.
    mu : ndarray
        Eigenvalues of the compressed shift ``exp(-delta L)``.
    spectrum : ndarray
        Sorted eigenvalues of ``L``.
    shift_asymmetry : float
        ``||Gamma - Gamma^*||`` before symmetrization.
    consistency : float or None
        Max mismatch between spectra extracted at ``delta`` and ``2 delta``,
        relative to ``1 + max |spectrum|``.
    """

    L: np.ndarray
    quotient: Quotient
    mu: np.ndarray
    spectrum: np.ndarray
    delta: float
    shift_asymmetry: float
    consistency: object = None


def _compressed_shift(A, q):
    gamma = q.compress(np.asarray(A).T)
    asym = float(np.linalg.norm(gamma - gamma.conj().T, 2))
    return 0.5 * (gamma + gamma.conj().T), asym


def extract_liouvillian(G, A, delta, rel_tol=1e-10, domain=None, A2=None):
    """Solve the Hermitian pencil ``A x = mu G x`` and take ``L = -log(mu) / delta``.

    Parameters
    ----------
    G : ndarray
        Gram matrix of the full basis.
    A : ndarray
        Shift Gram on ``domain`` (indices into ``G``; all of them if None).
    A2 : ndarray, optional
        Shift Gram at ``2 * delta`` on the same domain, for the consistency report.

    Raises
    ------
    NonPositiveSemigroup
        If some ``mu <= rel_tol * max mu``.
    """
    G = np.asarray(G)
    if domain is not None:
        G = G[np.ix_(domain, domain)]
    q = quotient(G, rel_tol)
    gamma, asym = _compressed_shift(A, q)
    mu, W = np.linalg.eigh(gamma)
    floor = rel_tol * max(mu.max(), 0.0)
    if mu[0] <= floor:
        raise NonPositiveSemigroup(
            f"shift eigenvalue {mu[0]:.3e} is not positive; under-sampled basis or non-KMS oracle",
            eigenvalue=float(mu[0]),
            eigenvector=W[:, 0],
        )
    ell = -np.log(mu) / delta
    L = W @ np.diag(ell) @ W.conj().T
    spectrum = np.sort(ell)
    consistency = None
    if A2 is not None:
        gamma2, _ = _compressed_shift(A2, q)
        mu2 = np.linalg.eigvalsh(gamma2)
        spec2 = np.sort(-np.log(np.clip(mu2, np.finfo(float).tiny, None)) / (2 * delta))
        consistency = float(np.abs(spec2 - spectrum).max() / (1 + np.abs(spectrum).max()))
    return LiouvillianResult(
        L=0.5 * (L + L.conj().T),
        quotient=q,
        mu=mu,
        spectrum=spectrum,
        delta=float(delta),
        shift_asymmetry=asym,
        consistency=consistency,
    )


@dataclass(frozen=True)
class JMap:
    """Anti-unitary ``J`` acting on whitened coordinates as ``c -> U conj(c)``."""

    matrix: np.ndarray
    antiunitarity: float
    involution: float

    def __call__(self, c):
        return self.matrix @ np.conj(c)

    def sandwich(self, op):
        """Linear map ``J op J``."""
        return self.matrix @ np.conj(op) @ np.conj(self.matrix)


def build_J(oracle, basis, q, G=None):
    """Conjugation from the word reflection ``tau -> beta/2 - tau`` with starred, reversed letters.

    Checks ``<Jv, Jw> = <w, v>`` (``antiunitarity``) and ``J^2 = 1``
    (``involution``) in whitened coordinates.
    """
    if G is None:
        G = gram_matrix(oracle, basis)
    M = np.asarray(G).T
    perm = np.asarray(basis.reflection)
    raw = M[:, perm]  # raw[i, j] = <w_{pi(j)}, w_i>
    X = q.coords
    U = X.conj().T @ raw @ np.conj(X)
    r = q.rank
    return JMap(
        matrix=U,
        antiunitarity=float(np.linalg.norm(U.conj().T @ U - np.eye(r), 2)),
        involution=float(np.linalg.norm(U @ np.conj(U) - np.eye(r), 2)),
    )


def represent(oracle, basis, q, generator):
    """Left and right representations of one generator in whitened coordinates.

    ``lambda(g)`` prepends the letter ``(g, 0)``; ``rho(g)`` appends
    ``(g*, beta/2)``.  Both are compressed onto the reconstructed span.

    Raises
    ------
    NormViolation
        If ``||lambda(g)||`` exceeds the declared norm bound by more than ``1e-4``.
    """
    g = oracle.index(generator)
    gstar = oracle.star(g)
    half = oracle.beta / 2
    words = basis.words
    N = len(words)
    raw_l = np.empty((N, N), dtype=complex)
    raw_r = np.empty((N, N), dtype=complex)
    reflected = [reflect(oracle, w, oracle.beta) for w in words]
    for j, wj in enumerate(words):
        left = [(g, 0.0)] + list(wj)
        right = list(wj) + [(gstar, half)]
        for i in range(N):
            raw_l[i, j] = oracle(left + reflected[i])
            raw_r[i, j] = oracle(right + reflected[i])
    lam = q.compress(raw_l)
    rho = q.compress(raw_r)
    bound = oracle.generators[g].norm_bound
    norm = np.linalg.norm(lam, 2) if lam.size else 0.0
    if np.isfinite(bound) and norm > bound + NORM_VIOLATION_ATOL:
        raise NormViolation(f"||lambda({oracle.generators[g].label})|| = {norm:.6g} exceeds bound {bound:.6g}")
    return lam, rho


def omega_coordinates(oracle, basis, q):
    overlaps = np.array([oracle(reflect(oracle, w, oracle.beta)) for w in basis.words], dtype=complex)
    return q.coordinates(overlaps)


@dataclass(frozen=True)
class ReconstructedSpace:
    """Immutable result of a reconstruction.

    ``L``, ``omega``, ``J`` and the representation matrices all live in the
    whitened coordinates of ``quotient``.
    """

    basis: WordBasis
    gram: np.ndarray
    quotient: Quotient
    L: np.ndarray
    omega: np.ndarray
    J: JMap
    lam: dict
    rho: dict
    beta: float
    labels: tuple
    star: tuple
    _eig: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_eig", np.linalg.eigh(self.L))

    @property
    def rank(self):
        return self.quotient.rank

    def index(self, g):
        if isinstance(g, (int, np.integer)):
            return int(g)
        return self.labels.index(g)

    def exp_L(self, z):
        """``exp(z L)`` for complex ``z`` by spectral decomposition."""
        ev, V = self._eig
        return (V * np.exp(z * ev)) @ V.conj().T

    def heisenberg(self, g, t):
        """``exp(itL) lambda(g) exp(-itL)``."""
        U = self.exp_L(1j * t)
        return U @ self.lam[self.index(g)] @ U.conj().T

    def iterated_vector(self, gens, taus):
        """``lambda(a_n) e^{-tau_{n-1} L} ... e^{-tau_1 L} lambda(a_1) Omega``.

        ``gens`` lists ``a_1..a_n``; ``taus`` lists the ``n - 1`` gaps.
        """
        v = self.lam[self.index(gens[0])] @ self.omega
        for g, tau in zip(gens[1:], taus):
            v = self.lam[self.index(g)] @ (self.exp_L(-tau) @ v)
        return v


def reconstructed_rtgf(space, word):
    """``<prod_j e^{it_j L} lambda(a_j) e^{-it_j L} Omega, Omega>`` for ``word = [(g, t), ...]``."""
    v = space.omega
    for g, t in reversed(list(word)):
        v = space.heisenberg(g, float(t)) @ v
    return complex(np.vdot(space.omega, v))


def realtime_kms_residual(space, a, b, t_grid):
    r"""Max over ``t_grid`` of ``|F_ab(t) - <e^{itL} e^{-beta L/2} lambda(a) Omega, e^{-beta L/2} lambda(b*) Omega>|``.

    ``F_ab(t) = <alpha_t(a) b>`` is the reconstructed two-point function.
    """
    a_i = space.index(a)
    b_i = space.index(b)
    half = space.exp_L(-space.beta / 2)
    va = half @ (space.lam[a_i] @ space.omega)
    vb = half @ (space.lam[space.star[b_i]] @ space.omega)
    worst = 0.0
    for t in np.atleast_1d(np.asarray(t_grid, dtype=float)):
        lhs = reconstructed_rtgf(space, [(a_i, t), (b_i, 0.0)])
        rhs = np.vdot(vb, space.exp_L(1j * t) @ va)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)
