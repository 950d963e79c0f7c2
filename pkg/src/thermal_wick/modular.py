r"""Finite-dimensional GNS and Tomita-Takesaki theory for Gibbs states.

The GNS space of a ``d``-level Gibbs state is realized on Hilbert-Schmidt
matrices with ``<A, B> = tr(B^* A)``, vectorized row-major so that left and
right multiplication are ``kron(a, I)`` and ``kron(I, b^T)``.  The cyclic
vector is ``rho^{1/2}`` and the Liouvillian is ``[H_mu, .]``.

Anti-linear maps are stored as :class:`AntiLinear` in the normal form
``x -> M conj(x)``.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .exceptions import QuadratureWarning, SeparatingFailure
from .system import Observable, evolve

SEPARATING_COND = 1e12


@dataclass(frozen=True)
class AntiLinear:
    """Anti-linear map ``x -> matrix @ conj(x)``."""

    matrix: np.ndarray

    def __call__(self, x):
        return self.matrix @ np.conj(x)

    def compose(self, other):
        """``self o other``; anti-linear after anti-linear is linear."""
        if isinstance(other, AntiLinear):
            return self.matrix @ np.conj(other.matrix)
        return AntiLinear(self.matrix @ np.conj(other))

    def sandwich(self, op):
        """The linear map ``J op J`` for this anti-linear ``J``."""
        return self.matrix @ np.conj(op) @ np.conj(self.matrix)


@dataclass(frozen=True)
class GnsTriple:
    """GNS data of a finite Gibbs state on Hilbert-Schmidt space.

    Attributes
    ----------
    dim : int
        Dimension ``d`` of the underlying system; the space has dimension ``d**2``.
    omega : ndarray
        ``vec(rho^{1/2})``.
    liouvillian : ndarray
        ``kron(H_mu, I) - kron(I, H_mu^T)``.
    """

    dim: int
    omega: np.ndarray
    liouvillian: np.ndarray
    beta: float
    system: object

    def lambda_rep(self, a):
        m = a.matrix if isinstance(a, Observable) else np.asarray(a, dtype=complex)
        return np.kron(m, np.eye(self.dim))

    def right_rep(self, a):
        """Right multiplication by ``a^*``; equals ``J lambda(a) J``."""
        m = a.matrix if isinstance(a, Observable) else np.asarray(a, dtype=complex)
        return np.kron(np.eye(self.dim), m.conj())

    def state(self, a):
        return complex(np.vdot(self.omega, self.lambda_rep(a) @ self.omega))

    def word_vector(self, word):
        """``lambda(alpha_{i tau_1}(a_1) ... alpha_{i tau_n}(a_n)) Omega`` for a half-word.

        This is the vector a reconstruction word represents, used as an explicit
        oracle for Gram matrices.
        """
        prod = np.eye(self.dim, dtype=complex)
        for a, tau in word:
            prod = prod @ evolve(self.system, a, 1j * tau).matrix
        return self.lambda_rep(prod) @ self.omega

    def liouvillian_spectrum(self):
        return np.linalg.eigvalsh(self.liouvillian)

    def kernel_dimension(self, tol=1e-10):
        return int(np.sum(np.abs(self.liouvillian_spectrum()) <= tol))


def matrix_units(d):
    """All ``E_ij`` as observables labeled ``E{i}{j}``; closed under the star."""
    out = []
    for i in range(d):
        for j in range(d):
            m = np.zeros((d, d), dtype=complex)
            m[i, j] = 1.0
            out.append(Observable(f"E{i}{j}", m))
    return out


def gns(sys):
    """Hilbert-Schmidt GNS triple of the Gibbs state of ``sys``."""
    d = sys.dim
    E, U = sys.energies, sys.eigenbasis
    w = np.exp(-sys.beta * (E - E.min()))
    w /= w.sum()
    sqrt_rho = U @ np.diag(np.sqrt(w)) @ U.conj().T
    Hm = sys.H_mu
    L = np.kron(Hm, np.eye(d)) - np.kron(np.eye(d), Hm.T)
    return GnsTriple(
        dim=d,
        omega=sqrt_rho.reshape(-1),
        liouvillian=0.5 * (L + L.conj().T),
        beta=sys.beta,
        system=sys,
    )


@dataclass(frozen=True)
class ModularData:
    S: AntiLinear
    J: AntiLinear
    deltaHalf: np.ndarray

    def polar_residual(self):
        """``||S - J deltaHalf||`` in the anti-linear normal form."""
        return float(np.linalg.norm(self.S.matrix - self.J.compose(self.deltaHalf).matrix, 2))


def tomita(g, beta=None):
    r"""Modular objects of a GNS triple.

    ``S`` is solved from ``S lambda(E_ij) Omega = lambda(E_ji) Omega`` and
    polar-decomposed through an SVD of its matrix part: if ``M = W s V^*`` then
    ``J = W V^*`` (with conjugation) and ``Delta^{1/2} = conj(V s V^*)``.
    ``beta``, if given, must match the triple.
    """
    if beta is not None and not np.isclose(beta, g.beta, rtol=1e-12, atol=0):
        raise ValueError(f"beta={beta} does not match the GNS triple (beta={g.beta})")
    d = g.dim
    units = matrix_units(d)
    U = np.column_stack([g.lambda_rep(a) @ g.omega for a in units])
    Ustar = np.column_stack([g.lambda_rep(a.matrix.conj().T) @ g.omega for a in units])
    if np.linalg.cond(U) > SEPARATING_COND:
        raise SeparatingFailure("Omega is not separating: lambda(A) Omega does not span")
    # M conj(U) = Ustar
    M = linalg.solve(np.conj(U).T, Ustar.T).T
    W, s, Vh = np.linalg.svd(M)
    J = W @ Vh
    P = Vh.conj().T @ np.diag(s) @ Vh
    delta_half = np.conj(P)
    return ModularData(S=AntiLinear(M), J=AntiLinear(J), deltaHalf=0.5 * (delta_half + delta_half.conj().T))


def modular_residuals(g, md, n_random=10, seed=0):
    """Residuals of the modular identities; keys name the identity checked."""
    rng = np.random.default_rng(seed)
    D = g.dim ** 2
    L = g.liouvillian
    J = md.J
    eye = np.eye(D)
    lam_ev, lam_vec = np.linalg.eigh(L)
    exp_half = lam_vec @ np.diag(np.exp(-g.beta * lam_ev / 2)) @ lam_vec.conj().T
    swap = np.zeros((D, D))
    for i in range(g.dim):
        for j in range(g.dim):
            swap[j * g.dim + i, i * g.dim + j] = 1.0
    res = {
        "J^2 = 1": float(np.linalg.norm(J.compose(J) - eye, 2)),
        "J Omega = Omega": float(np.linalg.norm(J(g.omega) - g.omega)),
        "JL = -LJ": float(np.linalg.norm(J.matrix @ np.conj(L) + L @ J.matrix, 2)),
        "S = J exp(-beta L/2)": float(np.linalg.norm(md.S.matrix - J.matrix @ np.conj(exp_half), 2)),
        "J = adjoint on HS": float(np.linalg.norm(J.matrix - swap, 2)),
        "L Omega = 0": float(np.linalg.norm(L @ g.omega)),
    }
    worst_s = 0.0
    for _ in range(n_random):
        a = rng.normal(size=(g.dim, g.dim)) + 1j * rng.normal(size=(g.dim, g.dim))
        x = g.lambda_rep(a) @ g.omega
        worst_s = max(worst_s, np.linalg.norm(md.S(x) - g.lambda_rep(a.conj().T) @ g.omega))
    res["S lambda(a) Omega = lambda(a*) Omega"] = float(worst_s)
    return res


def commutant(matrices, tol=None):
    """Orthonormal basis (Hilbert-Schmidt) of ``{X : [X, M_k] = 0 for all k}``.

    Returns an array of shape ``(k, D, D)``.
    """
    mats = [np.asarray(m, dtype=complex) for m in matrices]
    if not mats:
        raise ValueError("need at least one matrix")
    D = mats[0].shape[0]
    eye = np.eye(D)
    # row-major vec: vec(MX) = kron(M, I) vec X, vec(XM) = kron(I, M^T) vec X
    system = np.vstack([np.kron(eye, m.T) - np.kron(m, eye) for m in mats])
    # thin SVD suffices: the system has at least as many rows as columns
    _, s, Vh = np.linalg.svd(system, full_matrices=False)
    rcond = np.finfo(float).eps * max(system.shape) if tol is None else tol
    rank = int(np.sum(s > rcond * s[0])) if s.size and s[0] > 0 else 0
    return Vh[rank:].conj().reshape(-1, D, D)


def span_residual(basis_a, basis_b):
    """Max mutual projection residual between two spans of matrices."""

    def orth(ms):
        A = np.column_stack([np.asarray(m).reshape(-1) for m in ms])
        return linalg.orth(A)

    qa, qb = orth(basis_a), orth(basis_b)
    if qa.shape[1] != qb.shape[1]:
        return np.inf
    ra = np.linalg.norm(qb - qa @ (qa.conj().T @ qb), 2)
    rb = np.linalg.norm(qa - qb @ (qb.conj().T @ qa), 2)
    return float(max(ra, rb))


def verify_commutant_theorem(g, md, n_pairs=50, seed=0):
    """Check ``lambda(A)' = J lambda(A) J`` and ``[rho(a), lambda(b)] = 0``.

    Returns a dict with ``span_residual``, ``commutant_dim`` and
    ``max_commutator``.
    """
    units = matrix_units(g.dim)
    lam = [g.lambda_rep(a) for a in units]
    comm = commutant(lam)
    jlj = [md.J.sandwich(m) for m in lam]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        a = rng.normal(size=(g.dim, g.dim)) + 1j * rng.normal(size=(g.dim, g.dim))
        b = rng.normal(size=(g.dim, g.dim)) + 1j * rng.normal(size=(g.dim, g.dim))
        ra = md.J.sandwich(g.lambda_rep(a))
        lb = g.lambda_rep(b)
        worst = max(worst, np.linalg.norm(ra @ lb - lb @ ra, 2))
    return {
        "span_residual": span_residual(comm, jlj),
        "commutant_dim": int(comm.shape[0]),
        "max_commutator": float(worst),
    }


def _spectral_parts(g, psi, a):
    ev, vec = np.linalg.eigh(g.liouvillian)
    A = vec.conj().T @ g.lambda_rep(a) @ vec
    p = vec.conj().T @ psi
    weights = np.conj(p)[:, None] * A * p[None, :]  # <A e_l, e_k> conj(p_k) p_l
    freqs = ev[:, None] - ev[None, :]
    return weights, freqs


def cesaro_limit(g, psi, a, tol=1e-9):
    """``lim (1/T) int_0^T <e^{itL} lambda(a) e^{-itL} psi, psi> dt``.

    The limit keeps the part of ``lambda(a)`` in the kernel of ``[L, .]``:
    matrix elements between eigenvectors of equal Liouvillian eigenvalue.
    """
    weights, freqs = _spectral_parts(g, psi, a)
    return complex(weights[np.abs(freqs) <= tol].sum())


def cesaro_tail_bound(g, psi, a, T, tol=1e-9):
    """Bound ``sum_{f != 0} 2 |w_f| / (|f| T)`` on ``|average(T) - limit|``."""
    weights, freqs = _spectral_parts(g, psi, a)
    moving = np.abs(freqs) > tol
    return float((2 * np.abs(weights[moving]) / (np.abs(freqs[moving]) * T)).sum())


def cesaro_exact(g, psi, a, T):
    """Closed-form finite-``T`` Cesaro average from the spectral decomposition."""
    weights, freqs = _spectral_parts(g, psi, a)
    x = freqs * T
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(np.abs(x) < 1e-12, 1.0, (np.exp(1j * x) - 1) / (1j * x))
    return complex((weights * factor).sum())


def cesaro_average(g, psi, a, T, steps=4096):
    """Quadrature of the Cesaro average over ``[0, T]`` with Simpson's rule.

    A Richardson estimate from the half-resolution rule is compared with
    ``1e-6``; larger errors emit :class:`QuadratureWarning`.
    """
    if not T > 0:
        raise ValueError("T must be positive")
    steps = int(steps) + int(steps) % 2
    weights, freqs = _spectral_parts(g, psi, a)
    t = np.linspace(0.0, T, steps + 1)
    flat_w, flat_f = weights.ravel(), freqs.ravel()
    values = np.exp(1j * np.outer(t, flat_f)) @ flat_w
    fine = integrate.simpson(values, x=t) / T
    coarse = integrate.simpson(values[::2], x=t[::2]) / T
    err = abs(fine - coarse) / 15.0
    if err > 1e-6:
        warnings.warn(f"Cesaro quadrature error estimate {err:.2e} exceeds 1e-6", QuadratureWarning, stacklevel=2)
    return complex(fine)


def perturbed_state(g, c):
    """Normalized vector state ``lambda(c) Omega / ||lambda(c) Omega||``."""
    v = g.lambda_rep(c) @ g.omega
    return v / np.linalg.norm(v)


__all__ = [
    "AntiLinear",
    "GnsTriple",
    "ModularData",
    "cesaro_average",
    "cesaro_exact",
    "cesaro_limit",
    "cesaro_tail_bound",
    "commutant",
    "gns",
    "matrix_units",
    "modular_residuals",
    "perturbed_state",
    "span_residual",
    "tomita",
    "verify_commutant_theorem",
]
