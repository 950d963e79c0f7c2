r"""Exact thermal quantum mechanics of finite-dimensional systems.

A :class:`ThermalSystem` holds a Hamiltonian :math:`H`, commuting charges
:math:`Q_i` with chemical potentials :math:`\mu_i` and an inverse temperature
:math:`\beta`.  Everything is computed in the eigenbasis of the grand-canonical
Hamiltonian :math:`H_\mu = H - \sum_i \mu_i Q_i`, which makes complex-time
evolution exact and entire in the time argument.

Green functions at complex times :math:`z_1,\dots,z_n` with cyclically ordered
imaginary parts are evaluated as

.. math::

    F(a_1,z_1,\dots,a_n,z_n) = \frac{1}{Z'}\,\mathrm{tr}\big(
        D(c_0)\,\tilde a_1\,D(c_1)\,\tilde a_2 \cdots D(c_{n-1})\,\tilde a_n\big),
    \qquad D(c) = \mathrm{diag}(e^{-c\,(E - E_{\min})}),

with :math:`c_0 = \beta + i(z_n - z_1)` and :math:`c_j = -i(z_{j+1} - z_j)`.
All :math:`\mathrm{Re}\,c_j \ge 0` on the closed tube, so every factor is a
contraction and no large exponentials appear.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_square_matrix, check_hermitian, check_positive, operator_norm
from .exceptions import OrderViolation, TubeViolation

ORDER_SLACK = 1e-12
COMMUTATOR_RTOL = 1e-10


@dataclass(frozen=True)
class Observable:
    """A labeled complex square matrix."""

    label: str
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_square_matrix(self.matrix, self.label))

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def norm(self):
        return operator_norm(self.matrix)

    def adjoint(self, label=None):
        return Observable(label or f"{self.label}*", self.matrix.conj().T)

    def __matmul__(self, other):
        return Observable(f"{self.label}.{other.label}", self.matrix @ other.matrix)


@dataclass(frozen=True)
class GibbsState:
    rho: np.ndarray
    logXi: float


@dataclass(frozen=True)
class ThermalSystem:
    """Finite-dimensional Hamiltonian system at inverse temperature ``beta``.

    Parameters
    ----------
    H : (d, d) array_like
        Hermitian Hamiltonian.
    beta : float
        Inverse temperature, must be positive.
    charges : sequence of (d, d) array_like, optional
        Hermitian conserved charges commuting with ``H``.
    mu : sequence of float, optional
        Chemical potentials, one per charge.

    Raises
    ------
    NonHermitianInput
        If ``H`` or a charge fails the Hermiticity check.
    ValueError
        If a charge does not commute with ``H`` or ``beta <= 0``.
    """

    H: np.ndarray
    beta: float
    charges: tuple = ()
    mu: tuple = ()
    _energies: np.ndarray = field(init=False, repr=False, compare=False)
    _basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        H = check_hermitian(self.H, "H")
        beta = check_positive(self.beta, "beta")
        charges = tuple(check_hermitian(q, f"Q_{i}") for i, q in enumerate(self.charges))
        mu = tuple(float(m) for m in self.mu)
        if len(mu) != len(charges):
            raise ValueError(f"got {len(charges)} charges but {len(mu)} chemical potentials")
        hnorm = operator_norm(H)
        for i, q in enumerate(charges):
            if q.shape != H.shape:
                raise ValueError(f"Q_{i} has shape {q.shape}, expected {H.shape}")
            comm = operator_norm(H @ q - q @ H)
            if comm > COMMUTATOR_RTOL * hnorm * operator_norm(q):
                raise ValueError(f"Q_{i} does not commute with H (||[H, Q]|| = {comm:.3e})")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "charges", charges)
        object.__setattr__(self, "mu", mu)
        E, U = np.linalg.eigh(self.H_mu)
        object.__setattr__(self, "_energies", E)
        object.__setattr__(self, "_basis", U)

    @property
    def dim(self):
        return self.H.shape[0]

    @property
    def H_mu(self):
        out = self.H.copy()
        for m, q in zip(self.mu, self.charges):
            out = out - m * q
        return out

    @property
    def energies(self):
        """Eigenvalues of ``H_mu`` in ascending order."""
        return self._energies

    @property
    def eigenbasis(self):
        return self._basis

    def to_eigenbasis(self, a):
        U = self._basis
        return U.conj().T @ _matrix(a) @ U

    def from_eigenbasis(self, a):
        U = self._basis
        return U @ a @ U.conj().T

    def bohr_frequencies(self):
        """Sorted multiset ``{E_i - E_j}`` of the grand-canonical Hamiltonian."""
        E = self._energies
        return np.sort((E[:, None] - E[None, :]).ravel())


def _matrix(a):
    return a.matrix if isinstance(a, Observable) else np.asarray(a, dtype=complex)


def gibbs_state(sys):
    """Gibbs density matrix ``exp(-beta H_mu) / Xi`` and ``log Xi``."""
    E = sys.energies
    shifted = -sys.beta * (E - E.min())
    w = np.exp(shifted)
    total = w.sum()
    logXi = float(-sys.beta * E.min() + np.log(total))
    rho = sys.from_eigenbasis(np.diag(w / total))
    return GibbsState(rho=0.5 * (rho + rho.conj().T), logXi=logXi)


def evolve(sys, a, z):
    """Heisenberg evolution ``e^{izH_mu} a e^{-izH_mu}`` at complex time ``z``."""
    E = sys.energies
    z = complex(z)
    phase = np.exp(1j * z * (E[:, None] - E[None, :]))
    out = sys.from_eigenbasis(sys.to_eigenbasis(a) * phase)
    label = a.label if isinstance(a, Observable) else "a"
    return Observable(f"alpha_{z}({label})", out)


def check_tube(sys, zs, slack=ORDER_SLACK):
    """Raise ``TubeViolation`` unless ``Im z_1 <= ... <= Im z_n <= Im z_1 + beta``."""
    im = np.imag(np.asarray(zs, dtype=complex))
    if im.size < 2:
        return
    tol = slack * max(1.0, sys.beta)
    if np.any(np.diff(im) < -tol) or im[-1] - im[0] > sys.beta + tol:
        raise TubeViolation(f"imaginary parts {im.tolist()} are not cyclically ordered within beta={sys.beta}")


def green_function(sys, word):
    """Thermal Green function ``tr(rho prod_j alpha_{z_j}(a_j))`` on the closed tube.

    Parameters
    ----------
    sys : ThermalSystem
    word : sequence of (observable, complex time)
        Product is taken in the listed order.

    Returns
    -------
    complex
    """
    if len(word) == 0:
        return 1.0 + 0j
    ops = [sys.to_eigenbasis(a) for a, _ in word]
    zs = np.array([complex(z) for _, z in word])
    check_tube(sys, zs)
    E = sys.energies - sys.energies.min()
    beta = sys.beta
    c = np.empty(len(zs), dtype=complex)
    c[0] = beta + 1j * (zs[-1] - zs[0])
    c[1:] = -1j * np.diff(zs)
    # Re c >= 0 on the tube; clip rounding noise so factors stay contractions
    c.real = np.maximum(c.real, 0.0)
    acc = np.exp(-c[0] * E)[:, None] * ops[0]
    for cj, op in zip(c[1:], ops[1:]):
        acc = (acc * np.exp(-cj * E)[None, :]) @ op
    Zp = np.exp(-beta * E).sum()
    return complex(np.trace(acc) / Zp)


def rtgf(sys, word):
    """Real-time thermal Green function for ``word = [(a_j, t_j), ...]``."""
    return green_function(sys, [(a, float(t)) for a, t in word])


def check_cyclic_order(taus, beta, slack=ORDER_SLACK):
    """Raise ``OrderViolation`` unless ``tau_1 <= ... <= tau_n <= tau_1 + beta``."""
    taus = np.asarray(taus, dtype=float)
    if taus.size < 2:
        return
    tol = slack * max(1.0, beta)
    if np.any(np.diff(taus) < -tol) or taus[-1] - taus[0] > beta + tol:
        raise OrderViolation(f"angles {taus.tolist()} are not cyclically ordered for beta={beta}")


def is_cyclically_ordered(taus, beta, slack=ORDER_SLACK):
    try:
        check_cyclic_order(taus, beta, slack)
    except OrderViolation:
        return False
    return True


def togf(sys, word):
    """Temperature-ordered Green function ``F(a_1, i tau_1, ..., a_n, i tau_n)``.

    Raises
    ------
    OrderViolation
        If the angles are not cyclically ordered within ``beta``.
    """
    taus = [float(t) for _, t in word]
    check_cyclic_order(taus, sys.beta)
    return green_function(sys, [(a, 1j * t) for (a, _), t in zip(word, taus)])


def kms_residual(sys, a, b, t_grid):
    """Max over ``t_grid`` of ``|<alpha_t(a) b> - <b alpha_{t + i beta}(a)>|``."""
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t_grid.size == 0:
        raise ValueError("t_grid must be non-empty")
    worst = 0.0
    for t in t_grid:
        lhs = green_function(sys, [(a, t), (b, 0.0)])
        rhs = green_function(sys, [(b, 0.0), (a, t + 1j * sys.beta)])
        worst = max(worst, abs(lhs - rhs))
    return worst
