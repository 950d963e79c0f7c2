"""Estimator-style front end to :mod:`thermal_wick.reconstruct`.

``ThermalReconstruction().fit(oracle)`` runs the whole pipeline and exposes
the results as fitted attributes; ``predict`` evaluates reconstructed
real-time Green functions.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import reconstruct as rc
from .oracle import TogfOracle

REPRESENT_CHOICES = ("auto", True, False)


def _op_norm(m):
    return float(np.linalg.norm(m, 2)) if np.size(m) else 0.0


class ThermalReconstruction(BaseEstimator):
    """Reconstruct ``(H, L, J, Omega, lambda, rho)`` from a TOGF oracle.

    Parameters
    ----------
    n_max : int
        Maximal word length.
    m : int
        Number of grid angles in ``(0, beta/2)``.
    delta : float, optional
        Shift used for the Liouvillian.  Defaults to half the grid step; must
        not exceed the grid step so that every basis word can be shifted.
    rel_tol : float
        Relative Gram eigenvalue cutoff for the quotient.
    max_basis : int
        Cap on the number of basis words.
    represent : {"auto", True, False}
        Whether to build ``lambda`` and ``rho``.  ``"auto"`` builds them only
        when every generator has a finite norm bound.
    include_empty : bool
        Add the empty word (the vector ``Omega``) to the basis.

    Attributes
    ----------
    basis_ : WordBasis
    gram_ : ndarray
    quotient_ : Quotient
    rank_ : int
    liouvillian_ : LiouvillianResult
    spectrum_ : ndarray
    space_ : ReconstructedSpace or None
        Only set when representations were built.
    checks_ : dict
        Named residuals of the contract checks.
    """

    def __init__(self, n_max=1, m=1, delta=None, rel_tol=1e-10, max_basis=4096, represent="auto", include_empty=False):
        self.n_max = n_max
        self.m = m
        self.delta = delta
        self.rel_tol = rel_tol
        self.max_basis = max_basis
        self.represent = represent
        self.include_empty = include_empty

    def _validate(self, oracle):
        if not isinstance(oracle, TogfOracle):
            raise TypeError(f"expected a TogfOracle, got {type(oracle).__name__}")
        if int(self.n_max) < 1 or int(self.m) < 1:
            raise ValueError("n_max and m must be at least 1")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must lie in (0, 1)")
        if self.represent not in REPRESENT_CHOICES:
            raise ValueError(f"represent must be one of {REPRESENT_CHOICES}")

    def fit(self, oracle, y=None):
        self._validate(oracle)
        basis = rc.build_basis(oracle, int(self.n_max), int(self.m), self.include_empty, int(self.max_basis))
        delta = basis.step / 2 if self.delta is None else float(self.delta)
        if not 0 < delta <= basis.step * (1 + rc.GRID_SLACK):
            raise ValueError(f"delta={delta} must lie in (0, grid step={basis.step}]")
        G = rc.gram_matrix(oracle, basis)
        q = rc.quotient(G, self.rel_tol)
        _, A = rc.shift_gram(oracle, basis, delta, domain="all")
        _, A2 = rc.shift_gram(oracle, basis, 2 * delta, domain="all")
        lr = rc.extract_liouvillian(G, A, delta, self.rel_tol, A2=A2)

        ev = np.linalg.eigvalsh(G)
        L = lr.L
        normL = _op_norm(L)
        checks = {
            "gram_min_eigenvalue": float(ev[0] / max(ev[-1], np.finfo(float).tiny)),
            "gram_hermiticity": float(np.abs(G - G.conj().T).max()),
            "shift_asymmetry": lr.shift_asymmetry,
            "consistency": lr.consistency,
            "liouvillian_hermiticity": float(np.linalg.norm(L - L.conj().T, 2) / (1 + normL)),
        }

        self.basis_ = basis
        self.delta_ = delta
        self.gram_ = G
        self.quotient_ = q
        self.rank_ = q.rank
        self.liouvillian_ = lr
        self.spectrum_ = lr.spectrum
        self.space_ = None

        build = oracle.satisfies_cstar if self.represent == "auto" else bool(self.represent)
        if build:
            self.space_ = self._build_space(oracle, basis, G, q, L, checks)
        self.checks_ = checks
        self.labels_ = tuple(oracle.labels)
        return self

    def _build_space(self, oracle, basis, G, q, L, checks):
        J = rc.build_J(oracle, basis, q, G)
        omega = rc.omega_coordinates(oracle, basis, q)
        lam, rho = {}, {}
        for g in range(oracle.n_generators):
            lam[g], rho[g] = rc.represent(oracle, basis, q, g)
        star = tuple(oracle.star(g) for g in range(oracle.n_generators))
        space = rc.ReconstructedSpace(
            basis=basis,
            gram=G,
            quotient=q,
            L=L,
            omega=omega,
            J=J,
            lam=lam,
            rho=rho,
            beta=oracle.beta,
            labels=tuple(oracle.labels),
            star=star,
        )
        normL = _op_norm(L)
        U = J.matrix
        checks["J_antiunitarity"] = J.antiunitarity
        checks["J_involution"] = J.involution
        checks["J_omega"] = float(np.linalg.norm(J(omega) - omega))
        checks["JL_anticommutator"] = float(np.linalg.norm(U @ np.conj(L) + L @ U, 2) / (1 + normL))
        checks["L_omega"] = float(np.linalg.norm(L @ omega))
        checks["omega_norm"] = float(abs(np.vdot(omega, omega) - 1))
        norm_excess = adjoint = jsandwich = 0.0
        for g in lam:
            bound = oracle.generators[g].norm_bound
            norm_excess = max(norm_excess, _op_norm(lam[g]) - bound)
            adjoint = max(adjoint, _op_norm(lam[g].conj().T - lam[star[g]]))
            jsandwich = max(jsandwich, _op_norm(rho[g] - J.sandwich(lam[g])))
        checks["lambda_norm_excess"] = float(norm_excess)
        checks["lambda_adjoint"] = float(adjoint)
        checks["rho_J_lambda_J"] = float(jsandwich)
        return space

    def _space(self):
        check_is_fitted(self, "checks_")
        if self.space_ is None:
            raise ValueError("representations were not built; refit with represent=True")
        return self.space_

    def predict(self, words):
        """Reconstructed real-time Green functions for a list of ``[(generator, t), ...]`` words."""
        space = self._space()
        return np.array([rc.reconstructed_rtgf(space, w) for w in words], dtype=complex)

    def transform(self, words):
        """Whitened coordinates of ``lambda(a_n) ... lambda(a_1) Omega`` at zero gaps for each word of labels."""
        space = self._space()
        return np.array([space.iterated_vector(list(w), [0.0] * (len(w) - 1)) for w in words])

    def kms_residual(self, a, b, t_grid):
        return rc.realtime_kms_residual(self._space(), a, b, t_grid)

    def report(self):
        """Plain-data summary of the fit."""
        check_is_fitted(self, "checks_")
        return {
            "basis_size": len(self.basis_),
            "rank": int(self.rank_),
            "cutoff": self.quotient_.cutoff,
            "rel_tol": self.rel_tol,
            "delta": self.delta_,
            "spectrum": [float(x) for x in self.spectrum_],
            "consistency": self.liouvillian_.consistency,
            "checks": {k: (None if v is None else float(v)) for k, v in self.checks_.items()},
        }
