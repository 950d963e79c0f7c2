"""Analytic-structure checks for thermal Green functions.

Residual functions here take an oracle (or, for the tube bound, an exact
system) and return plain floats so that callers can pair them with a
tolerance.  :func:`build_pi_matrix` assembles the reflection positivity matrix.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .exceptions import OrderViolation, ReflectionRangeError
from .system import check_cyclic_order, check_tube, green_function

PSD_RTOL = 1e-9


def reflect(oracle, word, period):
    """Reverse the word, star every letter and send ``tau -> period - tau``."""
    return [(oracle.star(oracle.index(g)), period - float(t)) for g, t in reversed(word)]


def pair_word(oracle, v, w):
    """The word whose oracle value is the inner product ``<v, w>`` of two half-words."""
    return [(oracle.index(g), float(t)) for g, t in v] + reflect(oracle, w, oracle.beta)


def cyclic_kms_residual(oracle, word, j):
    r"""``|phi(word) - phi(word rotated at j, with tau + beta on the moved letters)|``."""
    word = [(oracle.index(g), float(t)) for g, t in word]
    n = len(word)
    if not 1 <= j <= n - 1:
        raise OrderViolation(f"split index must satisfy 1 <= j <= n - 1, got j={j}, n={n}")
    check_cyclic_order([t for _, t in word], oracle.beta)
    rotated = word[j:] + [(g, t + oracle.beta) for g, t in word[:j]]
    return abs(oracle(word) - oracle(rotated))


def translation_residual(oracle, word, tau_shift):
    shifted = [(g, float(t) + tau_shift) for g, t in word]
    return abs(oracle(word) - oracle(shifted))


@dataclass(frozen=True)
class PiMatrix:
    """Reflection positivity matrix and the half-words it was built from."""

    entries: np.ndarray
    half_words: tuple

    @property
    def eigenvalues(self):
        herm = 0.5 * (self.entries + self.entries.conj().T)
        return np.linalg.eigvalsh(herm)

    @property
    def min_eigenvalue(self):
        return float(self.eigenvalues[0])

    @property
    def hermiticity_residual(self):
        scale = max(1.0, float(np.abs(self.entries).max(initial=0.0)))
        return float(np.abs(self.entries - self.entries.conj().T).max(initial=0.0)) / scale

    def is_psd(self, rtol=PSD_RTOL):
        ev = self.eigenvalues
        return bool(ev[0] >= -rtol * max(1.0, ev[-1]))


def _check_half_word(word, beta):
    taus = [float(t) for _, t in word]
    if any(not 0.0 < t < beta / 2 for t in taus) or any(np.diff(taus) <= 0):
        raise ReflectionRangeError(f"half-word angles {taus} must satisfy 0 < tau_1 < ... < tau_n < beta/2")


def build_pi_matrix(oracle, half_words):
    r"""``Pi_ij = phi(word_i followed by the star-reversed word_j reflected about beta)``."""
    half_words = tuple(tuple((oracle.index(g), float(t)) for g, t in w) for w in half_words)
    for w in half_words:
        _check_half_word(w, oracle.beta)
    N = len(half_words)
    entries = np.empty((N, N), dtype=complex)
    for i, v in enumerate(half_words):
        for k, w in enumerate(half_words):
            entries[i, k] = oracle(pair_word(oracle, v, w))
    return PiMatrix(entries=entries, half_words=half_words)


def tube_bound_check(sys, observables, samples):
    r"""Max over samples of ``|F(a_1, z_1, ..., a_n, z_n)| - prod_j ||a_j||``.

    Raises
    ------
    TubeViolation
        If a sample is outside the closed tube by more than ``1e-12``.
    """
    bound = float(np.prod([np.linalg.norm(np.asarray(getattr(a, "matrix", a)), 2) for a in observables]))
    worst = -np.inf
    for zs in samples:
        zs = np.asarray(zs, dtype=complex)
        check_tube(sys, zs)
        value = green_function(sys, list(zip(observables, zs)))
        worst = max(worst, abs(value) - bound)
    return float(worst)


def sample_closed_tube(n, beta, n_interior=64, t_scale=5.0, seed=0):
    """Complex time samples on the closed tube of ordered imaginary parts.

    Interior points come from a scrambled Sobol sequence (imaginary parts are
    the sorted coordinates scaled into ``[0, beta]``, real parts uniform in
    ``[-t_scale, t_scale]``).  For every face ``Im z_{j+1} = Im z_j`` and the
    face ``Im z_n = Im z_1 + beta`` the same points are projected onto it.
    """
    sobol = qmc.Sobol(d=2 * n, scramble=True, seed=seed)
    pts = sobol.random(int(2 ** np.ceil(np.log2(max(n_interior, 2)))))[:n_interior]
    im = np.sort(pts[:, :n], axis=1) * beta
    re = (2 * pts[:, n:] - 1) * t_scale
    samples = [re_row + 1j * im_row for re_row, im_row in zip(re, im)]
    faces = []
    for j in range(n - 1):
        face = im.copy()
        face[:, j + 1] = face[:, j]
        faces.append(np.sort(face, axis=1))
    if n >= 2:
        face = im.copy()
        face[:, 0] = 0.0
        face[:, -1] = beta
        faces.append(face)
    for face in faces:
        samples.extend(re_row + 1j * im_row for re_row, im_row in zip(re, face))
    return samples
