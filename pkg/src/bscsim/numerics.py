"""Dense complex/real linear-algebra kernels and random sampling.

Everything here is pure: same inputs give bit-identical outputs, values are
never mutated, and results are safe to share across concurrent trials.
Matrices stay small (<= 40 x 40), so LAPACK via numpy/scipy is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


class ConditioningError(ValueError):
    """Input matrix is singular or indefinite beyond the allowed tolerance."""


@dataclass(frozen=True)
class EigPair:
    """Dominant eigenpair: algebraically largest eigenvalue and a unit vector."""

    value: float
    vector: np.ndarray


def _check_square(A: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def _fix_sign(v: np.ndarray) -> np.ndarray:
    """Make the first nonzero component positive (real vectors)."""
    scale = np.max(np.abs(v))
    if scale == 0.0:
        return v
    idx = np.flatnonzero(np.abs(v) > 1e-12 * scale)
    if idx.size and v[idx[0]] < 0:
        return -v
    return v


def _fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate so the largest-magnitude component is real and positive."""
    j = int(np.argmax(np.abs(v)))
    pivot = v[j]
    if np.abs(pivot) == 0.0:
        return v
    return v * (np.conj(pivot) / np.abs(pivot))


def _top_eigvec(w: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Canonical unit vector in the top eigenspace.

    For a simple top eigenvalue this is the eigenvector itself; for a
    degenerate one, the normalized projection of the first standard basis
    vector with a nonzero footprint, so ties resolve deterministically
    (identity -> e1).
    """
    scale = max(abs(w[-1]), abs(w[0]), 1e-300)
    top = V[:, w >= w[-1] - 1e-12 * scale]
    if top.shape[1] == 1:
        return top[:, 0].copy()
    for i in range(V.shape[0]):
        proj = top @ top[i, :].conj()
        nrm = np.linalg.norm(proj)
        if nrm > 1e-8:
            return proj / nrm
    return top[:, 0].copy()


def eig_sym_max(A: np.ndarray) -> EigPair:
    """Largest eigenpair of a real symmetric matrix.

    Sign convention: the first nonzero component of the eigenvector is
    positive, so results are deterministic for a fixed input.
    """
    A = _check_square(A)
    if np.iscomplexobj(A):
        if np.max(np.abs(A.imag)) > 1e-10 * max(np.max(np.abs(A)), 1e-300):
            raise ValueError("eig_sym_max expects a real matrix")
        A = A.real
    scale = max(np.max(np.abs(A)), 1e-300)
    if np.max(np.abs(A - A.T)) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh((A + A.T) / 2.0)
    v = _fix_sign(_top_eigvec(w, V))
    return EigPair(float(w[-1]), v)


def eig_herm_max(A: np.ndarray) -> EigPair:
    """Largest eigenpair of a Hermitian matrix.

    Phase convention: the largest-magnitude component of the eigenvector is
    real and positive.
    """
    A = _check_square(A).astype(np.complex128)
    scale = max(np.max(np.abs(A)), 1e-300)
    if np.max(np.abs(A - A.conj().T)) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, V = np.linalg.eigh((A + A.conj().T) / 2.0)
    v = _fix_phase(_top_eigvec(w, V))
    return EigPair(float(w[-1]), v)


def gen_eig_max(A: np.ndarray, B: np.ndarray) -> EigPair:
    """Dominant generalized eigenpair of (A, B) with B positive definite.

    Solved by Cholesky whitening, B = L L^H, then an ordinary Hermitian
    eigenproblem on L^-1 A L^-H; never by forming the unsymmetric B^-1 A.
    The vector is normalized to unit Euclidean norm, largest component
    real-positive.
    """
    A = _check_square(A).astype(np.complex128)
    B = _check_square(B).astype(np.complex128)
    if A.shape != B.shape:
        raise ValueError("A and B must have matching shapes")
    wB = np.linalg.eigvalsh((B + B.conj().T) / 2.0)
    if wB[0] <= 1e-12 * max(wB[-1], 0.0):
        raise ConditioningError("B is not positive definite within tolerance")
    L = np.linalg.cholesky((B + B.conj().T) / 2.0)
    Y = scipy.linalg.solve_triangular(L, A, lower=True)
    C = scipy.linalg.solve_triangular(L, Y.conj().T, lower=True).conj().T
    w, V = np.linalg.eigh((C + C.conj().T) / 2.0)
    v = scipy.linalg.solve_triangular(L.conj().T, V[:, -1], lower=False)
    v = v / np.linalg.norm(v)
    return EigPair(float(w[-1]), _fix_phase(v))


def pinv(A: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse, singular values below 1e-12 of the
    largest treated as zero."""
    return np.linalg.pinv(np.asarray(A, dtype=np.complex128), rcond=1e-12)


def sample_cgauss(rng: np.random.Generator, n, variance: float) -> np.ndarray:
    """i.i.d. circularly-symmetric complex Gaussian draws, CN(0, variance).

    Real and imaginary parts are each N(0, variance/2), drawn in that order
    so streams are reproducible per seed. `n` may be an int or a shape tuple.
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(n)
    im = rng.standard_normal(n)
    return scale * (re + 1j * im)
