"""Two-phase channel-estimation protocol with ambient-reflection suppression.

Phase (1a): all tags silent (amplitude a0), the reader sounds the field with
orthogonal pilots and least-squares-estimates the ambient reflection matrix.
Phase (1b): tag-by-tag preamble; after subtracting the phase-(1a) estimate,
each tag's outer product h_k h_k^T is recovered from an exact
Kronecker-factored normal-equations solve, and h_k itself (up to sign) from
the dominant eigenpair of a 2N x 2N real symmetric embedding.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SimConfig, make_pilots, make_preamble
from .numerics import ConditioningError, eig_sym_max, pinv, sample_cgauss


@dataclass(frozen=True)
class CeObservation:
    """Raw receive matrices from the two CE subphases."""

    Y0: np.ndarray  # (N, N), phase (1a)
    Y1: np.ndarray  # (N*M, N), phase (1b), one N x N block per tag subphase


@dataclass(frozen=True)
class CeResult:
    """Channel estimates for one coherence block.

    lam[k] equals ||h_hat_k||^2; degenerate[k] marks an all-noise subphase
    whose estimate collapsed to the zero vector.
    """

    H_U_hat: np.ndarray   # (N, N)
    h_hat: np.ndarray     # (N, M), column k estimates tag k (sign-ambiguous)
    lam: np.ndarray       # (M,)
    residual: float       # LS objective at the estimate
    degenerate: np.ndarray


def scaled_pilots(cfg: SimConfig, S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Energy-scaled pilot matrices for the (1a) and per-tag (1b) subphases.

    A subphase of n samples carries n/N times the energy of the structural
    N-sample pilot block, so S_x = sqrt(n_x / N) * S.
    """
    n0 = cfg.subphase_samples(cfg.tau_c0)
    nk = cfg.subphase_samples(cfg.tau_ck)
    return S * np.sqrt(n0 / cfg.N), S * np.sqrt(nk / cfg.N)


def simulate_ce_phase(
    cfg: SimConfig,
    real: ChannelRealization,
    S: np.ndarray,
    A: np.ndarray,
    rng: np.random.Generator,
) -> CeObservation:
    """Generate the receive matrices of both CE subphases.

    Y0 = (H_U + sum_k a0 h_k h_k^T) S0 + W0; block k of Y1 is
    (sum_m A[k,m] h_m h_m^T + H_U) S1 + W1_k. Noise draw order: W0 then W1.
    """
    N, M = cfg.N, cfg.M
    if real.h.shape != (N, M) or A.shape != (M, M) or S.shape != (N, N):
        raise ValueError("inconsistent dimensions between config, channels and pilots")
    S0, S1 = scaled_pilots(cfg, S)
    outer = np.einsum("nk,mk->knm", real.h, real.h)  # (M, N, N), h_k h_k^T
    W0 = sample_cgauss(rng, (N, N), cfg.sigma2_w0)
    Y0 = (real.H_U + cfg.a0 * outer.sum(axis=0)) @ S0 + W0
    W1 = sample_cgauss(rng, (M * N, N), cfg.sigma2_w1)
    blocks = np.einsum("km,mij->kij", A, outer) + real.H_U
    Y1 = (blocks @ S1).reshape(M * N, N) + W1
    return CeObservation(Y0=Y0, Y1=Y1)


def estimate_uar(Y0: np.ndarray, S0: np.ndarray) -> np.ndarray:
    """Least-squares ambient-reflection estimate H_U_hat = Y0 pinv(S0)."""
    sv = np.linalg.svd(S0, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ConditioningError("pilot matrix is rank deficient")
    return Y0 @ pinv(S0)


def suppress_uar(Y1: np.ndarray, H_U_hat: np.ndarray, S1: np.ndarray) -> np.ndarray:
    """Subtract the estimated ambient reflection from every (1b) block."""
    M = Y1.shape[0] // H_U_hat.shape[0]
    return Y1 - np.tile(H_U_hat @ S1, (M, 1))


def _preamble_solve(A: np.ndarray) -> np.ndarray:
    """(A^H A)^{-1} A^H for the (real symmetric) preamble matrix."""
    w = np.linalg.eigvalsh(A)
    if np.min(np.abs(w)) <= 1e-12 * np.max(np.abs(w)):
        raise ConditioningError("preamble matrix is singular (a0 == a1?)")
    return np.linalg.solve(A.T @ A, A.T)


def build_Ytilde(Y: np.ndarray, S1: np.ndarray, A: np.ndarray, k: int) -> np.ndarray:
    """Matched-filtered, symmetrized observation for tag k.

    Solves the normal equations for the stacked outer products exactly,
    using the Kronecker-factored inverse (A^H A)^{-1} (x) (S S^H)^{-1}, and
    returns the symmetrized k-th N x N block, which equals h_k h_k^T in the
    noiseless suppressed case.
    """
    N = S1.shape[0]
    M = A.shape[0]
    if not 0 <= k < M:
        raise ValueError(f"tag index {k} out of range for M={M}")
    W = _preamble_solve(A)
    Sright = S1.conj().T @ np.linalg.inv(S1 @ S1.conj().T)
    blocks = Y.reshape(M, N, N)
    Gk = np.einsum("m,mij->ij", W[k], blocks) @ Sright
    return (Gk + Gk.T) / 2.0


def lse_from_Ytilde(Ytilde: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-tag estimate from the dominant eigenpair of the real embedding.

    Z = [[Re Y, Im Y], [Im Y, -Re Y]] is real symmetric; its largest
    eigenvalue equals ||h_hat||^2 and the eigenvector stacks the real and
    imaginary parts of h_hat. The spectrum is sign-symmetric, so a
    (numerically) nonpositive top eigenvalue means an all-noise observation
    and the estimate collapses to zero.
    """
    N = Ytilde.shape[0]
    Z = np.block(
        [[Ytilde.real, Ytilde.imag], [Ytilde.imag, -Ytilde.real]]
    )
    pair = eig_sym_max(Z)
    scale = max(np.max(np.abs(Z)), 0.0)
    if pair.value <= 1e-14 * scale or scale == 0.0:
        return np.zeros(N, dtype=np.complex128), 0.0
    h = np.sqrt(pair.value) * (pair.vector[:N] + 1j * pair.vector[N:])
    return h, float(pair.value)


def run_ce(
    cfg: SimConfig,
    real: ChannelRealization,
    rng: np.random.Generator,
    suppress: bool = True,
) -> CeResult:
    """Full CE pipeline for one coherence block.

    With suppress=False the phase-(1a) estimate is skipped and Y1 is used
    directly (the no-ambient-reflection benchmark mode).
    """
    N, M = cfg.N, cfg.M
    S = make_pilots(cfg)
    A = make_preamble(cfg)
    S0, S1 = scaled_pilots(cfg, S)
    obs = simulate_ce_phase(cfg, real, S, A, rng)
    if suppress:
        H_U_hat = estimate_uar(obs.Y0, S0)
        Y = suppress_uar(obs.Y1, H_U_hat, S1)
        # The subtracted estimate contains the a0 leakage sum of all tags,
        # so the suppressed blocks follow the effective preamble A - a0*1
        # exactly; unmixing with the raw A would bleed the strong tags into
        # every weak tag's estimate.
        A_fit = A - cfg.a0 * np.ones_like(A)
    else:
        H_U_hat = np.zeros((N, N), dtype=np.complex128)
        Y = obs.Y1
        A_fit = A
    h_hat = np.zeros((N, M), dtype=np.complex128)
    lam = np.zeros(M)
    degenerate = np.zeros(M, dtype=bool)
    for k in range(M):
        Yt = build_Ytilde(Y, S1, A_fit, k)
        h_k, lam_k = lse_from_Ytilde(Yt)
        h_hat[:, k] = h_k
        lam[k] = lam_k
        degenerate[k] = lam_k == 0.0
    if degenerate.any():
        warnings.warn("degenerate all-noise channel estimate set to zero")
    residual = ls_objective(Y, S1, A_fit, h_hat)
    return CeResult(
        H_U_hat=H_U_hat, h_hat=h_hat, lam=lam, residual=residual, degenerate=degenerate
    )


def ls_objective(
    Y: np.ndarray, S1: np.ndarray, A: np.ndarray, h: np.ndarray
) -> float:
    """LS objective ||Y - model(h)||_F^2 for stacked candidate channels."""
    M = A.shape[0]
    outer = np.einsum("nk,mk->knm", h, h)
    blocks = np.einsum("km,mij->kij", A, outer)
    model = (blocks @ S1).reshape(M * S1.shape[0], S1.shape[1])
    return float(np.linalg.norm(Y - model) ** 2)
