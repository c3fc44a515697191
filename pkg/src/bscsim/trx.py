"""SINR, throughput and closed-form transceiver designs.

All SINRs use the backscatter model: tag k is excited with power
q_k = |h_k^T f|^2 (plus the optional tag-noise term), and the reader decodes
with unit-norm columns g_k against interference from the other tags plus
modulation-normalized noise sigma2_wR / a_bar^2.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import SimConfig
from .numerics import ConditioningError, gen_eig_max


@dataclass(frozen=True)
class TrxDesign:
    """Precoding vector (power-constrained) plus detector matrix (unit columns)."""

    f: np.ndarray  # (N,) complex, ||f||^2 <= p_t
    G: np.ndarray  # (N, M) complex, unit-norm columns


@dataclass(frozen=True)
class RateReport:
    gamma: np.ndarray   # (M,) SINRs
    rates: np.ndarray   # (M,) throughputs, bits/s/Hz
    min_rate: float
    sigma_r: float      # population std of the per-tag rates (0 for M = 1)


def validate_design(design: TrxDesign, cfg: SimConfig, tol: float = 1e-9) -> None:
    """Raise unless the power constraint and unit detector columns hold."""
    power = float(np.vdot(design.f, design.f).real)
    if power > cfg.p_t + tol:
        raise ValueError(f"precoder power {power} exceeds budget {cfg.p_t}")
    norms = np.linalg.norm(design.G, axis=0)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ValueError("detector columns are not unit norm")


def _gammas(f: np.ndarray, G: np.ndarray, H: np.ndarray, cfg: SimConfig) -> np.ndarray:
    q = np.abs(H.T @ f) ** 2 + cfg.sigma2_wT
    C = np.abs(G.conj().T @ H) ** 2        # C[k, i] = |g_k^H h_i|^2
    P = C * q[None, :]
    sig = np.diag(P).copy()
    interf = P.sum(axis=1) - sig
    noise = cfg.sigma2_bar * np.linalg.norm(G, axis=0) ** 2
    return sig / (interf + noise)


def sinr(k: int, f: np.ndarray, G: np.ndarray, H: np.ndarray, cfg: SimConfig) -> float:
    """SINR of tag k for precoder f, detectors G over channel columns H."""
    N, M = H.shape
    if f.shape != (N,) or G.shape != (N, M):
        raise ValueError("dimension mismatch between f, G and H")
    if not 0 <= k < M:
        raise ValueError(f"tag index {k} out of range for M={M}")
    return float(_gammas(f, G, H, cfg)[k])


def rate_report(f: np.ndarray, G: np.ndarray, H: np.ndarray, cfg: SimConfig) -> RateReport:
    """Per-tag throughputs with the (tau - tau_c)/tau CE-overhead prefactor."""
    gamma = _gammas(f, G, H, cfg)
    rates = cfg.rate_prefactor * np.log2(1.0 + gamma)
    return RateReport(
        gamma=gamma,
        rates=rates,
        min_rate=float(rates.min()),
        sigma_r=float(np.std(rates)),
    )


def _unit_columns(G: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(G, axis=0)
    bad = norms <= 0
    if bad.any():
        warnings.warn("zero detector column replaced by e1")
        G = G.copy()
        G[0, bad] = 1.0
        norms = np.linalg.norm(G, axis=0)
    return G / norms


def detector_mmse(f: np.ndarray, H_hat: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Optimal linear detector for a given precoder, unit-norm columns.

    Column k is (I + sum_i q_i h_i h_i^H / sigma2_bar)^{-1} h_k, normalized.
    The noise constant is the modulation-normalized sigma2_wR / a_bar^2, the
    same one the SINR uses, so each column maximizes its tag's SINR.
    """
    N = H_hat.shape[0]
    q = np.abs(H_hat.T @ f) ** 2
    Ai = np.eye(N) + (H_hat * q[None, :]) @ H_hat.conj().T / cfg.sigma2_bar
    return _unit_columns(np.linalg.solve(Ai, H_hat))


def detector_mrc(H_hat: np.ndarray) -> np.ndarray:
    """Maximum-ratio combining: normalized channel estimates."""
    return _unit_columns(H_hat.copy())


def zf_matrix(H_hat: np.ndarray) -> np.ndarray:
    """Unnormalized zero-forcing detector H (H^H H)^{-1}; needs N >= M."""
    N, M = H_hat.shape
    if N < M:
        raise ConditioningError("zero forcing needs at least as many antennas as tags")
    gram = H_hat.conj().T @ H_hat
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise ConditioningError("estimated channel matrix is rank deficient")
    return np.linalg.solve(gram.conj().T, H_hat.conj().T).conj().T


def detector_zf(H_hat: np.ndarray) -> np.ndarray:
    """Zero-forcing detector with unit-norm columns."""
    return _unit_columns(zf_matrix(H_hat))


def precoder_pertag(k: int, G: np.ndarray, H_hat: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """SINR-optimal precoder for tag k with the detector held fixed.

    Dominant generalized eigenvector of (Gk, Gk_bar) where Gk is the tag's
    weighted conjugate outer product and Gk_bar collects interference plus
    the scaled noise identity; scaled to the full power budget.
    """
    N, M = H_hat.shape
    g = G[:, k]
    w = np.abs(g.conj() @ H_hat) ** 2  # |g_k^H h_i|^2
    conj_outer = np.einsum("ni,mi->inm", H_hat.conj(), H_hat)  # h_i^* h_i^T
    Gk = w[k] * conj_outer[k]
    others = [i for i in range(M) if i != k]
    Gbar = np.einsum("i,inm->nm", w[others], conj_outer[others]) if others else 0.0
    Gbar = Gbar + (cfg.sigma2_bar * np.linalg.norm(g) ** 2 / cfg.p_t) * np.eye(N)
    pair = gen_eig_max(Gk, Gbar)
    return np.sqrt(cfg.p_t) * pair.vector


def precoder_benchmark(H_hat: np.ndarray, beta: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Reference precoder: inverse-path-gain-weighted sum of per-tag MRT
    directions, rescaled to the exact power budget."""
    if np.any(beta <= 0):
        raise ValueError("path gains must be positive")
    inv2 = 1.0 / beta**2
    weights = np.sqrt(inv2 / inv2.sum())
    dirs = H_hat.conj() / np.linalg.norm(H_hat, axis=0)
    f = dirs @ weights
    return np.sqrt(cfg.p_t) * f / np.linalg.norm(f)
