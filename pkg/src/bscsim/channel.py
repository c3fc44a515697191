"""Scenario geometry, fading channels, ambient reflections, pilots, preamble.

One coherence block: M single-antenna tags dropped uniformly on an L x L
field with the N-antenna reader at the center. Per-tag channels are
CN(0, beta_k I_N) with beta_k from the inverse-power path-loss law; the
unintended ambient reflection (UAR) matrix H_U has i.i.d. CN(0, sigma2_HU)
entries. Time is bookkept in block fractions (tau = 1.0); pilot energy per
CE subphase scales with the subphase's sample count, derived from
samples_per_block.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .numerics import sample_cgauss

SPEED_OF_LIGHT = 3.0e8

# Distances are clamped below this so the far-field path-loss law stays valid.
MIN_DISTANCE_M = 1.0


@dataclass
class SimConfig:
    """All scenario parameters for one simulation.

    Powers are in watts, timing fields are fractions of the coherence block
    (tau = 1.0). samples_per_block converts fractions to pilot sample counts
    (default 500 = 1 ms block / 2 us samples).
    """

    N: int = 4
    M: int = 4
    L: float = 100.0
    p_t: float = 1.0
    sigma2_wR: float = 1e-17
    sigma2_wT: float = 0.0
    sigma2_w0: float = 1e-17
    sigma2_w1: float = 1e-17
    sigma2_HU: float = 1e-12
    carrier_freq: float = 915e6
    rho: float = 3.0
    a0: float = 0.1
    a1: float = 0.78
    a_bar: float = 0.3162
    tau: float = 1.0
    tau_c0: float = 0.02
    tau_ck: float = 0.02
    samples_per_block: float = 500.0
    K: int = 160
    it_max: int = 15
    epsilon: float = 1e-3
    seed: int = 1

    def validate(self) -> "SimConfig":
        if self.N < 1 or self.M < 1:
            raise ValueError("N and M must be at least 1")
        if self.p_t <= 0:
            raise ValueError("p_t must be positive")
        for name in ("sigma2_wR", "sigma2_wT", "sigma2_w0", "sigma2_w1", "sigma2_HU"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0 <= self.a0 < self.a1 <= 1):
            raise ValueError("need 0 <= a0 < a1 <= 1")
        if not (0 < self.a_bar <= 1):
            raise ValueError("a_bar must be in (0, 1]")
        if self.tau_c0 <= 0 or self.tau_ck <= 0:
            raise ValueError("CE subphase fractions must be positive")
        if self.tau_c0 + self.M * self.tau_ck > self.tau + 1e-12:
            raise ValueError("CE time exceeds the coherence block")
        if self.L <= 0 or self.rho <= 0 or self.carrier_freq <= 0:
            raise ValueError("L, rho and carrier_freq must be positive")
        if self.K < 1 or self.it_max < 1 or self.epsilon <= 0:
            raise ValueError("K, it_max must be >= 1 and epsilon > 0")
        if self.samples_per_block <= 0:
            raise ValueError("samples_per_block must be positive")
        return self

    @property
    def tau_c(self) -> float:
        return self.tau_c0 + self.M * self.tau_ck

    @property
    def rate_prefactor(self) -> float:
        return (self.tau - self.tau_c) / self.tau

    @property
    def sigma2_bar(self) -> float:
        """Reader noise power normalized by the mean tag-modulation amplitude."""
        return self.sigma2_wR / self.a_bar**2

    def subphase_samples(self, fraction: float) -> float:
        return fraction / self.tau * self.samples_per_block


@dataclass(frozen=True)
class ChannelRealization:
    """True channels for one coherence block."""

    h: np.ndarray          # (N, M) complex, column k is tag k's channel
    H_U: np.ndarray        # (N, N) complex ambient-reflection matrix
    beta: np.ndarray       # (M,) path gains
    positions: np.ndarray  # (M, 2) tag coordinates, reader at origin


def default_config(**overrides) -> SimConfig:
    """Paper-default scenario, with derived fields recomputed on override.

    K defaults to 10*N*M and the CE subphase fractions to 1/(10(M+1)) each,
    unless explicitly overridden.
    """
    cfg = SimConfig()
    n = int(overrides.get("N", cfg.N))
    m = int(overrides.get("M", cfg.M))
    derived = {
        "K": 10 * n * m,
        "tau_c0": 1.0 / (10 * (m + 1)),
        "tau_ck": 1.0 / (10 * (m + 1)),
    }
    derived.update(overrides)
    # CE noise defaults track the reader noise unless pinned explicitly.
    if "sigma2_wR" in overrides:
        derived.setdefault("sigma2_w0", overrides["sigma2_wR"])
        derived.setdefault("sigma2_w1", overrides["sigma2_wR"])
    return dataclasses.replace(cfg, **derived).validate()


def path_gain(distance: float, cfg: SimConfig) -> float:
    """Average channel power gain at a given reader-tag distance (meters)."""
    d = max(float(distance), MIN_DISTANCE_M)
    lam_over_4pi = SPEED_OF_LIGHT / (4.0 * np.pi * cfg.carrier_freq)
    return lam_over_4pi**2 * d ** (-cfg.rho)


def draw_realization(cfg: SimConfig, rng: np.random.Generator) -> ChannelRealization:
    """Drop tags uniformly on the field and draw fading plus UAR.

    Draw order is fixed (positions, then h_1..h_M, then H_U) so identical
    seeds give identical realizations.
    """
    positions = rng.uniform(-cfg.L / 2.0, cfg.L / 2.0, size=(cfg.M, 2))
    dists = np.hypot(positions[:, 0], positions[:, 1])
    beta = np.array([path_gain(d, cfg) for d in dists])
    h = np.column_stack(
        [sample_cgauss(rng, cfg.N, beta[k]) for k in range(cfg.M)]
    )
    H_U = sample_cgauss(rng, (cfg.N, cfg.N), cfg.sigma2_HU)
    return ChannelRealization(h=h, H_U=H_U, beta=beta, positions=positions)


def make_pilots(cfg: SimConfig) -> np.ndarray:
    """N orthogonal pilots as an N x N scaled DFT matrix.

    With the structural tau_c0 = N samples, S S^H = (p_t/N) * tau_c0 * I_N
    = p_t I_N exactly. Longer subphases are handled by energy scaling at the
    point of use (pilots repeat).
    """
    n = cfg.N
    jk = np.outer(np.arange(n), np.arange(n))
    dft = np.exp(-2j * np.pi * jk / n)
    return np.sqrt(cfg.p_t * n / n**2) * dft


def make_preamble(cfg: SimConfig) -> np.ndarray:
    """Tags' modulation matrix during CE: a1 on the diagonal, a0 elsewhere."""
    A = np.full((cfg.M, cfg.M), cfg.a0)
    np.fill_diagonal(A, cfg.a1)
    return A


# --- flat key=value config files -------------------------------------------

def save_config(cfg: SimConfig, path) -> None:
    lines = ["# bscsim configuration"]
    for field in dataclasses.fields(SimConfig):
        lines.append(f"{field.name} = {getattr(cfg, field.name)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_config(path) -> SimConfig:
    """Parse a flat key=value file; '#' starts a comment."""
    types = {f.name: f.type for f in dataclasses.fields(SimConfig)}
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = int(val) if types[key] == "int" else float(val)
    return SimConfig(**values).validate()
