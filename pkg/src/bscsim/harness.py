"""Monte Carlo experiment driver, sweeps and CSV emission.

A trial draws one coherence block, runs channel estimation, builds the
requested transceiver design from the estimates and scores it against the
true channels. Sweeps aggregate trials per swept-parameter value into one
CSV row; trials are seeded from (seed, point index, trial index) so results
are reproducible and order-independent, and all designs of a trial share the
same realization and CE noise (paired comparisons).
"""

from __future__ import annotations

import dataclasses
import datetime
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, SimConfig, draw_realization
from .estimation import run_ce
from .numerics import ConditioningError, eig_herm_max
from .optimize import SolverError, _asymptotic, joint_design
from .trx import (
    TrxDesign,
    detector_mmse,
    detector_zf,
    precoder_benchmark,
    rate_report,
    validate_design,
)

DESIGNS = ("joint", "asymptotic", "benchmark", "perfect_csi", "isotropic")
SWEEP_PARAMETERS = ("L", "N", "M", "snr_db", "sigma2_HU_dbm", "tau_c_fraction")

TRIAL_ERRORS = (ConditioningError, SolverError, np.linalg.LinAlgError, ValueError)


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    trials: int
    designs: tuple = ("joint",)

    def validate(self) -> "SweepSpec":
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}")
        if not self.values or list(self.values) != sorted(self.values):
            raise ValueError("sweep values must be nonempty and sorted")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for d in self.designs:
            if d not in DESIGNS:
                raise ValueError(f"unknown design {d!r}")
        return self


@dataclass(frozen=True)
class TrialMetrics:
    design: str
    min_rate: float
    sigma_r: float
    iterations: int
    gap: float  # SDR certificate gap where applicable, else nan


def apply_param(base: SimConfig, parameter: str, value) -> SimConfig:
    """Override the swept field, recomputing the scenario-default derived ones."""
    if parameter == "L":
        cfg = dataclasses.replace(base, L=float(value))
    elif parameter == "N":
        n = int(value)
        cfg = dataclasses.replace(base, N=n, K=10 * n * base.M)
    elif parameter == "M":
        m = int(value)
        frac = 1.0 / (10 * (m + 1))
        cfg = dataclasses.replace(
            base, M=m, K=10 * base.N * m, tau_c0=frac, tau_ck=frac
        )
    elif parameter == "snr_db":
        cfg = base  # applied per trial, after the geometry is drawn
    elif parameter == "sigma2_HU_dbm":
        cfg = dataclasses.replace(base, sigma2_HU=10.0 ** (float(value) / 10.0) / 1000.0)
    elif parameter == "tau_c_fraction":
        frac = float(value) / (base.M + 1)
        cfg = dataclasses.replace(base, tau_c0=frac, tau_ck=frac)
    else:
        raise ValueError(f"unknown sweep parameter {parameter!r}")
    return cfg.validate()


def _noise_for_snr(cfg: SimConfig, beta: np.ndarray, snr_db: float) -> SimConfig:
    """Scale the reader/CE noise so p_t * mean(beta)^2 / sigma2_wR hits snr_db."""
    sigma2 = cfg.p_t * float(np.mean(beta)) ** 2 / 10.0 ** (snr_db / 10.0)
    return dataclasses.replace(cfg, sigma2_wR=sigma2, sigma2_w0=sigma2, sigma2_w1=sigma2)


def _build_design(
    design: str,
    cfg: SimConfig,
    real: ChannelRealization,
    h_hat: np.ndarray,
    rng_opt: np.random.Generator,
) -> tuple[TrxDesign, int, float, float]:
    """Returns (design, iterations, sigma_r_termination, gap); nan where n/a."""
    if design == "joint" or design == "perfect_csi":
        channels = h_hat if design == "joint" else real.h
        res = joint_design(channels, cfg, rng_opt)
        return res.design, res.iterations, res.sigma_r, res.sdr_gap
    if design == "asymptotic":
        cands = [_asymptotic("low", h_hat, cfg, rng_opt)]
        if cfg.N >= cfg.M:
            try:
                cands.append(_asymptotic("high", h_hat, cfg, rng_opt))
            except ConditioningError:
                pass
        trx, sol = max(
            cands, key=lambda c: rate_report(c[0].f, c[0].G, h_hat, cfg).min_rate
        )
        return trx, 0, math.nan, sol.gap
    if design == "benchmark":
        f = precoder_benchmark(h_hat, real.beta, cfg)
        return TrxDesign(f=f, G=detector_zf(h_hat)), 0, math.nan, math.nan
    if design == "isotropic":
        f = np.full(cfg.N, np.sqrt(cfg.p_t / cfg.N), dtype=np.complex128)
        return TrxDesign(f=f, G=detector_mmse(f, h_hat, cfg)), 0, math.nan, math.nan
    raise ValueError(f"unknown design {design!r}")


def run_trial(
    cfg: SimConfig,
    design: str,
    rng: np.random.Generator,
    snr_db: float | None = None,
    score_on: str = "truth",
) -> TrialMetrics:
    """One Monte Carlo trial: draw, estimate, design, score.

    Streams for the realization, the CE noise and the optimizer are split
    up front, so two designs run from generators seeded identically see the
    same channel realization and estimates.
    """
    rng_real, rng_ce, rng_opt = rng.spawn(3)
    real = draw_realization(cfg, rng_real)
    if snr_db is not None:
        cfg = _noise_for_snr(cfg, real.beta, snr_db)
    ce = run_ce(cfg, real, rng_ce)
    trx, iterations, sigma_term, gap = _build_design(
        design, cfg, real, ce.h_hat, rng_opt
    )
    validate_design(trx, cfg)
    scored = rate_report(
        trx.f, trx.G, real.h if score_on == "truth" else ce.h_hat, cfg
    )
    sigma_r = sigma_term if not math.isnan(sigma_term) else scored.sigma_r
    return TrialMetrics(
        design=design,
        min_rate=scored.min_rate,
        sigma_r=float(sigma_r),
        iterations=iterations,
        gap=gap,
    )


def _trial_task(args):
    cfg, design, seed_key, snr_db = args
    rng = np.random.default_rng(seed_key)
    try:
        return run_trial(cfg, design, rng, snr_db=snr_db)
    except TRIAL_ERRORS as exc:
        return f"{type(exc).__name__}: {exc}"


def _run_tasks(tasks, jobs: int):
    if jobs <= 1:
        return [_trial_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial_task, tasks, chunksize=4))


def _aggregate(results) -> dict:
    ok = [r for r in results if isinstance(r, TrialMetrics)]
    failed = len(results) - len(ok)

    def mean(vals):
        vals = [v for v in vals if not math.isnan(v)]
        return sum(vals) / len(vals) if vals else math.nan

    return {
        "min_rate_mean": mean([r.min_rate for r in ok]),
        "sigma_r_mean": mean([r.sigma_r for r in ok]),
        "iterations_mean": mean([float(r.iterations) for r in ok]),
        "gap_mean": mean([r.gap for r in ok]),
        "failed": failed,
    }


def run_sweep(
    spec: SweepSpec,
    base: SimConfig,
    out: str | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Run trials for every swept value and design; optionally write CSV."""
    spec.validate()
    designs = [d for d in DESIGNS if d in spec.designs]
    records = []
    for pi, value in enumerate(spec.values):
        cfg = apply_param(base, spec.parameter, value)
        snr = float(value) if spec.parameter == "snr_db" else None
        record = {
            "parameter": spec.parameter,
            "value": value,
            "trials": spec.trials,
            "seed": base.seed,
        }
        for design in designs:
            tasks = [
                (cfg, design, [base.seed, pi, t], snr) for t in range(spec.trials)
            ]
            agg = _aggregate(_run_tasks(tasks, jobs))
            for key, val in agg.items():
                record[f"{design}_{key}"] = val
        records.append(record)
    if out is not None:
        header_meta = [f"parameter = {spec.parameter}"]
        if "joint" in designs:
            for d in designs:
                if d == "joint":
                    continue
                ratios = [
                    r["joint_min_rate_mean"] / r[f"{d}_min_rate_mean"]
                    for r in records
                    if r.get(f"{d}_min_rate_mean", 0) > 0
                ]
                if ratios:
                    gm = math.exp(sum(math.log(x) for x in ratios) / len(ratios))
                    header_meta.append(f"ratio_geomean_joint_over_{d} = {gm!r}")
        write_csv(out, records, header_meta)
    return records


def sum_rx_power(f: np.ndarray, h: np.ndarray) -> float:
    """Total received power at the tags for precoder f over true channels."""
    return float(np.sum(np.abs(h.T @ f) ** 2))


def power_beamformer(h_cols: np.ndarray, p_t: float) -> np.ndarray:
    """Full-power beamformer maximizing the sum received power for the given
    channel columns (dominant eigenvector of the conjugate outer-product sum)."""
    B = h_cols.conj() @ h_cols.T
    return np.sqrt(p_t) * eig_herm_max(B).vector


def _ce_validation_task(args):
    cfg, seed_key, snr_db = args
    rng = np.random.default_rng(seed_key)
    rng_real, rng_noise = rng.spawn(2)
    real = draw_realization(cfg, rng_real)
    sigma2 = (
        cfg.p_t * cfg.a1**2 * float(np.mean(real.beta)) ** 2 / 10.0 ** (snr_db / 10.0)
    )
    cfg_t = dataclasses.replace(cfg, sigma2_w0=sigma2, sigma2_w1=sigma2)
    noise_seed = int(rng_noise.integers(2**63))
    # Same noise draws in both worlds: paired comparison of the estimators.
    ce_uar = run_ce(cfg_t, real, np.random.default_rng(noise_seed))
    real_no = dataclasses.replace(real, H_U=np.zeros_like(real.H_U))
    ce_no = run_ce(cfg_t, real_no, np.random.default_rng(noise_seed), suppress=False)
    return (
        sum_rx_power(power_beamformer(ce_uar.h_hat, cfg.p_t), real.h),
        sum_rx_power(power_beamformer(ce_no.h_hat, cfg.p_t), real.h),
        sum_rx_power(power_beamformer(real.h, cfg.p_t), real.h),
        cfg.p_t / cfg.N * float(np.sum(np.abs(real.h) ** 2)),
    )


def validate_ce_sweep(
    base: SimConfig,
    snr_values,
    trials: int = 500,
    out: str | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Sum-received-power comparison of the LS estimator against perfect CSI
    and isotropic transmission across backscatter SNRs."""
    records = []
    for pi, snr_db in enumerate(snr_values):
        tasks = [(base, [base.seed, pi, t], float(snr_db)) for t in range(trials)]
        rows = _run_tasks_ce(tasks, jobs)
        means = np.mean(np.asarray(rows), axis=0)
        records.append(
            {
                "snr_db": float(snr_db),
                "sum_rx_power_lse_uar": float(means[0]),
                "sum_rx_power_lse_nouar": float(means[1]),
                "sum_rx_power_perfect": float(means[2]),
                "sum_rx_power_isotropic": float(means[3]),
                "trials": trials,
                "seed": base.seed,
            }
        )
    if out is not None:
        write_csv(out, records, ["kind = ce_validation"])
    return records


def _run_tasks_ce(tasks, jobs: int):
    if jobs <= 1:
        return [_ce_validation_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_ce_validation_task, tasks, chunksize=8))


def grid_ce_time(
    base: SimConfig,
    c0_values,
    ck_values,
    trials: int = 50,
    out: str | None = None,
    jobs: int = 1,
) -> list[dict]:
    """Joint max-min rate over a 2-D grid of CE subphase fractions.

    Infeasible cells (CE time filling the whole block) are skipped.
    """
    records = []
    pi = 0
    for c0 in c0_values:
        for ck in ck_values:
            if c0 + base.M * ck >= base.tau:
                continue
            cfg = dataclasses.replace(base, tau_c0=float(c0), tau_ck=float(ck)).validate()
            tasks = [
                (cfg, "joint", [base.seed, pi, t], None) for t in range(trials)
            ]
            agg = _aggregate(_run_tasks(tasks, jobs))
            records.append(
                {
                    "tau_c0": float(c0),
                    "tau_ck": float(ck),
                    "min_rate_mean": agg["min_rate_mean"],
                    "sigma_r_mean": agg["sigma_r_mean"],
                    "iterations_mean": agg["iterations_mean"],
                    "trials": trials,
                    "seed": base.seed,
                }
            )
            pi += 1
    if out is not None:
        write_csv(out, records, ["kind = grid_ce_time"])
    return records


def write_csv(path: str, records: list[dict], meta: list[str] | None = None) -> None:
    """Deterministic CSV: '#' metadata lines, then header, then rows.

    Reruns with the same config and seed are byte-identical except for the
    timestamp line.
    """
    if not records:
        raise ValueError("no records to write")
    columns = list(records[0].keys())
    lines = ["# bscsim"]
    lines.append(f"# timestamp = {datetime.datetime.now().isoformat()}")
    for entry in meta or []:
        lines.append(f"# {entry}")
    lines.append(",".join(columns))
    for rec in records:
        lines.append(",".join(_fmt(rec[c]) for c in columns))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)
