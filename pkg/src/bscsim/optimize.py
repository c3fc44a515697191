"""Max-min transceiver optimization.

Two layers: the semidefinite relaxation of the min-scaled-received-power
problem (solved natively over the spectrahedron, rank-one candidates
recovered by Gaussian/phase randomization), and the derivative-free
restart loop that equalizes per-tag throughputs with Nelder-Mead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .channel import SimConfig
from .numerics import ConditioningError, eig_herm_max, sample_cgauss
from .trx import TrxDesign, detector_mmse, rate_report, zf_matrix


class SolverError(RuntimeError):
    """Solver failed to certify a solution; best iterate in .solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True)
class SdrSolution:
    F: np.ndarray  # (N, N) Hermitian PSD, trace <= p_t
    P: float       # certified max-min objective value
    gap: float     # relative duality gap at termination


@dataclass(frozen=True)
class JointResult:
    design: TrxDesign
    min_rate: float    # best bottleneck rate found (estimate-domain)
    sigma_r: float     # rate deviation at termination
    iterations: int
    converged: bool
    sdr_gap: float     # certificate gap of the asymptotic starting design


def sdr_solve(
    H_hat: np.ndarray,
    gamma_hat: np.ndarray,
    cfg: SimConfig,
    tol: float = 1e-6,
    max_iter: int = 300,
) -> SdrSolution:
    """Maximize P s.t. trace(F) <= p_t, F >= 0, Re{h_k^T F h_k^*} >= P g1/gk.

    Equivalently max-min of the linear functionals w_k <F, h_k^* h_k^T> with
    w_k = gamma_hat_k / gamma_hat_1 over the spectrahedron. Solved by a
    fully-corrective cutting-plane scheme: each iteration takes one leading
    eigenvector of the dual-weighted channel matrix as a new rank-one atom
    and re-solves a small LP over the atom weights. The certificate is the
    primal-dual gap against p_t * lambda_max of the dual combination.
    """
    gamma_hat = np.asarray(gamma_hat, dtype=float)
    if np.any(gamma_hat <= 0):
        raise ValueError("gamma_hat entries must be positive")
    N, M = H_hat.shape
    norms = np.linalg.norm(H_hat, axis=0)
    if not np.any(norms > 0):
        raise ValueError("all channel estimates are zero")
    w = gamma_hat / gamma_hat[0]
    R = np.einsum("nk,mk->knm", H_hat.conj(), H_hat)  # R_k = h_k^* h_k^T

    def coeffs(v: np.ndarray) -> np.ndarray:
        return w * np.abs(H_hat.T @ v) ** 2  # w_k <v v^H, R_k>

    # Seed atoms: uniform-weight eigenvector plus each tag's own direction.
    atoms = [eig_herm_max(R.mean(axis=0)).vector]
    for k in range(M):
        if norms[k] > 0:
            atoms.append(H_hat[:, k].conj() / norms[k])
    A_cols = [coeffs(v) for v in atoms]

    def top_vectors(lam: np.ndarray) -> tuple[float, list[np.ndarray], np.ndarray]:
        B = np.einsum("k,knm->nm", lam * w, R)
        evals, V = np.linalg.eigh((B + B.conj().T) / 2.0)
        top = max(evals[-1], 0.0)
        keep = [V[:, i] for i in range(N) if evals[i] >= (1.0 - 1e-9) * evals[-1]]
        return top, keep[-3:], V[:, -1]

    def fresh(candidates) -> list[np.ndarray]:
        out = []
        for v in candidates:
            if all(abs(np.vdot(u, v)) < 1.0 - 1e-12 for u in atoms):
                out.append(v)
        return out

    def refine_dual(lam0: np.ndarray, steps: int = 25):
        """Exponentiated-gradient descent on the dual bound p_t*lmax(B(lam)).

        LP vertex duals can be degenerate and stall the cutting plane; this
        walks them toward the true dual optimum and collects eigenvector
        atoms along the way.
        """
        lam = lam0.copy()
        best_bound, best_vecs = np.inf, []
        for t in range(steps):
            top, vecs, v1 = top_vectors(lam)
            bound = cfg.p_t * top
            if bound < best_bound:
                best_bound, best_vecs = bound, vecs
            grad = w * np.abs(H_hat.T @ v1) ** 2
            gmax = grad.max()
            if gmax <= 0:
                break
            lam = lam * np.exp(-0.5 / np.sqrt(t + 1.0) * grad / gmax)
            s = lam.sum()
            if s <= 0:
                break
            lam /= s
        return best_bound, best_vecs

    best = None
    gap = np.inf
    upper_best = np.inf
    for _ in range(max_iter):
        J = len(atoms)
        # LP in (c_1..c_J, theta): max theta s.t. theta <= sum_j c_j a_kj,
        # sum_j c_j <= p_t, c >= 0. Coefficients sit at channel-power scale
        # (~1e-9 W) with a large spread across tags; normalize by the weakest
        # tag's best coverage so theta lands at O(1) for the LP.
        A_raw = np.column_stack(A_cols)
        scale = float(A_raw.max(axis=1).min())
        if scale <= 0:
            raise SolverError("a tag has no coverage from any atom", solution=best)
        A_ub = np.zeros((M + 1, J + 1))
        A_ub[:M, :J] = -A_raw / scale
        A_ub[:M, J] = 1.0
        A_ub[M, :J] = 1.0
        b_ub = np.zeros(M + 1)
        b_ub[M] = cfg.p_t
        obj = np.zeros(J + 1)
        obj[J] = -1.0
        bounds = [(0, None)] * J + [(None, None)]
        res = scipy.optimize.linprog(
            obj,
            A_ub=A_ub,
            b_ub=b_ub,
            bounds=bounds,
            method="highs",
            options={
                "primal_feasibility_tolerance": 1e-10,
                "dual_feasibility_tolerance": 1e-10,
            },
        )
        if not res.success:
            res = scipy.optimize.linprog(
                obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs"
            )
        if not res.success:
            raise SolverError(f"master LP failed: {res.message}", solution=best)
        c = res.x[:J]
        P = float(res.x[J]) * scale
        lam = np.clip(-np.asarray(res.ineqlin.marginals[:M]), 0.0, None)
        if lam.sum() <= 1e-12:
            lam = np.ones(M)
        lam /= lam.sum()

        F = np.einsum("j,jn,jm->nm", c, np.array(atoms), np.conj(np.array(atoms)))
        top, vecs, _ = top_vectors(lam)
        upper_best = min(upper_best, cfg.p_t * top)
        gap = (upper_best - P) / max(upper_best, 1e-300)
        best = SdrSolution(F=F, P=P, gap=float(gap))
        if gap <= tol:
            return best
        new_atoms = fresh(vecs)
        if not new_atoms or gap > 10 * tol:
            bound, vecs2 = refine_dual(lam)
            upper_best = min(upper_best, bound)
            gap = (upper_best - P) / max(upper_best, 1e-300)
            best = SdrSolution(F=F, P=P, gap=float(gap))
            if gap <= tol:
                return best
            new_atoms.extend(fresh(vecs2))
        if not new_atoms:
            # Last resort: softmin-weighted primal cut.
            gvals = A_raw @ c
            spread = float(gvals.max() - gvals.min())
            if spread > 0:
                soft = np.exp(-(gvals - gvals.min()) / (0.3 * spread))
                _, vecs3, _ = top_vectors(soft / soft.sum())
                new_atoms = fresh(vecs3)
        if not new_atoms:
            break
        for v in new_atoms:
            atoms.append(v)
            A_cols.append(coeffs(v))

    if best is None or best.gap > 1e-4:
        raise SolverError(
            f"SDR solver did not certify gap <= 1e-4 (got {gap:.3e})", solution=best
        )
    return best


def randomize(
    F: np.ndarray,
    H_hat: np.ndarray,
    gamma_hat: np.ndarray,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Recover a rank-one precoder from the relaxed solution.

    Draws K Gaussian candidates through F^{1/2}, K phase-only candidates
    through sqrt(diag F), and K mixed candidates, all scaled to the full
    power budget; returns the one maximizing the min weighted received
    power. Draw order: Gaussian block first, then the uniform phases.
    Ties break on the first-found candidate (m-major, design index minor).
    """
    N = F.shape[0]
    K = cfg.K
    w = np.asarray(gamma_hat, dtype=float)
    w = w / w[0]
    evals, U = np.linalg.eigh((F + F.conj().T) / 2.0)
    root = U * np.sqrt(np.clip(evals, 0.0, None))[None, :]
    X_a = sample_cgauss(rng, (N, K), 1.0)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=(N, K))
    X_b = np.exp(1j * theta)
    diag_root = np.sqrt(np.clip(np.diag(F).real, 0.0, None))
    C1 = root @ X_a
    C2 = diag_root[:, None] * X_b
    C3 = root @ X_b
    cands = np.stack([C1, C2, C3], axis=2).reshape(N, 3 * K)
    nrm = np.linalg.norm(cands, axis=0)
    principal = U[:, -1]
    zero = nrm <= 0
    if zero.any():
        cands[:, zero] = principal[:, None]
        nrm = np.linalg.norm(cands, axis=0)
    cands = np.sqrt(cfg.p_t) * cands / nrm
    obj = (w[:, None] * np.abs(H_hat.T @ cands) ** 2).min(axis=0)
    return cands[:, int(np.argmax(obj))].copy()


def low_snr_weights(H_hat: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """MRC-limit weights ||h_k||^2 / sigma2_bar."""
    return np.linalg.norm(H_hat, axis=0) ** 2 / cfg.sigma2_bar


def high_snr_weights(H_hat: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """ZF-limit weights 1 / (sigma2_bar ||[G_Z]_k||^2), unnormalized columns."""
    Gz = zf_matrix(H_hat)
    return 1.0 / (cfg.sigma2_bar * np.linalg.norm(Gz, axis=0) ** 2)


def _asymptotic(
    choice: str, H_hat: np.ndarray, cfg: SimConfig, rng: np.random.Generator
) -> tuple[TrxDesign, SdrSolution]:
    if choice == "low":
        gamma_hat = low_snr_weights(H_hat, cfg)
    elif choice == "high":
        gamma_hat = high_snr_weights(H_hat, cfg)
    else:
        raise ValueError(f"choice must be 'low' or 'high', got {choice!r}")
    active = np.linalg.norm(H_hat, axis=0) > 0
    if not active.all():
        # Zero estimates cannot be served; design for the rest.
        sol = sdr_solve(H_hat[:, active], gamma_hat[active], cfg)
    else:
        sol = sdr_solve(H_hat, gamma_hat, cfg)
    f = randomize(sol.F, H_hat[:, active], gamma_hat[active], cfg, rng)
    return TrxDesign(f=f, G=detector_mmse(f, H_hat, cfg)), sol


def asymptotic_design(
    choice: str, H_hat: np.ndarray, cfg: SimConfig, rng: np.random.Generator
) -> TrxDesign:
    """Asymptotically-optimal TRX for the low- or high-SNR regime."""
    design, _ = _asymptotic(choice, H_hat, cfg, rng)
    return design


def nelder_mead(objective, x0, spread_tol: float = 1e-10, max_evals: int | None = None):
    """Minimize with the standard simplex method.

    Reflection 1, expansion 2, contraction 0.5, shrink 0.5; initial simplex
    perturbs each coordinate by 5% (0.00025 when zero); stops when the
    simplex objective spread drops below spread_tol or after 400 * dim
    evaluations. Returns (x, value).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    if max_evals is None:
        max_evals = 400 * n
    evals = 0

    def f(x):
        nonlocal evals
        evals += 1
        val = float(objective(x))
        if np.isnan(val):
            raise ValueError(f"objective returned NaN at x={x!r}")
        return val

    simplex = [x0.copy()]
    for i in range(n):
        x = x0.copy()
        x[i] = x0[i] * 1.05 if x0[i] != 0 else 0.00025
        simplex.append(x)
    fvals = [f(x) for x in simplex]

    while True:
        order = np.argsort(fvals, kind="stable")
        simplex = [simplex[i] for i in order]
        fvals = [fvals[i] for i in order]
        if fvals[-1] - fvals[0] < spread_tol or evals >= max_evals:
            break
        centroid = np.mean(simplex[:-1], axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
        elif fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = centroid - 0.5 * (centroid - simplex[-1])
                fc = f(xc)
                accept = fc < fvals[-1]
            if accept:
                simplex[-1], fvals[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    fvals[i] = f(simplex[i])
    best = int(np.argmin(fvals))
    return simplex[best].copy(), fvals[best]


def _project_power(f: np.ndarray, p_t: float) -> np.ndarray:
    power = float(np.vdot(f, f).real)
    if power > p_t:
        return f * np.sqrt(p_t / power)
    return f


def make_sigma_objective(H_hat: np.ndarray, cfg: SimConfig):
    """Rate-deviation objective over the 2N-real precoder parameterization.

    The detector is always the MMSE design for the candidate precoder; the
    SINR is invariant to detector column scaling, so normalization is
    skipped here.
    """
    N = H_hat.shape[0]
    HT = np.ascontiguousarray(H_hat.T)
    Hc = H_hat.conj().T
    eye = np.eye(N)
    s2 = cfg.sigma2_bar
    s2T = cfg.sigma2_wT
    pt = cfg.p_t
    pref = cfg.rate_prefactor

    def objective(x):
        f = x[:N] + 1j * x[N:]
        power = float(f.real @ f.real + f.imag @ f.imag)
        if power > pt:
            f = f * np.sqrt(pt / power)
        q = np.abs(HT @ f) ** 2 + s2T
        G = np.linalg.solve(eye + (H_hat * (q / s2)) @ Hc, H_hat)
        C = np.abs(G.conj().T @ H_hat) ** 2
        P = C * q[None, :]
        sig = np.diagonal(P).copy()
        interf = P.sum(axis=1) - sig
        noise = s2 * (np.abs(G) ** 2).sum(axis=0)
        rates = pref * np.log2(1.0 + sig / (interf + noise))
        return float(np.std(rates))

    return objective


def joint_design(
    H_hat: np.ndarray, cfg: SimConfig, rng: np.random.Generator
) -> JointResult:
    """Restart Nelder-Mead loop for the jointly near-optimal TRX.

    Starts from the better asymptotic design, repeatedly equalizes the
    per-tag rates by minimizing their standard deviation over the precoder
    (MMSE detector implied), tracks the best bottleneck rate seen, and
    restarts from a random sparse mix of the current precoder with the
    bottleneck tag's MRT direction. Terminates when the deviation drops
    below epsilon or after it_max outer iterations.
    """
    N, M = H_hat.shape

    candidates = []
    low_design, low_sol = _asymptotic("low", H_hat, cfg, rng)
    candidates.append((low_design, low_sol))
    if N >= M:
        try:
            candidates.append(_asymptotic("high", H_hat, cfg, rng))
        except ConditioningError:
            pass

    def est_min_rate(design: TrxDesign) -> float:
        return rate_report(design.f, design.G, H_hat, cfg).min_rate

    start, start_sol = max(candidates, key=lambda pair: est_min_rate(pair[0]))
    objective = make_sigma_objective(H_hat, cfg)

    f_best = start.f
    r_best = est_min_rate(start)
    f_prev = start.f
    sigma_term = np.inf
    converged = False
    iterations = 0
    for it in range(1, cfg.it_max + 1):
        iterations = it
        x0 = np.concatenate([f_prev.real, f_prev.imag])
        x, _ = nelder_mead(objective, x0)
        f_it = _project_power(x[:N] + 1j * x[N:], cfg.p_t)
        rep = rate_report(f_it, detector_mmse(f_it, H_hat, cfg), H_hat, cfg)
        k0 = int(np.argmin(rep.rates))
        sigma_term = rep.sigma_r
        if rep.min_rate >= r_best:
            f_best = f_it
            r_best = rep.min_rate
        if sigma_term < cfg.epsilon:
            converged = True
            break
        # Restart toward the bottleneck tag's MRT direction (random sparse
        # mix). The mix weights relative importance, so the MRT component is
        # the full-power precoder sqrt(p_t) h*/||h||, not the raw estimate.
        npos = int(rng.integers(1, N + 1))
        pos = rng.choice(N, size=npos, replace=False)
        alpha = np.zeros(N)
        alpha[pos] = rng.uniform(0.0, 1.0, size=npos)
        hk = H_hat[:, k0].conj()
        nh = np.linalg.norm(hk)
        mrt = np.sqrt(cfg.p_t) * hk / nh if nh > 0 else f_it
        d = alpha * mrt + (1.0 - alpha) * f_it
        nd = np.linalg.norm(d)
        f_prev = np.sqrt(cfg.p_t) * d / nd if nd > 0 else start.f

    design = TrxDesign(f=f_best, G=detector_mmse(f_best, H_hat, cfg))
    return JointResult(
        design=design,
        min_rate=r_best,
        sigma_r=float(sigma_term),
        iterations=iterations,
        converged=converged,
        sdr_gap=start_sol.gap,
    )
