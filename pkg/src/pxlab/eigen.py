"""First eigenpair of the p(x)-Laplacian with Dirichlet walls, the admissible
epsilon bound, the separable lower barrier w = eps*e^(1-t/T)*Phi, and the
barrier / ordering verifications.

The eigenpair is computed by minimizing N(Phi) = int (1/p)(|grad Phi|^2+eps^2)^(p/2)
subject to D(Phi) = int (1/p)|Phi|^p = 1 over positive fields.  The 1/p weights
matter for variable p: the Euler-Lagrange equation of this constrained problem
is exactly

    -div(|grad Phi|^(p-2) grad Phi) = lambda |Phi|^(p-2) Phi,

whereas the unweighted quotient would carry stray p(x) factors on both sides.
At a critical point the multiplier equals the unweighted modular ratio
int |grad Phi|^p / int |Phi|^p, so lambda1 is reported as that ratio.  The
quotient is only a surrogate for variable p; the acceptance gate is the
discrete eigen-equation residual.

In 1D the face quadrature is the exact adjoint of the flux divergence, so the
residual can be driven to solver tolerance; in 2D/3D the tangential
reconstruction breaks exact adjointness and the residual floors at the
reconstruction error, which the result flags via ``converged``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exponents import ExponentField, bounds
from .grid import Grid, ScalarField
from .operators import face_magnitude_sq_vjp, face_weights, gradient_faces, px_laplacian
from .simulator import SimResult
from .spaces import sobolev_precondition

POSITIVITY_FLOOR = 1e-12


@dataclass
class EigenPair:
    lambda1: float
    phi: ScalarField = field(repr=False)
    M: float                     # sup Phi
    residual: float              # relative discrete eigen-equation residual
    converged: bool
    iterations: int
    residual_history: list = field(default_factory=list, repr=False)  # best-so-far

    def to_json(self) -> dict:
        return {"lambda1": self.lambda1, "M": self.M, "residual": self.residual,
                "converged": self.converged, "iterations": self.iterations}


def _functionals(vals: np.ndarray, grid: Grid, p: ExponentField, pf, w, pc,
                 eps2: float):
    """N, D (1/p-weighted), their gradients, and the unweighted modular ratio."""
    u = ScalarField(grid, vals)
    faces = gradient_faces(u)
    N_val = 0.0
    num_unweighted = 0.0
    cots = []
    for a in range(grid.dim):
        S = faces.magnitude_sq[a] + eps2
        pa = pf[a]
        N_val += float(np.sum(w[a] / pa * S ** (0.5 * pa))) / grid.dim
        num_unweighted += float(np.sum(w[a] * S ** (0.5 * pa))) / grid.dim
        cots.append(0.5 * w[a] * S ** (0.5 * pa - 1.0) / grid.dim)
    dN = face_magnitude_sq_vjp(u, cots)
    vol = grid.cell_volume
    absv = np.abs(vals)
    D_val = float(np.sum(absv**pc / pc) * vol)
    den_unweighted = float(np.sum(absv**pc) * vol)
    dD = np.sign(vals) * absv ** (pc - 1.0) * vol
    lam = num_unweighted / den_unweighted if den_unweighted > 0 else math.nan
    return N_val, D_val, dN, dD, lam


def _renormalize(vals: np.ndarray, grid: Grid, pc: np.ndarray) -> np.ndarray:
    """Scale so the 1/p-weighted modular of Phi equals 1 (bisection in c)."""
    vol = grid.cell_volume

    def d_of(c):
        return float(np.sum((c * np.abs(vals)) ** pc / pc) * vol)

    lo, hi = 1.0, 1.0
    for _ in range(200):
        if d_of(lo) <= 1.0:
            break
        lo *= 0.5
    for _ in range(200):
        if d_of(hi) >= 1.0:
            break
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if d_of(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * vals


def eigen_residual(vals: np.ndarray, grid: Grid, p: ExponentField, pc, lam: float,
                   eps_reg: float) -> float:
    """|| lap_p(Phi) + lam |Phi|^(p-2) Phi ||_2 relative to lam*|||Phi|^(p-1)||_2."""
    u = ScalarField(grid, vals)
    lap = px_laplacian(u, p, eps_reg).values
    rhs = np.sign(vals) * np.abs(vals) ** (pc - 1.0)
    res = lap + lam * rhs
    scale = lam * float(np.sqrt(np.sum(rhs**2)))
    if scale == 0.0:
        return math.inf
    return float(np.sqrt(np.sum(res**2))) / scale


def first_eigenpair(grid: Grid, p: ExponentField, tol: float = 1e-8,
                    max_iters: int = 20000, eps_reg: float = 1e-8) -> EigenPair:
    """Projected descent (positivity clip at 1e-12, renormalize, Sobolev
    preconditioning, backtracking) started from the product-sine profile.

    Non-convergence after max_iters returns the best iterate flagged
    ``converged=False``; ``residual_history`` tracks the best residual seen.
    """
    bounds(p, grid)
    pf = [p.face_values(grid, a) for a in range(grid.dim)]
    w = [face_weights(grid, a) for a in range(grid.dim)]
    pc = p.cell_values(grid)
    eps2 = eps_reg * eps_reg

    vals = np.ones(grid.cells)
    for a in range(grid.dim):
        x = grid.axis_centers(a) / grid.extent[a]
        shape = [1] * grid.dim
        shape[a] = -1
        vals = vals * np.sin(np.pi * x).reshape(shape)
    vals = _renormalize(vals, grid, pc)

    N_val, D_val, dN, dD, lam = _functionals(vals, grid, p, pf, w, pc, eps2)
    best = (math.inf, vals.copy(), lam, 0)
    history: list[float] = []
    step = 1.0
    it = 0
    for it in range(1, max_iters + 1):
        # multiplier that makes the direction tangent to {D = 1} at vals
        mu = float(np.sum(dN * vals)) / float(np.sum(dD * vals))
        G = dN - mu * dD
        res = eigen_residual(vals, grid, p, pc, lam, eps_reg)
        if res < best[0]:
            best = (res, vals.copy(), lam, it)
        history.append(best[0])
        if res <= tol:
            break
        d = sobolev_precondition(G, grid)
        slope = float(np.sum(G * d))
        if slope <= 0.0:
            step = 1.0
            d, slope = G, float(np.sum(G * G))
            if slope == 0.0:
                break
        dn = float(np.sqrt(np.sum(d**2)))
        t_try, moved = min(step, 0.5 / max(dn, 1e-30)), False
        for _ in range(50):
            trial = np.maximum(vals - t_try * d, POSITIVITY_FLOOR)
            trial = _renormalize(trial, grid, pc)
            N_new, D_new, dN_new, dD_new, lam_new = _functionals(trial, grid, p, pf, w,
                                                                 pc, eps2)
            if N_new < N_val - 1e-6 * t_try * slope:
                moved = True
                break
            # endgame: quotient decrease saturates at FP resolution long before
            # the eigen-equation residual does, so accept on residual decrease
            res_new = eigen_residual(trial, grid, p, pc, lam_new, eps_reg)
            if res_new < 0.999 * res:
                moved = True
                break
            t_try *= 0.5
        if not moved:
            break
        vals, N_val, dN, dD, lam = trial, N_new, dN_new, dD_new, lam_new
        step = t_try * 2.0

    res_final, vals_best, lam_best, _ = best
    phi = ScalarField(grid, vals_best)
    return EigenPair(lambda1=lam_best, phi=phi, M=float(np.max(np.abs(vals_best))),
                     residual=res_final, converged=res_final <= tol, iterations=it,
                     residual_history=history)


# ---------------------------------------------------------------------------
# barrier machinery
# ---------------------------------------------------------------------------

def epsilon_bound(pair: EigenPair, u0: ScalarField, r: float, p_minus: float) -> float:
    """min{ 1, (1+lambda1)^(r-p_minus)/(e*M), min u0 / (e*M) }; requires data
    positively bounded below and the non-extinction window r < p_minus."""
    u0_min = float(np.min(u0.values))
    if u0_min <= 0.0:
        raise ValueError("epsilon bound needs min u0 > 0")
    if r >= p_minus:
        raise ValueError("epsilon bound lives in the r < p_minus window")
    eM = math.e * pair.M
    return min(1.0, (1.0 + pair.lambda1) ** (r - p_minus) / eM, u0_min / eM)


def barrier(pair: EigenPair, eps: float, T: float, t: float) -> ScalarField:
    """w(x, t) = eps * e^(1 - t/T) * Phi; positive inside, decreasing in t."""
    if not 0.0 <= t <= T:
        raise ValueError("barrier time must lie in [0, T]")
    c = eps * math.exp(1.0 - t / T)
    return ScalarField(pair.phi.grid, c * pair.phi.values)


def check_barrier_inequality(pair: EigenPair, eps: float, grid: Grid,
                             p: ExponentField, r: float, T: float = 1.0,
                             times: tuple[float, ...] = None) -> tuple[bool, np.ndarray]:
    """lambda1*w^(p(x)-1) - lambda1*w^r/(eps*Phi + lambda1*w) <= 0 at every
    interior cell for t in {0, T/2, T}; returns (ok, worst margin field).

    Margins are the left-hand side, so negative is good.  The exponent p - 1
    is applied pointwise with p = p(x).
    """
    if times is None:
        times = (0.0, 0.5 * T, T)
    pc = p.cell_values(grid)
    lam = pair.lambda1
    phi = pair.phi.values
    worst = np.full(grid.cells, -math.inf)
    for t in times:
        w = eps * math.exp(1.0 - t / T) * phi
        lhs = lam * w ** (pc - 1.0) - lam * w**r / (eps * phi + lam * w)
        worst = np.maximum(worst, lhs)
    return bool(np.all(worst <= 0.0)), worst


def check_ordering(sim: SimResult, sim_aux: SimResult, pair: EigenPair, eps: float,
                   T: float, slack_rel: float = 1e-6) -> tuple[bool, dict]:
    """w <= v <= u cell-wise at every shared snapshot time (within
    slack_rel * ||u0||_inf); v is the auxiliary solution, u the main one."""
    if sim.config.grid != sim_aux.config.grid:
        raise ValueError("ordering check needs a shared grid")
    if not sim.snapshots or not sim_aux.snapshots:
        raise ValueError("ordering check needs recorded snapshots (keep_snapshots=True)")
    t_u = [t for t, _ in sim.snapshots]
    t_v = [t for t, _ in sim_aux.snapshots]
    shared = sorted(set(t_u) & set(t_v))
    if not shared:
        raise ValueError("runs share no snapshot times")
    u_by_t = dict(sim.snapshots)
    v_by_t = dict(sim_aux.snapshots)
    u0_linf = float(np.max(np.abs(sim.snapshots[0][1])))
    slack = slack_rel * u0_linf
    phi = pair.phi.values
    worst_wv, worst_vu = -math.inf, -math.inf
    ok = True
    for t in shared:
        if t > T:
            continue
        w = eps * math.exp(1.0 - t / T) * phi
        v = v_by_t[t]
        u = u_by_t[t]
        worst_wv = max(worst_wv, float(np.max(w - v)))
        worst_vu = max(worst_vu, float(np.max(v - u)))
        if np.any(w > v + slack) or np.any(v > u + slack):
            ok = False
    details = {"worst_w_minus_v": worst_wv, "worst_v_minus_u": worst_vu,
               "slack": slack, "times_checked": [t for t in shared if t <= T]}
    return ok, details
