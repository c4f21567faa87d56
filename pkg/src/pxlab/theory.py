"""Explicit constants and parameter-regime classification.

Everything here is a deterministic function of (p_minus, p_plus, r, N, |Omega|),
the embedding-constant estimates, and the t=0 diagnostics of the discretized
initial data.  Each constant carries a provenance tag: "formula" (closed
form), "root-found" (bisection), or "estimated" (depends on a numerically
estimated embedding constant, so downstream verdicts report sensitivity).

Threshold function and peak.  With B1 = max{B, 1},

    h(a) = a/p_plus - (B1^r / r) * max{a^(r/p_minus), a^(r/p_plus)}

increases on (0, alpha1) and decreases on (alpha1, inf), where
alpha1 = B1^(r*p_plus/(p_plus - r)).  The printed threshold energy

    E1_printed = ((r - p_plus)/(r*p_plus)) * B1^((r - p_plus)/(r*p_plus))

does not equal the analytic peak h(alpha1) = ((r - p_plus)/(r*p_plus)) * alpha1
unless B1 = 1; the peak is what the alpha2 construction needs, so e1_used is
the peak and both variants are reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

PRIORITY = ("blow_up", "fast_diffusion_extinction", "extinction_small_data",
            "non_extinction", "global_Linf_growth", "global_L2_growth", "unknown")


# ---------------------------------------------------------------------------
# threshold function h and the critical constants
# ---------------------------------------------------------------------------

def h_of_alpha(alpha: float, p_minus: float, p_plus: float, r: float, B1: float) -> float:
    """a/p_plus - (B1^r/r)*max{a^(r/p_minus), a^(r/p_plus)}.

    Only p_plus enters the linear term; the max branch is a^(r/p_plus) for
    a <= 1 and a^(r/p_minus) for a >= 1 (both exponents positive here)."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return alpha / p_plus - (B1**r / r) * max(alpha ** (r / p_minus), alpha ** (r / p_plus))


def _h(alpha: float, p_minus: float, p_plus: float, r: float, B1: float) -> float:
    return h_of_alpha(alpha, p_minus, p_plus, r, B1)


@dataclass
class CriticalConstants:
    B: float
    B1: float
    alpha1: float
    e1_printed: float
    e1_peak: float

    @property
    def e1_used(self) -> float:
        return self.e1_peak


def critical_constants(B: float, p_minus: float, p_plus: float, r: float) -> CriticalConstants:
    """B1, alpha1 and both threshold-energy variants; requires r > p_plus."""
    if r <= p_plus:
        raise ValueError("critical constants need r > p_plus")
    B1 = max(B, 1.0)
    alpha1 = B1 ** (r * p_plus / (p_plus - r))
    coeff = (r - p_plus) / (r * p_plus)
    e1_printed = coeff * B1 ** ((r - p_plus) / (r * p_plus))
    e1_peak = coeff * alpha1
    return CriticalConstants(B=B, B1=B1, alpha1=alpha1,
                             e1_printed=e1_printed, e1_peak=e1_peak)


def solve_alpha2(E0: float, crit: CriticalConstants, p_minus: float, p_plus: float,
                 r: float, tol: float = 1e-13) -> float:
    """Root of h(alpha2) = E0 on the decreasing branch alpha2 > alpha1.

    Exists (and is unique there) precisely when E0 < h(alpha1) = e1_peak,
    since h decreases to -infinity.
    """
    if E0 >= crit.e1_peak:
        raise ValueError("alpha2 requires E(0) < E1 (peak of h)")
    a_lo = crit.alpha1
    a_hi = max(2.0 * crit.alpha1, 1.0)
    for _ in range(400):
        if _h(a_hi, p_minus, p_plus, r, crit.B1) < E0:
            break
        a_hi *= 2.0
    else:
        raise FloatingPointError("alpha2 bracket not found")
    for _ in range(200):
        mid = 0.5 * (a_lo + a_hi)
        if mid == a_lo or mid == a_hi:
            break
        if _h(mid, p_minus, p_plus, r, crit.B1) > E0:
            a_lo = mid
        else:
            a_hi = mid
    return 0.5 * (a_lo + a_hi)


def blow_up_constants(alpha2: float, crit: CriticalConstants, r: float, p_plus: float,
                      p_minus: float, omega_measure: float,
                      e1_used: float | None = None) -> tuple[float, dict]:
    """The Gronwall coefficient C0 in G' >= C0 * G^(r/2), general form

        C0 = [ (r-p_plus)/r - p_plus*E1 / (B1^r * max{a2^(r/p-), a2^(r/p+)}) ]
             * |Omega|^((2-r)/2) * 2^(r/2),

    which reduces to the printed display when E1 is the printed variant; the
    dual-path agreement is part of the report.  C0 <= 0 is a hypothesis
    failure (no blow-up bound), not a crash.
    """
    if r <= max(2.0, p_plus):
        raise ValueError("blow-up constants need r > max{2, p_plus}")
    e1 = crit.e1_used if e1_used is None else e1_used
    m = crit.B1**r * max(alpha2 ** (r / p_minus), alpha2 ** (r / p_plus))
    geom = omega_measure ** ((2.0 - r) / 2.0) * 2.0 ** (r / 2.0)
    c0_general = ((r - p_plus) / r - p_plus * e1 / m) * geom
    c0_printed = ((r - p_plus) * (m - crit.B1 ** ((r - p_plus) / (r * p_plus)))
                  / (m * r)) * geom
    report = {
        "c0_general": c0_general,
        "c0_printed_display": c0_printed,
        "dual_path_gap_at_printed_e1": abs(
            ((r - p_plus) / r - p_plus * crit.e1_printed / m) * geom - c0_printed),
        "positive": c0_general > 0.0,
    }
    return c0_general, report


def blow_up_time_bound(G0_half: float, C0: float, r: float) -> float:
    """T_star = G(0)^(1-r/2) / ((r/2-1)*C0), G in the half convention."""
    if r <= 2:
        raise ValueError("blow-up time bound needs r > 2")
    if C0 <= 0 or G0_half <= 0:
        raise ValueError("need C0 > 0 and G(0) > 0")
    return G0_half ** (1.0 - r / 2.0) / ((r / 2.0 - 1.0) * C0)


# ---------------------------------------------------------------------------
# extinction constants (small-data window)
# ---------------------------------------------------------------------------

def derive_C1(C2_embedding: float, p_minus: float, p_plus: float) -> float:
    """C1 = (1/2) min{C2^-p_plus, C2^-p_minus}: with ||u||_2 <= C2 ||grad u||_p(.)
    and the norm-modular sandwich,

        int |grad u|^p >= 2*C1*min{G^(p+/2), G^(p-/2)},  G = int u^2,

    which is the constant the decay differential inequality needs."""
    if C2_embedding <= 0:
        raise ValueError("C2 must be positive")
    return 0.5 * min(C2_embedding ** (-p_plus), C2_embedding ** (-p_minus))


@dataclass
class ExtinctionConstants:
    r: float
    p_minus: float
    p_plus: float
    u0_l2: float
    C1: float
    omega_measure: float
    K1: float = math.nan
    F_u0: float = math.nan
    T1: float = math.inf
    data_small_enough: bool = False

    def g(self, t):
        """Envelope kernel; ||u(t)||_2 <= g(t)^(1/(2-p_plus)) while g > 0."""
        y0 = self.u0_l2 ** (2.0 - self.p_plus)
        if self.r == 2.0:
            return y0 - self.K1 + self.K1 * np.exp((self.p_minus - 2.0) * np.asarray(t))
        return y0 + self.F_u0 * np.asarray(t)

    def envelope_l2(self, t):
        gval = self.g(t)
        return np.where(gval > 0, np.maximum(gval, 0.0) ** (1.0 / (2.0 - self.p_plus)), 0.0)


def extinction_constants(u0_l2: float, C1: float, p_minus: float, p_plus: float,
                         r: float, omega_measure: float, N: int) -> ExtinctionConstants:
    """K1/T1 (r = 2) or F(u0)/T1 (1 < r < 2) of the small-data decay estimate.

    T1 is finite only when the data is small enough (K1 > ||u0||^(2-p+) for
    r = 2, F(u0) < 0 for r < 2); otherwise it is +inf and flagged.
    """
    if not (2.0 * N / (N + 2.0) < p_minus <= p_plus < r <= 2.0):
        raise ValueError("extinction constants need 2N/(N+2) < p- <= p+ < r <= 2")
    if u0_l2 <= 0:
        raise ValueError("need ||u0||_2 > 0")
    out = ExtinctionConstants(r=r, p_minus=p_minus, p_plus=p_plus, u0_l2=u0_l2,
                              C1=C1, omega_measure=omega_measure)
    y0 = u0_l2 ** (2.0 - p_plus)
    if r == 2.0:
        K1 = (2.0 - p_plus) / (2.0 - p_minus) * C1 * min(1.0, u0_l2 ** (p_minus - p_plus))
        out.K1 = K1
        if K1 > y0:
            out.T1 = math.log(1.0 - y0 / K1) / (p_minus - 2.0)
            out.data_small_enough = True
    else:
        F = (2.0 - p_plus) * (2.0 * omega_measure ** ((2.0 - r) / 2.0)
                              * u0_l2 ** (r - p_plus)
                              - 0.5 * C1 * min(u0_l2 ** (p_minus - p_plus), 1.0))
        out.F_u0 = F
        if F < 0.0:
            out.T1 = y0 / (-F)
            out.data_small_enough = True
    return out


def comparison_ode(y0: float, A: float, Bc: float, p_plus: float, r: float,
                   dt: float, t_max: float = math.inf,
                   max_steps: int = 2_000_000) -> tuple[np.ndarray, np.ndarray, float]:
    """RK4 for y' = ((2-p+)/2) * Bc * y^((r-p+)/(2-p+)) - ((2-p+)/2) * A,
    y(0) = y0 > 0; clamps to 0 after the first nonpositive value and returns
    (times, trajectory, hitting_time).  y^(2/(2-p+)) is the upper-solution
    envelope of the decay argument."""
    if p_plus >= 2:
        raise ValueError("comparison ODE needs p_plus < 2")
    if y0 <= 0:
        raise ValueError("y(0) must be positive")
    c = 0.5 * (2.0 - p_plus)
    expo = (r - p_plus) / (2.0 - p_plus)

    def f(y):
        return c * Bc * y**expo - c * A if y > 0 else -c * A

    ts, ys = [0.0], [y0]
    t, y = 0.0, y0
    hit = math.inf
    for _ in range(max_steps):
        if t >= t_max:
            break
        y_prev = y
        k1 = f(y)
        k2 = f(max(y + 0.5 * dt * k1, 0.0))
        k3 = f(max(y + 0.5 * dt * k2, 0.0))
        k4 = f(max(y + dt * k3, 0.0))
        y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
        if y <= 0.0:
            # linear interpolation of the crossing (exact when Bc = 0)
            hit = t - dt + dt * y_prev / (y_prev - y)
            y = 0.0
            ts.append(t)
            ys.append(y)
            break
        ts.append(t)
        ys.append(y)
    return np.array(ts), np.array(ys), hit


# ---------------------------------------------------------------------------
# fast-diffusion window
# ---------------------------------------------------------------------------

@dataclass
class FastDiffusionConstants:
    s: float
    beta: float
    valid: bool
    N: int
    p_minus: float
    p_plus: float

    def t3(self, G0: float, C2: float, C3: float) -> float:
        """Extinction-time bound of the fast-diffusion window, requiring the
        small-data condition C2/C3 > G(0)^theta with
        theta = (N p- - p+ (N - p-)) / (2 N p-); G(0) = int u0^(s+1)."""
        pm, pp, N = self.p_minus, self.p_plus, self.N
        gap = N * pm - pp * (N - pm)
        theta = gap / (2.0 * N * pm)
        g0t = G0**theta
        ratio = C2 / C3
        if ratio <= g0t:
            return math.inf
        lead = pm * pm / (C3 * (2.0 - pm) * gap)
        return lead * math.log(1.0 + g0t / (ratio - g0t))


def fast_diffusion_constants(N: int, p_minus: float, p_plus: float) -> FastDiffusionConstants:
    """Test-function exponent s = (2N-(N+1)p-)/p-, power beta =
    (2-p-)(N-p-)/(p-)^2, and the validity of the exponent window
    1 < p- < 2N/(N+2), 1 < p+ < Np-/(N-p-).  The window is empty for N <= 2."""
    s = (2.0 * N - (N + 1.0) * p_minus) / p_minus
    beta = (2.0 - p_minus) * (N - p_minus) / (p_minus * p_minus)
    valid = (1.0 < p_minus < 2.0 * N / (N + 2.0)
             and 1.0 < p_plus < N * p_minus / (N - p_minus))
    return FastDiffusionConstants(s=s, beta=beta, valid=valid, N=N,
                                  p_minus=p_minus, p_plus=p_plus)


# ---------------------------------------------------------------------------
# assembled constants and the classifier
# ---------------------------------------------------------------------------

@dataclass
class TheoryConstants:
    p_minus: float
    p_plus: float
    r: float
    N: int
    omega_measure: float
    B: float = math.nan
    C2: float = math.nan
    B1: float = math.nan
    alpha1: float = math.nan
    e1_printed: float = math.nan
    e1_peak: float = math.nan
    alpha2: float = math.nan
    C0: float = math.nan
    T_star: float = math.nan
    C1: float = math.nan
    K1: float = math.nan
    F_u0: float = math.nan
    T1: float = math.nan
    s: float = math.nan
    beta: float = math.nan
    T3: float = math.nan
    provenance: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    extinction: ExtinctionConstants | None = None
    critical: CriticalConstants | None = None
    fast: FastDiffusionConstants | None = None

    @property
    def e1_used(self) -> float:
        return self.e1_peak

    def to_json(self) -> dict:
        keys = ("p_minus", "p_plus", "r", "N", "omega_measure", "B", "C2", "B1",
                "alpha1", "e1_printed", "e1_peak", "alpha2", "C0", "T_star", "C1",
                "K1", "F_u0", "T1", "s", "beta", "T3")
        out = {k: getattr(self, k) for k in keys}
        out["e1_used"] = self.e1_used
        out["provenance"] = dict(self.provenance)
        out["notes"] = list(self.notes)
        return out


@dataclass
class RegimeReport:
    hypotheses: dict  # name -> {"holds": bool, "witness": {...}}
    label: str
    satisfied: list

    def to_json(self) -> dict:
        return {"label": self.label, "satisfied": list(self.satisfied),
                "hypotheses": self.hypotheses}


def classify_regime(constants: TheoryConstants, *, E0: float, grad_norm_p: float,
                    u0_l2: float, u0_min: float, u0_linf: float) -> RegimeReport:
    """Evaluate the hypothesis blocks H1..H11 on the discretized initial data
    and emit exactly one regime label.

    Priority: blow_up > fast_diffusion_extinction > extinction_small_data >
    non_extinction > global_Linf_growth > global_L2_growth > unknown.  The
    exponent windows are mutually exclusive except at their boundaries, where
    the strict inequalities fail and the label falls through to unknown.
    """
    pm, pp, r, N = constants.p_minus, constants.p_plus, constants.r, constants.N
    hyp: dict[str, dict] = {}

    def put(name, holds, **witness):
        hyp[name] = {"holds": bool(holds), "witness": witness}

    # H2 window, then H1 data conditions (blow-up)
    r_cap = (2.0 * N + (N + 2.0) * (pm - 1.0)) / N
    h2 = (max(1.0, 2.0 * N / (N + 2.0)) < pm < N) and (max(2.0, pp) < r <= r_cap)
    put("H2", h2, p_minus=pm, N=N, r=r, r_cap=r_cap)
    h1 = False
    if math.isfinite(constants.alpha1) and math.isfinite(constants.e1_used):
        gcond = min(grad_norm_p**pm, grad_norm_p**pp) > constants.alpha1
        h1 = (E0 < constants.e1_used) and gcond
        put("H1", h1, E0=E0, e1_used=constants.e1_used, grad_norm_p=grad_norm_p,
            alpha1=constants.alpha1, grad_condition=gcond)
    else:
        put("H1", False, note="alpha1/E1 unavailable (needs r > p_plus and B)")

    # H5/H6 (global L2 growth, r = 2)
    h6 = (2.0 * N / (N + 2.0) < pm < pp < r) and (r == 2.0)
    put("H6", h6, p_minus=pm, p_plus=pp, r=r)
    put("H5", h1, same_conditions_as="H1")

    # H7/H8 (global Linf growth, r < 2, nonnegative data, E(0) <= 0)
    h7 = (E0 <= 0.0) and (u0_min >= 0.0)
    put("H7", h7, E0=E0, u0_min=u0_min)
    h8 = 2.0 * N / (N + 2.0) < pm < pp < r < 2.0
    put("H8", h8, p_minus=pm, p_plus=pp, r=r)

    # H9 (small-data extinction): window plus the quantitative certificate
    h9_window = 2.0 * N / (N + 2.0) < pm < pp < r <= 2.0
    small = constants.extinction.data_small_enough if constants.extinction else False
    put("H9", h9_window and small, window=h9_window, data_small_enough=small,
        K1=constants.K1, F_u0=constants.F_u0, T1=constants.T1)

    # H10 (non-extinction, data positively bounded below)
    h10 = (2.0 * N / (N + 2.0) < r < pm < pp <= 2.0) and (u0_min > 0.0)
    put("H10", h10, r=r, p_minus=pm, p_plus=pp, u0_min=u0_min)

    # H11 (fast diffusion): exponent window, r >= 2, small-data certificate
    fast_ok = constants.fast.valid if constants.fast else False
    t3_finite = math.isfinite(constants.T3)
    put("H11", fast_ok and r >= 2.0 and t3_finite, window=fast_ok, r=r,
        T3=constants.T3, small_data=t3_finite)

    satisfied = []
    if hyp["H1"]["holds"] and hyp["H2"]["holds"] and constants.C0 > 0:
        satisfied.append("blow_up")
    if hyp["H11"]["holds"]:
        satisfied.append("fast_diffusion_extinction")
    if hyp["H9"]["holds"]:
        satisfied.append("extinction_small_data")
    if hyp["H10"]["holds"]:
        satisfied.append("non_extinction")
    if hyp["H7"]["holds"] and hyp["H8"]["holds"]:
        satisfied.append("global_Linf_growth")
    if hyp["H5"]["holds"] and hyp["H6"]["holds"]:
        satisfied.append("global_L2_growth")

    label = "unknown"
    for lab in PRIORITY:
        if lab in satisfied:
            label = lab
            break
    return RegimeReport(hypotheses=hyp, label=label, satisfied=satisfied)


def build_constants(p_minus: float, p_plus: float, r: float, N: int,
                    omega_measure: float, *, B: float = math.nan,
                    C2: float = math.nan, E0: float = math.nan,
                    G0_half: float = math.nan, u0_l2: float = math.nan,
                    G0_fast: float = math.nan, C3: float = math.nan) -> TheoryConstants:
    """Assemble every constant whose preconditions hold; tag provenance.

    B and C2 are estimated embedding constants (L^r and L^2 targets); E0,
    G0_half, u0_l2 come from the discretized initial data; G0_fast is
    int u0^(s+1) for the fast-diffusion window and C3 its source coefficient.
    """
    tc = TheoryConstants(p_minus=p_minus, p_plus=p_plus, r=r, N=N,
                         omega_measure=omega_measure, B=B, C2=C2)
    prov = tc.provenance
    prov["B"] = "estimated"
    prov["C2"] = "estimated"

    if math.isfinite(B) and r > p_plus:
        crit = critical_constants(B, p_minus, p_plus, r)
        tc.critical = crit
        tc.B1, tc.alpha1 = crit.B1, crit.alpha1
        tc.e1_printed, tc.e1_peak = crit.e1_printed, crit.e1_peak
        prov.update(B1="formula", alpha1="formula", e1_printed="formula",
                    e1_peak="formula")
        if crit.e1_printed != crit.e1_peak:
            tc.notes.append("printed E1 differs from peak h(alpha1); peak used downstream")
        if math.isfinite(E0) and E0 < crit.e1_peak:
            tc.alpha2 = solve_alpha2(E0, crit, p_minus, p_plus, r)
            prov["alpha2"] = "root-found"
            if r > max(2.0, p_plus):
                c0, rep = blow_up_constants(tc.alpha2, crit, r, p_plus, p_minus,
                                            omega_measure)
                tc.C0 = c0
                prov["C0"] = "formula (depends on estimated B)"
                if not rep["positive"]:
                    tc.notes.append("C0 <= 0: blow-up bound unavailable")
                elif math.isfinite(G0_half) and G0_half > 0:
                    tc.T_star = blow_up_time_bound(G0_half, c0, r)
                    prov["T_star"] = "formula (depends on estimated B)"

    if math.isfinite(C2):
        tc.C1 = derive_C1(C2, p_minus, p_plus)
        prov["C1"] = "derived from estimated C2"
        if (2.0 * N / (N + 2.0) < p_minus <= p_plus < r <= 2.0
                and math.isfinite(u0_l2) and u0_l2 > 0):
            ext = extinction_constants(u0_l2, tc.C1, p_minus, p_plus, r, omega_measure, N)
            tc.extinction = ext
            tc.K1, tc.F_u0, tc.T1 = ext.K1, ext.F_u0, ext.T1
            prov.update(K1="formula (depends on estimated C1)",
                        F_u0="formula (depends on estimated C1)",
                        T1="formula (depends on estimated C1)")

    fast = fast_diffusion_constants(N, p_minus, p_plus)
    tc.fast = fast
    tc.s, tc.beta = fast.s, fast.beta
    prov.update(s="formula", beta="formula")
    if fast.valid and math.isfinite(G0_fast) and math.isfinite(C2) and math.isfinite(C3):
        tc.T3 = fast.t3(G0_fast, C2, C3)
        prov["T3"] = "formula (depends on estimated C2, C3; informational)"
    return tc
