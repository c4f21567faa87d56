"""Trajectory-level verification of the analytic inequalities.

Every check consumes a SimResult (plus constants where needed) and returns a
CheckResult with pass/fail, per-record margins, and details.  Margins are
oriented so that negative/zero means the inequality holds; ``passed`` applies
the stated slack.  Checks that consume estimated embedding constants also
report the verdict under the constant scaled by 1/2 and 2 (sensitivity rows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .simulator import SimResult
from .theory import ExtinctionConstants, TheoryConstants, extinction_constants


@dataclass
class CheckResult:
    name: str
    passed: bool
    margins: np.ndarray = field(default=None, repr=False)
    details: dict = field(default_factory=dict)
    sensitivity: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"name": self.name, "passed": bool(self.passed), "details": self.details}
        if self.margins is not None:
            m = np.asarray(self.margins, dtype=float)
            out["margins"] = {"worst": float(np.max(m)) if m.size else math.nan,
                              "count": int(m.size)}
        if self.sensitivity:
            out["sensitivity"] = self.sensitivity
        return out


def _pre_event_mask(result: SimResult) -> np.ndarray:
    t = result.times()
    if result.event.kind == "none":
        return np.ones_like(t, dtype=bool)
    return t < result.event.t_obs


# ---------------------------------------------------------------------------
# dissipation identity
# ---------------------------------------------------------------------------

def dissipation_residual(result: SimResult, t1: float, t2: float) -> float:
    """| E(t2) - E(t1) + sum dt*||u_t||_2^2 | over [t1, t2], the discrete form
    of the identity E' = -||u_t||_2^2 (nearest records are used)."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    t = result.times()
    if t1 < t[0] - 1e-12 or t2 > t[-1] + 1e-12:
        raise ValueError("interval outside the recorded range")
    i1 = int(np.argmin(np.abs(t - t1)))
    i2 = int(np.argmin(np.abs(t - t2)))
    E = result.series("E")
    D = result.dissipation_cum
    return float(abs(E[i2] - E[i1] + (D[i2] - D[i1])))


def check_dissipation(result: SimResult, slack_factor: float = 10.0) -> CheckResult:
    """E non-increasing at every record within the per-step slack
    slack_factor * dt * max ||u_t||_2^2."""
    E = result.series("E")
    ut = result.series("ut_l2sq")
    dt = result.dt_record
    rises = np.diff(E)
    allow = slack_factor * np.maximum(dt[1:], 1e-300) * np.maximum.reduce(
        [ut[:-1], ut[1:]])
    margins = rises - allow
    ok = bool(np.all(margins <= 0.0))
    res_total = dissipation_residual(result, result.records[0].t, result.records[-1].t)
    return CheckResult("dissipation", ok, margins,
                       {"residual_full_range": res_total,
                        "max_energy_rise": float(np.max(rises)) if rises.size else 0.0})


# ---------------------------------------------------------------------------
# sup-norm growth bound (r < 2, nonnegative data, E(0) <= 0)
# ---------------------------------------------------------------------------

def check_linf_bound(result: SimResult, r: float,
                     rel_slack: float = 1e-3) -> CheckResult:
    """||u(t)||_inf <= (||u0||_inf^(2-r) + (1-r/2)t)^(1/(2-r)) at every record."""
    if r >= 2:
        raise ValueError("the sup-norm bound lives in the r < 2 window")
    t = result.times()
    linf = result.series("linf")
    u0 = linf[0]
    bound = (u0 ** (2.0 - r) + (1.0 - r / 2.0) * t) ** (1.0 / (2.0 - r))
    margins = linf - bound * (1.0 + rel_slack)
    return CheckResult("linf_bound", bool(np.all(margins <= 0.0)), margins,
                       {"worst_ratio": float(np.max(linf / bound))})


# ---------------------------------------------------------------------------
# L2 extinction envelope (small-data window)
# ---------------------------------------------------------------------------

def _envelope_margins(result: SimResult, ext: ExtinctionConstants,
                      t_slack: float) -> tuple[bool, np.ndarray, dict]:
    t = result.times()
    l2 = np.sqrt(result.series("G_sq"))
    mask = t < ext.T1
    env = ext.envelope_l2(t[mask])
    margins = l2[mask] - env
    ok = bool(np.all(margins <= 0.0))
    details = {"T1": ext.T1, "records_below_T1": int(mask.sum())}
    if math.isfinite(ext.T1):
        if result.event.kind == "extinction":
            details["t_obs"] = result.event.t_obs
            ok = ok and result.event.t_obs <= ext.T1 * (1.0 + t_slack)
        else:
            ok = False
            details["t_obs"] = None
    return ok, margins, details


def check_l2_envelope(result: SimResult, constants: TheoryConstants,
                      t_slack: float = 0.05) -> CheckResult:
    """||u(t)||_2 <= g(t)^(1/(2-p_plus)) for t < T1 and extinction by
    T1*(1+t_slack); sensitivity rows rebuild T1/envelope at C1*(1/2) and C1*2."""
    if constants.extinction is None or not math.isfinite(constants.C1):
        raise ValueError("l2 envelope needs extinction constants (estimated C1 present)")
    ext = constants.extinction
    ok, margins, details = _envelope_margins(result, ext, t_slack)
    sens = {}
    for tag, fac in (("C1_half", 0.5), ("C1_double", 2.0)):
        try:
            ext_s = extinction_constants(ext.u0_l2, fac * ext.C1, ext.p_minus,
                                         ext.p_plus, ext.r, ext.omega_measure,
                                         constants.N)
            ok_s, _, det_s = _envelope_margins(result, ext_s, t_slack)
            sens[tag] = {"passed": ok_s, "T1": ext_s.T1,
                         "data_small_enough": ext_s.data_small_enough}
        except ValueError as exc:
            sens[tag] = {"passed": None, "error": str(exc)}
    return CheckResult("l2_envelope", ok, margins, details, sensitivity=sens)


# ---------------------------------------------------------------------------
# lower bounds along certified blow-up trajectories
# ---------------------------------------------------------------------------

def check_lemma24(result: SimResult, constants: TheoryConstants,
                  slack: float = 0.01) -> CheckResult:
    """At every pre-event record: int |grad u|^p >= alpha2 and
    int |u|^r >= B1^r * max{alpha2^(r/p-), alpha2^(r/p+)}, within ``slack``.

    The second bound is also the display that feeds the blow-up constant
    (p+ E1 <= p+ E1/(B1^r max...) * int |u|^r is the same inequality)."""
    if not math.isfinite(constants.alpha2):
        raise ValueError("lemma24 check needs alpha2 (certified H1 data)")
    mask = _pre_event_mask(result)
    gm = result.series("grad_modular")[mask]
    lr = result.series("lr")[mask]
    r = constants.r
    floor_grad = constants.alpha2
    floor_react = constants.B1**r * max(constants.alpha2 ** (r / constants.p_minus),
                                        constants.alpha2 ** (r / constants.p_plus))
    m1 = floor_grad * (1.0 - slack) - gm
    m2 = floor_react * (1.0 - slack) - lr**r
    margins = np.concatenate([m1, m2])
    return CheckResult("lemma24", bool(np.all(margins <= 0.0)), margins,
                       {"grad_floor": floor_grad, "react_floor": floor_react,
                        "min_grad_modular": float(np.min(gm)) if gm.size else math.nan,
                        "min_react": float(np.min(lr**r)) if lr.size else math.nan})


def check_blowup_rate(result: SimResult, constants: TheoryConstants,
                      slack: float = 0.05) -> CheckResult:
    """Discrete slope of G = (1/2) int u^2 between consecutive pre-event
    records is >= C0 * G^(r/2) * (1 - slack)."""
    if not (math.isfinite(constants.C0) and constants.C0 > 0):
        raise ValueError("blow-up rate check needs C0 > 0")
    mask = _pre_event_mask(result)
    t = result.times()[mask]
    G = result.series("G_half")[mask]
    if t.size < 2:
        raise ValueError("not enough pre-event records")
    slopes = np.diff(G) / np.diff(t)
    floor = constants.C0 * G[:-1] ** (constants.r / 2.0) * (1.0 - slack)
    margins = floor - slopes
    return CheckResult("blowup_rate", bool(np.all(margins <= 0.0)), margins,
                       {"C0": constants.C0,
                        "min_slope_ratio": float(np.min(slopes / (constants.C0 * G[:-1] ** (constants.r / 2.0))))})


def check_growth_floor(result: SimResult, constants: TheoryConstants,
                       slack: float = 0.01) -> CheckResult:
    """Global-growth window: G_half(t) >= G_half(0) * exp(c t) with
    c = C0 * 2^((2-r)/2) * |Omega|^((r-2)/2), and G_half non-decreasing."""
    if not (math.isfinite(constants.C0) and constants.C0 > 0):
        raise ValueError("growth floor needs C0 > 0")
    t = result.times()
    G = result.series("G_half")
    c = constants.C0 * 2.0 ** ((2.0 - constants.r) / 2.0) \
        * constants.omega_measure ** ((constants.r - 2.0) / 2.0)
    floor = G[0] * np.exp(c * t) * (1.0 - slack)
    margins = floor - G
    monotone = bool(np.all(np.diff(G) >= -1e-12 * np.max(G)))
    ok = bool(np.all(margins <= 0.0)) and monotone
    return CheckResult("growth_floor", ok, margins,
                       {"rate": c, "monotone": monotone,
                        "min_ratio": float(np.min(G / np.maximum(floor, 1e-300)))})


def check_l2_increasing(result: SimResult) -> CheckResult:
    """||u||_2 non-decreasing at every record (sup-norm growth window)."""
    G = result.series("G_sq")
    drops = -np.diff(G)
    margins = drops - 1e-12 * np.max(G)
    return CheckResult("l2_increasing", bool(np.all(margins <= 0.0)), margins,
                       {"min_step": float(np.min(np.diff(G))) if G.size > 1 else 0.0})


def check_h_monotone_H(result: SimResult) -> CheckResult:
    """H = E1 - E non-decreasing whenever E1 is finite (complement of the
    dissipation check)."""
    H = result.series("H")
    if not np.all(np.isfinite(H)):
        raise ValueError("H check needs finite E1 in the records")
    drops = -np.diff(H)
    ut = result.series("ut_l2sq")
    dt = result.dt_record
    allow = 10.0 * np.maximum(dt[1:], 1e-300) * np.maximum.reduce([ut[:-1], ut[1:]])
    margins = drops - allow
    return CheckResult("H_monotone", bool(np.all(margins <= 0.0)), margins, {})
