"""Time integration of the reaction-diffusion problem and per-step diagnostics.

Forward Euler with an adaptive step recomputed every step:

    dt = safety * min( 1/(2 * D_max * sum_a h_a^-2),  1/(R_max + delta) )

where D_max is the largest regularized face diffusivity actually present and
R_max = (r-1) * ||u||_inf^(r-2) is the reaction rate at the largest magnitude.
For uniform spacing the diffusion part is the classical safety*h^2/(2N*D_max).
No semi-implicit solver: the degenerate/singular diffusivity would make the
implicit solves a project of their own, and the explicit scheme stays
auditable.  Near blow-up dt shrinks with R_max and the run stops at the
threshold crossing instead of resolving the singularity; the observed time
carries a one-dt error bar.

Events: blow_up when ||u||_inf >= blow_up_threshold; extinction when
||u||_2 <= extinction_rel_threshold * ||u_0||_2.  Values below 1e-14 in
magnitude are flushed to 0 so discrete dead cores can form despite
floating-point dust.  Non-finite values propagate as a blow-up signal.

u_t diagnostics use the forward difference, which for this scheme equals the
right-hand side at the recorded state, so the dissipation identity
E(t2) - E(t1) = -int ||u_t||_2^2 dt holds to first order in dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import kernels
from .exponents import ExponentField, bounds
from .grid import Grid, ScalarField
from .operators import gradient_faces, px_laplacian, source_term
from .spaces import energy_functional, grad_modular, lr_norm

FLUSH_TOL = 1e-14
DT_MIN = 1e-15


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class InitialSpec:
    """Named initial profile: zero | constant | product_sine (A * prod_a
    sin(mode*pi*x_a/L_a))."""

    profile: str = "product_sine"
    amplitude: float = 1.0
    mode: int = 1

    def build(self, grid: Grid) -> ScalarField:
        if self.profile == "zero":
            return ScalarField(grid, np.zeros(grid.cells))
        if self.profile == "constant":
            return ScalarField(grid, np.full(grid.cells, self.amplitude))
        if self.profile == "product_sine":
            vals = np.full(grid.cells, self.amplitude)
            for a in range(grid.dim):
                x = grid.axis_centers(a) / grid.extent[a]
                shape = [1] * grid.dim
                shape[a] = -1
                vals = vals * np.sin(self.mode * np.pi * x).reshape(shape)
            return ScalarField(grid, vals)
        raise ValueError(f"unknown initial profile {self.profile!r}")

    def to_json(self) -> dict:
        return {"profile": self.profile, "amplitude": self.amplitude, "mode": self.mode}

    @classmethod
    def from_json(cls, obj: dict) -> "InitialSpec":
        return cls(profile=obj.get("profile", "product_sine"),
                   amplitude=float(obj.get("amplitude", 1.0)),
                   mode=int(obj.get("mode", 1)))


@dataclass
class AuxSource:
    """Source lam1*v^r/(eps*Phi + lam1*v) of the auxiliary comparison problem."""

    epsilon: float
    lambda1: float
    phi: np.ndarray = dc_field(repr=False)


@dataclass
class SimConfig:
    grid: Grid
    exponent: ExponentField
    r: float
    initial: InitialSpec
    t_max: float
    dt_safety: float = 0.8
    eps_reg: float = 1e-8
    blow_up_threshold: float = 1e8
    extinction_rel_threshold: float = 1e-10
    source_kind: str = "standard"  # standard | none | barrier_auxiliary
    aux: Optional[AuxSource] = None
    stride: int = 100
    snapshot_times: tuple[float, ...] = ()
    keep_snapshots: bool = False
    e1: float = math.nan
    backend: str = "auto"  # auto | numba | numpy

    def validate(self) -> None:
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if not 0 < self.dt_safety <= 1:
            raise ValueError("dt_safety must be in (0, 1]")
        if self.r <= 1:
            raise ValueError("r must be > 1")
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be >= 0")
        if self.blow_up_threshold <= 0 or self.extinction_rel_threshold <= 0:
            raise ValueError("event thresholds must be positive")
        if not math.isfinite(self.initial.amplitude):
            raise ValueError("initial amplitude must be finite")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.source_kind not in ("standard", "none", "barrier_auxiliary"):
            raise ValueError(f"unknown source kind {self.source_kind!r}")
        if self.source_kind == "barrier_auxiliary" and self.aux is None:
            raise ValueError("barrier_auxiliary source needs aux data")

    def to_json(self) -> dict:
        obj = {
            "grid": self.grid.to_json(),
            "exponent": self.exponent.to_json(),
            "r": self.r,
            "initial": self.initial.to_json(),
            "t_max": self.t_max,
            "dt_safety": self.dt_safety,
            "eps_reg": self.eps_reg,
            "blow_up_threshold": self.blow_up_threshold,
            "extinction_rel_threshold": self.extinction_rel_threshold,
            "source": self.source_kind,
            "stride": self.stride,
        }
        if self.source_kind == "barrier_auxiliary" and self.aux is not None:
            obj["aux"] = {"epsilon": self.aux.epsilon, "lambda1": self.aux.lambda1}
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "SimConfig":
        return cls(
            grid=Grid.from_json(obj["grid"]),
            exponent=ExponentField.from_json(obj["exponent"]),
            r=float(obj["r"]),
            initial=InitialSpec.from_json(obj.get("initial", {})),
            t_max=float(obj["t_max"]),
            dt_safety=float(obj.get("dt_safety", 0.8)),
            eps_reg=float(obj.get("eps_reg", 1e-8)),
            blow_up_threshold=float(obj.get("blow_up_threshold", 1e8)),
            extinction_rel_threshold=float(obj.get("extinction_rel_threshold", 1e-10)),
            source_kind=obj.get("source", "standard"),
            stride=int(obj.get("stride", 100)),
        )


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass
class EnergyRecord:
    t: float
    E: float
    G_half: float  # (1/2) int u^2, the convention of the blow-up analysis
    G_sq: float    # int u^2, the convention of the extinction analysis
    H: float       # E1 - E (nan when E1 is not available)
    ut_l2sq: float
    grad_modular: float
    lr: float
    linf: float

    CSV_HEADER = "t,E,G_half,G_sq,H,ut_l2sq,grad_modular,lr,linf"

    def csv_row(self) -> str:
        return ",".join(repr(v) for v in (self.t, self.E, self.G_half, self.G_sq, self.H,
                                          self.ut_l2sq, self.grad_modular, self.lr, self.linf))


@dataclass
class EventInfo:
    kind: str  # none | blow_up | extinction
    t_obs: float = math.nan
    dt_last: float = math.nan
    note: str = ""

    def to_json(self) -> dict:
        return {"kind": self.kind, "t_obs": self.t_obs, "dt_last": self.dt_last,
                "note": self.note}


class TimeStepUnderflow(RuntimeError):
    """dt fell below DT_MIN: the singularity is not resolvable at this grid."""

    def __init__(self, message: str, partial: "SimResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class SimResult:
    config: SimConfig
    records: list[EnergyRecord]
    event: EventInfo
    final_field: ScalarField
    dt_record: np.ndarray       # dt of the last step before each record
    steps_record: np.ndarray    # cumulative step count at each record
    dissipation_cum: np.ndarray  # sum dt*||u_t||_2^2 up to each record
    snapshots: list[tuple[float, np.ndarray]]
    total_steps: int
    backend: str

    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    def write_series_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(EnergyRecord.CSV_HEADER + "\n")
            for rec in self.records:
                f.write(rec.csv_row() + "\n")


# ---------------------------------------------------------------------------
# right-hand side (reference path) and stable_dt
# ---------------------------------------------------------------------------

def rhs(u: ScalarField, config: SimConfig) -> ScalarField:
    """Diffusion plus source at the given state (numpy reference path)."""
    lap = px_laplacian(u, config.exponent, config.eps_reg)
    if config.source_kind == "none":
        return lap
    if config.source_kind == "standard":
        src = source_term(u, config.r)
        return ScalarField(u.grid, lap.values + src.values)
    aux = config.aux
    v = np.maximum(u.values, 0.0)
    src = np.zeros_like(v)
    pos = v > 0.0
    src[pos] = aux.lambda1 * v[pos] ** config.r / (aux.epsilon * aux.phi[pos]
                                                  + aux.lambda1 * v[pos])
    return ScalarField(u.grid, lap.values + src)


def max_face_diffusivity(u: ScalarField, p: ExponentField, eps_reg: float) -> float:
    faces = gradient_faces(u)
    eps2 = eps_reg * eps_reg
    dmax = 0.0
    for a in range(u.grid.dim):
        pf = p.face_values(u.grid, a)
        dmax = max(dmax, float(np.max((faces.magnitude_sq[a] + eps2) ** (0.5 * (pf - 2.0)))))
    return dmax


def stable_dt(u: ScalarField, p: ExponentField, r: float, safety: float = 0.8,
              eps_reg: float = 1e-8) -> float:
    """Explicit-step bound safety * min(diffusion CFL, reaction rate cap).

    The reaction rate (r-1)|u|^(r-2) is evaluated at ||u||_inf: for r < 2 its
    literal cell-wise max diverges at flushed zeros while the increment there
    vanishes, so the largest magnitude is the meaningful scale.
    """
    if not 0 < safety <= 1:
        raise ValueError("safety must be in (0, 1]")
    dmax = max_face_diffusivity(u, p, eps_reg)
    linf = u.linf()
    rmax = (r - 1.0) * linf ** (r - 2.0) if linf > 0 else 0.0
    if not (np.isfinite(dmax) and np.isfinite(rmax)):
        raise FloatingPointError("non-finite diffusivity or reaction rate")
    inv_sum = sum(1.0 / h**2 for h in u.grid.spacing)
    return safety * min(1.0 / (2.0 * dmax * inv_sum), 1.0 / (rmax + kernels.DT_DELTA))


def step(u: ScalarField, config: SimConfig, dt: float) -> ScalarField:
    """One forward-Euler step u + dt*rhs(u).  Caller guarantees dt is stable."""
    out = u.values + dt * rhs(u, config).values
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("step produced non-finite values (blow-up signal)")
    return ScalarField(u.grid, out)


# ---------------------------------------------------------------------------
# numpy fallback integrator (kernel-equivalent semantics)
# ---------------------------------------------------------------------------

def _integrate_numpy(vals, grid, pf, qf, eps2, r, safety, mode, phi, aux_eps, lam1,
                     t, t_stop, max_steps, linf_cap, l2sq_floor, flush_tol, dt_min,
                     linf_in):
    h = grid.spacing
    vol = grid.cell_volume
    inv_sum = sum(1.0 / ha**2 for ha in h)
    linf = linf_in
    l2sq = 0.0
    diss = 0.0
    dt = 0.0
    steps = 0
    u = ScalarField(grid, vals)
    while steps < max_steps:
        faces = gradient_faces(u)
        dmax = 0.0
        rhs_vals = np.zeros(grid.cells)
        for a in range(grid.dim):
            D = (faces.magnitude_sq[a] + eps2) ** qf[a]
            dmax = max(dmax, float(np.max(D)))
            F = D * faces.normal[a]
            Fm = np.moveaxis(F, a, 0)
            rhs_vals += np.moveaxis((Fm[1:] - Fm[:-1]) / h[a], 0, a)
        if not np.isfinite(dmax):
            return vals, steps, t, kernels.CODE_NONFINITE, dt, diss, linf, l2sq
        if mode == 1:
            rhs_vals += np.sign(vals) * np.abs(vals) ** (r - 1.0)
        elif mode == 2:
            v = np.maximum(vals, 0.0)
            pos = v > 0
            add = np.zeros_like(v)
            add[pos] = lam1 * v[pos] ** r / (aux_eps * phi[pos] + lam1 * v[pos])
            rhs_vals += add

        rmax = (r - 1.0) * linf ** (r - 2.0) if (mode != 0 and linf > 0) else 0.0
        dt = safety * min(1.0 / (2.0 * dmax * inv_sum), 1.0 / (rmax + kernels.DT_DELTA))
        if not np.isfinite(dt) or dt < dt_min:
            return vals, steps, t, kernels.CODE_DT_UNDERFLOW, dt, diss, linf, l2sq
        hit_stop = False
        if t + dt >= t_stop:
            dt = t_stop - t
            hit_stop = True

        ut2 = float(np.sum(rhs_vals**2))
        vals = vals + dt * rhs_vals
        finite = bool(np.all(np.isfinite(vals)))
        vals[np.abs(vals) < flush_tol] = 0.0
        linf = float(np.max(np.abs(vals)))
        l2sq = float(np.sum(vals**2) * vol)
        diss += dt * ut2 * vol
        steps += 1
        t = t_stop if hit_stop else t + dt
        u = ScalarField(grid, vals)
        if not finite:
            return vals, steps, t, kernels.CODE_NONFINITE, dt, diss, linf, l2sq
        if linf >= linf_cap:
            return vals, steps, t, kernels.CODE_BLOWUP, dt, diss, linf, l2sq
        if l2sq <= l2sq_floor:
            return vals, steps, t, kernels.CODE_EXTINCT, dt, diss, linf, l2sq
        if hit_stop:
            return vals, steps, t, kernels.CODE_TSTOP, dt, diss, linf, l2sq
    return vals, steps, t, kernels.CODE_CHUNK, dt, diss, linf, l2sq


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _make_record(u: ScalarField, config: SimConfig, t: float) -> EnergyRecord:
    vol = u.grid.cell_volume
    g_sq = float(np.sum(u.values**2) * vol)
    try:
        ut = rhs(u, config)
        ut_l2sq = float(np.sum(ut.values**2) * vol)
    except FloatingPointError:
        ut_l2sq = math.nan
    with np.errstate(over="ignore"):
        e = energy_functional(u, config.exponent, config.r)
        gm = grad_modular(u, config.exponent)
        lr = lr_norm(u, config.r)
    return EnergyRecord(t=t, E=e, G_half=0.5 * g_sq, G_sq=g_sq,
                        H=config.e1 - e, ut_l2sq=ut_l2sq, grad_modular=gm,
                        lr=lr, linf=u.linf())


def run(config: SimConfig) -> SimResult:
    """Integrate until t_max or an event, recording diagnostics every
    ``stride`` steps and at every snapshot time (hit exactly by clipping dt)."""
    config.validate()
    grid = config.grid
    bounds(config.exponent, grid)  # validates (1.2) and caches extrema
    u = config.initial.build(grid)
    vals = u.values.copy()

    use_numba = kernels.HAVE_NUMBA and config.backend in ("auto", "numba")
    if config.backend == "numba" and not kernels.HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable")

    pf = [config.exponent.face_values(grid, a) for a in range(grid.dim)]
    qf = [0.5 * (p_a - 2.0) for p_a in pf]
    eps2 = config.eps_reg**2
    mode = {"none": 0, "standard": 1, "barrier_auxiliary": 2}[config.source_kind]
    phi = config.aux.phi if config.aux is not None else np.zeros(grid.cells)
    lam1 = config.aux.lambda1 if config.aux is not None else 0.0
    aux_eps = config.aux.epsilon if config.aux is not None else 0.0

    l2sq0 = float(np.sum(vals**2) * grid.cell_volume)
    # zero data is a fixed point, not an extinction event
    l2sq_floor = (config.extinction_rel_threshold**2) * l2sq0 if l2sq0 > 0 else -1.0
    linf = float(np.max(np.abs(vals)))

    stops = sorted(set(float(ts) for ts in config.snapshot_times if 0.0 < ts <= config.t_max))
    stops.append(config.t_max)

    records = [_make_record(ScalarField(grid, vals.copy()), config, 0.0)]
    dt_rec, steps_rec, diss_rec = [0.0], [0], [0.0]
    snapshots: list[tuple[float, np.ndarray]] = []
    if config.keep_snapshots:
        snapshots.append((0.0, vals.copy()))

    t = 0.0
    total_steps = 0
    diss_total = 0.0
    event = EventInfo(kind="none")
    stop_idx = 0

    while True:
        while stop_idx < len(stops) and stops[stop_idx] <= t:
            stop_idx += 1
        if stop_idx >= len(stops):
            break
        t_stop = stops[stop_idx]
        if use_numba:
            args = (eps2, config.r, config.dt_safety, mode, phi, lam1, aux_eps,
                    t, t_stop, config.stride, config.blow_up_threshold, l2sq_floor,
                    FLUSH_TOL, DT_MIN, linf)
            if grid.dim == 1:
                out = kernels.integrate_1d(vals, pf[0], qf[0], grid.spacing[0],
                                           grid.cell_volume, *args)
            elif grid.dim == 2:
                out = kernels.integrate_2d(vals, pf[0], qf[0], pf[1], qf[1],
                                           grid.spacing[0], grid.spacing[1],
                                           grid.cell_volume, *args)
            else:
                out = kernels.integrate_3d(vals, pf[0], qf[0], pf[1], qf[1], pf[2], qf[2],
                                           grid.spacing[0], grid.spacing[1], grid.spacing[2],
                                           grid.cell_volume, *args)
            steps, t, code, dt_last, diss, linf, _ = out
        else:
            vals, steps, t, code, dt_last, diss, linf, _ = _integrate_numpy(
                vals, grid, pf, qf, eps2, config.r, config.dt_safety, mode, phi,
                aux_eps, lam1, t, t_stop, config.stride, config.blow_up_threshold,
                l2sq_floor, FLUSH_TOL, DT_MIN, linf)
        total_steps += steps
        diss_total += diss

        records.append(_make_record(ScalarField(grid, vals.copy()), config, t))
        dt_rec.append(dt_last)
        steps_rec.append(total_steps)
        diss_rec.append(diss_total)

        if code == kernels.CODE_DT_UNDERFLOW:
            partial = SimResult(config=config, records=records,
                                event=EventInfo("none", note="dt underflow"),
                                final_field=ScalarField(grid, vals.copy()),
                                dt_record=np.array(dt_rec), steps_record=np.array(steps_rec),
                                dissipation_cum=np.array(diss_rec), snapshots=snapshots,
                                total_steps=total_steps,
                                backend="numba" if use_numba else "numpy")
            raise TimeStepUnderflow(
                f"dt={dt_last:.3e} underflowed below {DT_MIN} at t={t:.6e} "
                f"(unresolved singularity)", partial)
        if code == kernels.CODE_BLOWUP:
            event = EventInfo("blow_up", t_obs=t, dt_last=dt_last)
            break
        if code == kernels.CODE_NONFINITE:
            event = EventInfo("blow_up", t_obs=t, dt_last=dt_last,
                              note="non-finite values (instability or overflow)")
            break
        if code == kernels.CODE_EXTINCT:
            event = EventInfo("extinction", t_obs=t, dt_last=dt_last)
            break
        if code == kernels.CODE_TSTOP:
            if config.keep_snapshots:
                snapshots.append((t, vals.copy()))
            if t >= config.t_max:
                break

    return SimResult(config=config, records=records, event=event,
                     final_field=ScalarField(grid, vals.copy()),
                     dt_record=np.array(dt_rec), steps_record=np.array(steps_rec),
                     dissipation_cum=np.array(diss_rec), snapshots=snapshots,
                     total_steps=total_steps,
                     backend="numba" if use_numba else "numpy")
