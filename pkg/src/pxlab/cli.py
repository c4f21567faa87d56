"""Experiment runner and sweep harness.

Verbs:
    pxlab run <config.json>        constants -> classification -> simulation
                                   -> requested checks; writes report.json,
                                   series.csv, final_field.csv
    pxlab constants <config.json>  constants and classification only
    pxlab eigen <config.json>      first eigenpair; writes eigen.json, phi.csv
    pxlab sweep <sweep.json>       grid of runs; writes phase.csv

Exit codes: 0 success with all requested checks passing; 2 a requested check
failed or was incompatible with the regime; 1 config or runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field
from itertools import product
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from .eigen import (EigenPair, check_barrier_inequality, check_ordering,
                    epsilon_bound, first_eigenpair)
from .exponents import ExponentField, bounds, log_holder_estimate
from .grid import Grid, ScalarField, write_field_csv
from .simulator import (AuxSource, EnergyRecord, InitialSpec, SimConfig, SimResult,
                        TimeStepUnderflow, run)
from .spaces import (embedding_range_ok, estimate_embedding_constant,
                     grad_luxemburg_norm, lr_norm)
from .theory import TheoryConstants, build_constants, classify_regime

KNOWN_CHECKS = ("dissipation", "linf_bound", "l2_envelope", "barrier", "ordering",
                "lemma24", "blowup_rate", "growth_floor", "l2_increasing")

DEFAULT_SEED = 0x5EED


@dataclass
class ExperimentConfig:
    sim: SimConfig
    compute_constants: bool = True
    checks: tuple[str, ...] = ()
    seed: int = DEFAULT_SEED
    embedding_restarts: int = 4
    embedding_iters: int = 120
    eigen_tol: float = 1e-8
    eigen_max_iters: int = 40000
    barrier_epsilon_factor: float = 0.5
    barrier_T: float | None = None  # defaults to the simulation horizon
    ordering_snapshots: int = 21

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        if "sim" not in obj:
            raise ValueError("config must contain a 'sim' section")
        sim = SimConfig.from_json(obj["sim"])
        names = tuple(obj.get("checks", ()))
        for name in names:
            if name not in KNOWN_CHECKS:
                raise ValueError(f"unknown check {name!r}; known: {KNOWN_CHECKS}")
        emb = obj.get("embedding", {})
        bar = obj.get("barrier", {})
        return cls(sim=sim, compute_constants=bool(obj.get("compute_constants", True)),
                   checks=names, seed=int(obj.get("seed", DEFAULT_SEED)),
                   embedding_restarts=int(emb.get("restarts", 4)),
                   embedding_iters=int(emb.get("iters", 120)),
                   eigen_tol=float(obj.get("eigen_tol", 1e-8)),
                   eigen_max_iters=int(obj.get("eigen_max_iters", 40000)),
                   barrier_epsilon_factor=float(bar.get("epsilon_factor", 0.5)),
                   barrier_T=bar.get("T"),
                   ordering_snapshots=int(bar.get("snapshots", 21)))

    def to_json(self) -> dict:
        return {"sim": self.sim.to_json(), "compute_constants": self.compute_constants,
                "checks": list(self.checks), "seed": self.seed,
                "embedding": {"restarts": self.embedding_restarts,
                              "iters": self.embedding_iters},
                "eigen_tol": self.eigen_tol,
                "barrier": {"epsilon_factor": self.barrier_epsilon_factor,
                            "T": self.barrier_T, "snapshots": self.ordering_snapshots}}


def load_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}") from exc


# ---------------------------------------------------------------------------
# constants + classification stage
# ---------------------------------------------------------------------------

def initial_diagnostics(sim: SimConfig) -> dict:
    u0 = sim.initial.build(sim.grid)
    from .spaces import energy_functional, grad_modular, modular  # local to avoid cycle noise

    vol = sim.grid.cell_volume
    g_sq = float(np.sum(u0.values**2) * vol)
    return {
        "field": u0,
        "E0": energy_functional(u0, sim.exponent, sim.r),
        "G0_half": 0.5 * g_sq,
        "u0_l2": math.sqrt(g_sq),
        "u0_min": float(np.min(u0.values)),
        "u0_linf": float(np.max(np.abs(u0.values))),
        "grad_modular0": grad_modular(u0, sim.exponent),
        "grad_norm_p": grad_luxemburg_norm(u0, sim.exponent),
    }


def compute_stage(exp: ExperimentConfig) -> tuple[TheoryConstants, dict, dict]:
    """Embedding estimates, explicit constants, regime classification."""
    sim = exp.sim
    p_minus, p_plus = bounds(sim.exponent, sim.grid)
    N = sim.grid.dim
    omega = float(np.prod(sim.grid.extent))
    diag = initial_diagnostics(sim)

    B = math.nan
    C2 = math.nan
    notes = []
    if embedding_range_ok(p_minus, sim.r, N) and sim.r > 1:
        B = estimate_embedding_constant(sim.grid, sim.exponent, sim.r,
                                        restarts=exp.embedding_restarts,
                                        iters=exp.embedding_iters, seed=exp.seed).value
    else:
        notes.append(f"L^{sim.r} embedding target outside the admissible range")
    if embedding_range_ok(p_minus, 2.0, N):
        C2 = estimate_embedding_constant(sim.grid, sim.exponent, 2.0,
                                         restarts=exp.embedding_restarts,
                                         iters=exp.embedding_iters, seed=exp.seed).value
    else:
        notes.append("L^2 embedding target outside the admissible range")

    # fast-diffusion auxiliaries (informational)
    G0_fast = math.nan
    C3 = math.nan
    from .theory import fast_diffusion_constants

    fast = fast_diffusion_constants(N, p_minus, p_plus)
    if fast.valid and sim.r >= 2.0 and diag["u0_min"] >= 0.0 and fast.s > 0:
        u0 = diag["field"]
        G0_fast = float(np.sum(np.maximum(u0.values, 0.0) ** (fast.s + 1.0))
                        * sim.grid.cell_volume)
        # source coefficient of the fast-diffusion Gronwall display: exactly 1
        # for r = 2, bounded by the initial sup otherwise (decaying regime)
        C3 = max(1.0, diag["u0_linf"] ** (sim.r - 2.0))

    constants = build_constants(p_minus, p_plus, sim.r, N, omega, B=B, C2=C2,
                                E0=diag["E0"], G0_half=diag["G0_half"],
                                u0_l2=diag["u0_l2"], G0_fast=G0_fast, C3=C3)
    constants.notes.extend(notes)
    regime = classify_regime(constants, E0=diag["E0"], grad_norm_p=diag["grad_norm_p"],
                             u0_l2=diag["u0_l2"], u0_min=diag["u0_min"],
                             u0_linf=diag["u0_linf"])
    return constants, regime, diag


# ---------------------------------------------------------------------------
# check orchestration
# ---------------------------------------------------------------------------

def check_compatibility(name: str, exp: ExperimentConfig, constants, regime) -> str | None:
    """None if the check can run in this regime, else the reason it cannot."""
    sim = exp.sim
    if name in ("dissipation", "l2_increasing"):
        return None
    if constants is None or regime is None:
        return "requires compute_constants"
    if name == "linf_bound":
        return None if sim.r < 2 else "requires r < 2"
    if name == "l2_envelope":
        if not regime.hypotheses["H9"]["holds"]:
            return "requires the small-data extinction hypotheses (H9)"
        return None
    if name in ("lemma24", "blowup_rate"):
        ok = (regime.hypotheses["H1"]["holds"] and regime.hypotheses["H2"]["holds"]
              and math.isfinite(constants.alpha2))
        return None if ok else "requires certified blow-up data (H1, H2)"
    if name == "growth_floor":
        ok = regime.hypotheses["H5"]["holds"] and regime.hypotheses["H6"]["holds"]
        return None if ok else "requires the global L2-growth hypotheses (H5, H6)"
    if name in ("barrier", "ordering"):
        ok = regime.hypotheses["H10"]["holds"]
        return None if ok else "requires the non-extinction hypotheses (H10)"
    return f"unknown check {name}"


def run_barrier_checks(exp: ExperimentConfig, result: SimResult, report: dict,
                       want_ordering: bool) -> dict:
    """Eigen solve, admissible epsilon, barrier inequality, and (optionally)
    the twin auxiliary run with the ordering w <= v <= u."""
    sim = exp.sim
    T = float(exp.barrier_T) if exp.barrier_T is not None else sim.t_max
    pair = first_eigenpair(sim.grid, sim.exponent, tol=exp.eigen_tol,
                           max_iters=exp.eigen_max_iters, eps_reg=sim.eps_reg)
    u0 = sim.initial.build(sim.grid)
    bound = epsilon_bound(pair, u0, sim.r, sim.exponent.p_minus)
    eps = exp.barrier_epsilon_factor * bound
    ok_barrier, worst = check_barrier_inequality(pair, eps, sim.grid, sim.exponent,
                                                 sim.r, T=T)
    out = {
        "eigen": pair.to_json(),
        "epsilon_bound": bound,
        "epsilon": eps,
        "barrier": {"name": "barrier", "passed": bool(ok_barrier),
                    "details": {"worst_margin": float(np.max(worst)), "T": T}},
    }
    if want_ordering:
        aux_cfg = SimConfig(
            grid=sim.grid, exponent=sim.exponent, r=sim.r, initial=sim.initial,
            t_max=sim.t_max, dt_safety=sim.dt_safety, eps_reg=sim.eps_reg,
            blow_up_threshold=sim.blow_up_threshold,
            extinction_rel_threshold=sim.extinction_rel_threshold,
            source_kind="barrier_auxiliary",
            aux=AuxSource(epsilon=eps, lambda1=pair.lambda1, phi=pair.phi.values),
            stride=sim.stride, snapshot_times=sim.snapshot_times,
            keep_snapshots=True, backend=sim.backend)
        aux_result = run(aux_cfg)
        ok_ord, details = check_ordering(result, aux_result, pair, eps, T)
        floor = eps * pair.phi.l2()  # w(T) = eps*Phi
        final_l2 = math.sqrt(result.series("G_sq")[-1])
        out["ordering"] = {"name": "ordering", "passed": bool(ok_ord),
                           "details": {**details, "w_implied_floor_at_T": floor,
                                       "u_l2_at_end": final_l2,
                                       "aux_event": aux_result.event.to_json()}}
    return out


# ---------------------------------------------------------------------------
# experiment pipeline
# ---------------------------------------------------------------------------

def orchestrate(exp: ExperimentConfig) -> tuple[dict, SimResult | None, int]:
    t_start = time.time()
    sim = exp.sim
    sim.validate()
    p_minus, p_plus = bounds(sim.exponent, sim.grid)
    lh = log_holder_estimate(sim.exponent, sim.grid, seed=exp.seed)

    constants = regime = None
    diag = None
    if exp.compute_constants:
        constants, regime, diag = compute_stage(exp)
        sim.e1 = constants.e1_used

    incompatible = {}
    runnable = []
    for name in exp.checks:
        reason = check_compatibility(name, exp, constants, regime)
        if reason is None:
            runnable.append(name)
        else:
            incompatible[name] = reason

    wants_ordering = "ordering" in runnable
    if wants_ordering and not sim.snapshot_times:
        T = float(exp.barrier_T) if exp.barrier_T is not None else sim.t_max
        sim.snapshot_times = tuple(np.linspace(0.0, min(T, sim.t_max),
                                               exp.ordering_snapshots)[1:])
        sim.keep_snapshots = True
    if wants_ordering:
        sim.keep_snapshots = True

    result = run(sim)

    check_results = {}
    exit_code = 0
    for name in runnable:
        try:
            if name == "dissipation":
                cr = checks_mod.check_dissipation(result)
            elif name == "linf_bound":
                cr = checks_mod.check_linf_bound(result, sim.r)
            elif name == "l2_envelope":
                cr = checks_mod.check_l2_envelope(result, constants)
            elif name == "lemma24":
                cr = checks_mod.check_lemma24(result, constants)
            elif name == "blowup_rate":
                cr = checks_mod.check_blowup_rate(result, constants)
            elif name == "growth_floor":
                cr = checks_mod.check_growth_floor(result, constants)
            elif name == "l2_increasing":
                cr = checks_mod.check_l2_increasing(result)
            elif name in ("barrier", "ordering"):
                continue  # handled jointly below
            check_results[name] = cr.to_json()
        except (ValueError, FloatingPointError) as exc:
            check_results[name] = {"name": name, "passed": False, "error": str(exc)}

    if "barrier" in runnable or wants_ordering:
        barrier_out = run_barrier_checks(exp, result, check_results, wants_ordering)
        check_results.setdefault("_eigen", barrier_out["eigen"])
        check_results["_epsilon"] = {"bound": barrier_out["epsilon_bound"],
                                     "used": barrier_out["epsilon"]}
        if "barrier" in runnable:
            check_results["barrier"] = barrier_out["barrier"]
        if wants_ordering:
            check_results["ordering"] = barrier_out["ordering"]

    failed = [n for n in runnable
              if not check_results.get(n, {}).get("passed", False)]
    if failed or incompatible:
        exit_code = 2

    report = {
        "schema": "pxlab-report-v1",
        "config": exp.to_json(),
        "log_holder": {"sup_modulus": lh.sup_modulus, "satisfied": lh.satisfied},
        "p_minus": p_minus,
        "p_plus": p_plus,
        "constants": constants.to_json() if constants is not None else None,
        "regime": regime.to_json() if regime is not None else None,
        "event": result.event.to_json(),
        "checks": check_results,
        "requested_checks": list(exp.checks),
        "incompatible_checks": incompatible,
        "failed_checks": failed,
        "eps_reg": sim.eps_reg,
        "backend": result.backend,
        "n_records": len(result.records),
        "total_steps": result.total_steps,
        "runtime_seconds": time.time() - t_start,
        "seed": exp.seed,
        "exit_code": exit_code,
    }
    return report, result, exit_code


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def write_report(report: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "report.json", "w") as f:
        json.dump(report, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")


def run_experiment(config_path, out_dir, seed: int | None = None,
                   stride: int | None = None) -> int:
    out = Path(out_dir)
    try:
        obj = load_json(config_path)
        exp = ExperimentConfig.from_json(obj)
        if seed is not None:
            exp.seed = seed
        if stride is not None:
            exp.sim.stride = stride
        report, result, exit_code = orchestrate(exp)
    except TimeStepUnderflow as exc:
        out.mkdir(parents=True, exist_ok=True)
        exc.partial.write_series_csv(out / "series.csv")
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, RuntimeError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_report(report, out)
    result.write_series_csv(out / "series.csv")
    write_field_csv(out / "final_field.csv", result.final_field)
    print(f"event={report['event']['kind']} regime="
          f"{report['regime']['label'] if report['regime'] else 'n/a'} "
          f"checks_failed={report['failed_checks']} -> exit {exit_code}")
    return exit_code


def cmd_constants(config_path, out_dir, seed: int | None = None) -> int:
    out = Path(out_dir)
    try:
        obj = load_json(config_path)
        exp = ExperimentConfig.from_json(obj)
        if seed is not None:
            exp.seed = seed
        exp.sim.validate()
        bounds(exp.sim.exponent, exp.sim.grid)
        constants, regime, diag = compute_stage(exp)
        lh = log_holder_estimate(exp.sim.exponent, exp.sim.grid, seed=exp.seed)
    except (ValueError, KeyError, RuntimeError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    payload = {"schema": "pxlab-constants-v1", "config": exp.to_json(),
               "log_holder": {"sup_modulus": lh.sup_modulus, "satisfied": lh.satisfied},
               "constants": constants.to_json(), "regime": regime.to_json(),
               "initial": {k: v for k, v in diag.items() if k != "field"}}
    with open(out / "constants.json", "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True, default=_json_default)
        f.write("\n")
    print(f"regime={regime.label}")
    return 0


def cmd_eigen(config_path, out_dir, seed: int | None = None) -> int:
    out = Path(out_dir)
    try:
        obj = load_json(config_path)
        exp = ExperimentConfig.from_json(obj)
        exp.sim.validate()
        pair = first_eigenpair(exp.sim.grid, exp.sim.exponent, tol=exp.eigen_tol,
                               max_iters=exp.eigen_max_iters, eps_reg=exp.sim.eps_reg)
    except (ValueError, KeyError, RuntimeError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eigen.json", "w") as f:
        json.dump({"schema": "pxlab-eigen-v1", **pair.to_json()}, f, indent=2,
                  sort_keys=True, default=_json_default)
        f.write("\n")
    write_field_csv(out / "phi.csv", pair.phi)
    print(f"lambda1={pair.lambda1:.8g} residual={pair.residual:.3g} "
          f"converged={pair.converged}")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _exponent_with_range(template_exp: dict, p_minus: float, offset: float,
                         grid: Grid) -> dict:
    kind = template_exp["kind"]
    if kind == "constant":
        if offset not in (0.0, None):
            raise ValueError("constant exponent kind cannot take a p_plus offset")
        return {"kind": "constant", "value": p_minus}
    if kind == "affine":
        slopes = [0.0] * grid.dim
        slopes[0] = offset / grid.extent[0]
        return {"kind": "affine", "base": p_minus, "slopes": slopes}
    if kind == "sinusoidal":
        return {"kind": "sinusoidal", "base": p_minus, "amplitude": offset,
                "frequency": template_exp.get("frequency", 1.0)}
    raise ValueError(f"sweep cannot parameterize exponent kind {kind!r}")


def _sweep_cell(args) -> dict:
    idx, template, pm, off, rr, amp = args
    row = {"p_minus": pm if pm is not None else math.nan,
           "p_plus_offset": off if off is not None else math.nan,
           "r": rr if rr is not None else math.nan,
           "amplitude": amp if amp is not None else math.nan,
           "predicted_regime": "", "observed_event": "", "agreement": "", "note": ""}
    try:
        obj = json.loads(json.dumps(template))  # deep copy
        grid = Grid.from_json(obj["sim"]["grid"])
        if pm is not None or off is not None:
            base = obj["sim"]["exponent"]
            pm_eff = pm if pm is not None else base.get("base", base.get("value"))
            off_eff = off if off is not None else 0.0
            obj["sim"]["exponent"] = _exponent_with_range(base, pm_eff, off_eff, grid)
        if rr is not None:
            obj["sim"]["r"] = rr
        if amp is not None:
            obj["sim"].setdefault("initial", {})["amplitude"] = amp
        exp = ExperimentConfig.from_json(obj)
        report, result, _ = orchestrate(exp)
        predicted = report["regime"]["label"] if report["regime"] else "unknown"
        observed = report["event"]["kind"]
        row["predicted_regime"] = predicted
        row["observed_event"] = observed
        row["p_minus"] = report["p_minus"]
        row["p_plus_offset"] = report["p_plus"] - report["p_minus"]
        row["r"] = exp.sim.r
        row["amplitude"] = exp.sim.initial.amplitude
        if predicted == "blow_up":
            agree = observed == "blow_up"
        elif predicted in ("extinction_small_data", "fast_diffusion_extinction"):
            agree = observed == "extinction"
        elif predicted == "non_extinction":
            agree = observed != "extinction"
        elif predicted in ("global_L2_growth", "global_Linf_growth"):
            G = result.series("G_half")
            grew = bool(np.all(np.diff(G) >= -1e-12 * max(float(G.max()), 1e-300)))
            agree = observed != "extinction" and grew
        else:
            row["agreement"] = "n/a"
            return row
        row["agreement"] = "yes" if agree else "no"
    except TimeStepUnderflow as exc:
        row["note"] = f"dt underflow: {exc}"
        row["agreement"] = "n/a"
    except (ValueError, KeyError, RuntimeError, FloatingPointError) as exc:
        row["note"] = str(exc)
        row["agreement"] = "n/a"
    return row


def sweep(sweep_path, out_dir, workers: int = 1) -> int:
    out = Path(out_dir)
    try:
        obj = load_json(sweep_path)
        template = obj["template"]
        axes = obj.get("axes", {})
        cap = int(obj.get("max_runs", 256))
        vals = {k: axes.get(k, [None]) for k in ("p_minus", "p_plus_offset", "r",
                                                 "amplitude")}
        for k, v in vals.items():
            if not isinstance(v, list) or not v:
                raise ValueError(f"axis {k!r} must be a non-empty list")
        cells = list(product(vals["p_minus"], vals["p_plus_offset"], vals["r"],
                             vals["amplitude"]))
        if len(cells) > cap:
            raise ValueError(f"sweep has {len(cells)} cells, cap is {cap}")
        tasks = [(i, template, *cell) for i, cell in enumerate(cells)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                rows = list(ex.map(_sweep_cell, tasks))
        else:
            rows = [_sweep_cell(t) for t in tasks]
    except (ValueError, KeyError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out.mkdir(parents=True, exist_ok=True)
    cols = ("p_minus", "p_plus_offset", "r", "amplitude", "predicted_regime",
            "observed_event", "agreement", "note")
    with open(out / "phase.csv", "w") as f:
        f.write(",".join(cols) + "\n")
        for row in rows:
            f.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                             for c in cols) + "\n")
    n_disagree = sum(1 for row in rows if row["agreement"] == "no")
    print(f"{len(rows)} cells, {n_disagree} disagreements -> phase.csv")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pxlab", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in ("run", "constants", "eigen"):
        sp = sub.add_parser(verb)
        sp.add_argument("config")
        sp.add_argument("--out", default="out")
        sp.add_argument("--seed", type=int, default=None)
        if verb == "run":
            sp.add_argument("--stride", type=int, default=None,
                            help="record every K steps")
    sp = sub.add_parser("sweep")
    sp.add_argument("config")
    sp.add_argument("--out", default="out")
    sp.add_argument("--workers", type=int, default=1)

    args = parser.parse_args(argv)
    if args.verb == "run":
        return run_experiment(args.config, args.out, seed=args.seed, stride=args.stride)
    if args.verb == "constants":
        return cmd_constants(args.config, args.out, seed=args.seed)
    if args.verb == "eigen":
        return cmd_eigen(args.config, args.out, seed=args.seed)
    if args.verb == "sweep":
        return sweep(args.config, args.out, workers=args.workers)
    return 1


if __name__ == "__main__":
    sys.exit(main())
