"""Command-line front end: ``szego-lab {density,sumrule,perturb,phase,report}``.

Every subcommand accepts ``--config file.json`` whose keys are the long
option names with dashes replaced by underscores; explicit flags win over
the file, and the file wins over built-in defaults.  Outputs go to
``--out`` (default: current directory) and are byte-for-byte
reproducible for a fixed configuration.  The exit status is 0 when every
check the subcommand performs is within its budget, 1 when one is not,
and 2 for bad arguments.

CSV headers
-----------
density.csv   x,nu_via_T,nu_via_m,gap_T,gap_m
sumrule.csv   kind,n,N,lhs,coeff_term,eig_term,rhs_tail,residual,error_budget,marginal_count,diverged
phase.csv     alpha,beta,predicted,measured,at_plus2,at_minus2,slope_plus,slope_minus,line_distance,far_from_lines,agree
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .coefficients import ParameterError, admissibility, free, regularized_coulomb, with_overrides
from .measure import (
    DEFAULT_LADDER,
    KINDS,
    density_via_m,
    density_via_T,
    divergence_classify,
    szego_integral,
    theta_grid,
)
from .perturbation import (
    PerturbationSpec,
    WindowError,
    askey_classify,
    dE_dt,
    dE_dt_fd,
    minoration_audit,
    minoration_flow,
    phase_class,
    staged_audit,
)
from .spectrum import EigenSolveError, TruncatedJacobi, eigenvalues_outside
from .sumrules import one_sided_step_rule, step_sum_rule

__all__ = ["main", "ScanConfig", "build_sequence", "scan_phase"]

SEQ_DEFAULTS = {
    "kind": "coulomb",
    "alpha": 0.0,
    "beta": 0.0,
    "gamma": 1.0,
    "error_amp": 0.0,
    "error_exp": 1.0,
    "error_seed": 0,
    "override": [],
    "out": ".",
}

COMMAND_DEFAULTS = {
    "density": {"grid": 101, "n_T": 100_000, "depth": 2**16, "tol": 1e-3},
    "sumrule": {"n": "1", "N": 4000, "rule": "Z"},
    "perturb": {
        "spec": "L33", "site": 200, "c": 1e-4, "d": 1e-4, "k": None, "delta": 0.01, "N": 4000,
        "j_max": 3, "flow_steps": 0, "staged": False, "stages": 16, "fd_tol": 1e-6,
        "alpha": 0.5, "beta": 0.5,
    },
    "phase": {
        "alpha_range": "-1,1,9", "beta_range": "-1,1,9", "depth": 2**16,
        "eps_min_exp": 12, "N": 4000,
    },
    "report": {"depth": 2**16, "N": 4000, "eps_min_exp": 12},
}


class UsageError(ValueError):
    pass


# -- configuration --------------------------------------------------------------

def _merge(args):
    cmd = args.command
    merged = dict(SEQ_DEFAULTS)
    merged.update(COMMAND_DEFAULTS[cmd])
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(cfg) - set(merged)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        merged.update(cfg)
    for key, value in vars(args).items():
        if key in ("command", "config", "func"):
            continue
        if value is not None and value != []:
            merged[key] = value
    return merged


def _parse_override(item):
    if isinstance(item, (list, tuple)):
        n, a, b = item
    else:
        try:
            n, a, b = item.split(":")
        except ValueError:
            raise UsageError(f"override {item!r} is not n:a:b") from None
    return int(n), (float(a), float(b))


def build_sequence(cfg):
    kind = cfg["kind"]
    if kind == "free":
        seq = free()
    elif kind == "coulomb":
        seq = regularized_coulomb(
            float(cfg["alpha"]), float(cfg["beta"]), float(cfg["gamma"]),
            float(cfg["error_amp"]), float(cfg["error_exp"]), int(cfg["error_seed"]),
        )
    else:
        raise UsageError(f"unknown sequence kind {kind!r}")
    if cfg["override"]:
        seq = with_overrides(seq, dict(_parse_override(o) for o in cfg["override"]))
    return seq


def _parse_range(text):
    if isinstance(text, (list, tuple)):
        lo, hi, steps = text
    else:
        try:
            lo, hi, steps = text.split(",")
        except ValueError:
            raise UsageError(f"range {text!r} is not min,max,steps") from None
    return float(lo), float(hi), int(steps)


def _parse_ns(text):
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    out = []
    for part in str(text).split(","):
        if "-" in part:
            lo, hi = part.split("-")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


@dataclass
class ScanConfig:
    alpha_range: tuple
    beta_range: tuple
    gamma: float = 1.0
    error_amp: float = 0.0
    error_exp: float = 1.0
    error_seed: int = 0
    N: int = 4000
    depth: int = 2**16
    epsilon_ladder: tuple = DEFAULT_LADDER
    out: str = "."

    def __post_init__(self):
        for name in ("alpha_range", "beta_range"):
            lo, hi, steps = getattr(self, name)
            if steps < 1:
                raise UsageError(f"{name}: steps must be >= 1")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise UsageError(f"{name}: bounds must be finite")
        if self.N < 64:
            raise UsageError("N must be >= 64")

    def axis(self, name):
        lo, hi, steps = getattr(self, name)
        return np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])

    def step(self):
        steps = []
        for name in ("alpha_range", "beta_range"):
            lo, hi, k = getattr(self, name)
            if k > 1:
                steps.append((hi - lo) / (k - 1))
        return min(steps) if steps else 0.0


# -- output helpers -------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _outdir(cfg):
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _workers():
    raw = os.environ.get("SZEGO_LAB_THREADS")
    cap = os.cpu_count() or 1
    if raw:
        try:
            cap = max(1, int(raw))
        except ValueError:
            raise UsageError("SZEGO_LAB_THREADS must be an integer") from None
    return cap


def _ladder(exp_min):
    return tuple(2.0 ** -k for k in range(4, int(exp_min) + 1))


# -- subcommands ----------------------------------------------------------------

def cmd_density(cfg):
    seq = build_sequence(cfg)
    count = int(cfg["grid"])
    if count < 1:
        raise UsageError("grid must be >= 1")
    x = np.linspace(-2.0, 2.0, count + 2)[1:-1]
    dT = density_via_T(seq, x, n=int(cfg["n_T"]))
    dm = density_via_m(seq, x, depth=int(cfg["depth"]))
    out = _outdir(cfg)
    rows = list(zip(x, dT.values, dm.values, dT.gap_hint, dm.gap_hint))
    _write_csv(out / "density.csv", ["x", "nu_via_T", "nu_via_m", "gap_T", "gap_m"], rows)
    with open(out / "density.dat", "w") as fh:
        fh.write("# x nu_via_T nu_via_m\n")
        for xv, t, m, _, _ in rows:
            fh.write(f"{xv!r} {float(t)!r} {float(m)!r}\n")
    ok = np.isfinite(dT.values) & (dm.values > 0)
    rel = np.abs(dT.values[ok] - dm.values[ok]) / dm.values[ok]
    worst = float(rel.max()) if rel.size else math.inf
    summary = {
        "points": count,
        "max_relative_disagreement": worst,
        "tolerance": float(cfg["tol"]),
        "absent_via_T": int(np.count_nonzero(~np.isfinite(dT.values))),
        "pass": bool(worst <= float(cfg["tol"])),
    }
    _write_json(out / "density_summary.json", summary)
    return summary["pass"], summary


def cmd_sumrule(cfg):
    seq = build_sequence(cfg)
    N = int(cfg["N"])
    rule = cfg["rule"]
    reports = []
    for n in _parse_ns(cfg["n"]):
        if rule == "Z":
            r = step_sum_rule(seq, n, N)
        elif rule in ("Z1_plus", "Z1_minus"):
            r = one_sided_step_rule(seq, "+" if rule == "Z1_plus" else "-", n, N)
        else:
            raise UsageError("rule is Z, Z1_plus or Z1_minus")
        reports.append(r)
    out = _outdir(cfg)
    header = ["kind", "n", "N", "lhs", "coeff_term", "eig_term", "rhs_tail", "residual",
              "error_budget", "marginal_count", "diverged"]
    _write_csv(out / "sumrule.csv", header, [[getattr(r, h) for h in header] for r in reports])
    _write_json(out / "sumrule.json", [r.to_dict() for r in reports])
    ok = all(r.diverged or abs(r.residual) <= r.error_budget for r in reports)
    summary = {"reports": len(reports), "pass": ok,
               "residuals": [None if r.diverged else r.residual for r in reports],
               "budgets": [r.error_budget for r in reports]}
    return ok, summary


def cmd_perturb(cfg):
    out = _outdir(cfg)
    delta = float(cfg["delta"])
    N = int(cfg["N"])
    if cfg["staged"]:
        target = build_sequence(cfg)
        base = build_sequence(dict(cfg, error_amp=0.0))
        res = staged_audit(target, base, float(cfg["error_exp"]), stages=int(cfg["stages"]), delta=delta, N=N)
        _write_json(out / "perturb.json", {"staged": res.to_dict()})
        ok = res.verdict and all(z <= res.z_bound for z in res.z_values)
        return ok, {"staged_verdict": res.verdict, "hypothesis_ok": res.hypothesis_ok,
                    "z_values": res.z_values, "z_bound": res.z_bound, "pass": ok}

    seq = build_sequence(cfg)
    try:
        spec = PerturbationSpec(cfg["spec"], int(cfg["site"]), float(cfg["c"]), float(cfg["d"]),
                                None if cfg["k"] is None else int(cfg["k"]))
    except WindowError as e:
        raise UsageError(f"rejected perturbation: {e}") from None
    audit = (minoration_flow(seq, spec, delta, N, int(cfg["flow_steps"]))
             if int(cfg["flow_steps"]) > 0 else minoration_audit(seq, spec, delta, N))

    J = TruncatedJacobi(seq, N, 0, "free")
    checks = []
    fd_ok = True
    if not spec.is_zero:
        es = eigenvalues_outside(J)
        for sign, vals in (("+", es.above), ("-", es.below)):
            for j in range(1, min(len(vals), int(cfg["j_max"])) + 1):
                try:
                    v = dE_dt(J, spec, j, sign)
                    fd = dE_dt_fd(J, spec, j, sign)
                except EigenSolveError:
                    continue
                good = abs(v - fd) <= float(cfg["fd_tol"])
                fd_ok = fd_ok and good
                checks.append({"sign": sign, "j": j, "dE_dt": v, "finite_difference": fd, "ok": good})
    _write_json(out / "perturb.json", {"audit": audit.to_dict(), "derivative_checks": checks})
    ok = audit.verdict and fd_ok
    return ok, {"verdict": audit.verdict, "hypothesis_ok": audit.hypothesis_ok,
                "derivative_checks": len(checks), "derivatives_ok": fd_ok, "pass": ok}


def _phase_cell(args):
    alpha, beta, cfg = args
    seq = regularized_coulomb(alpha, beta, cfg.gamma, cfg.error_amp, cfg.error_exp, cfg.error_seed)
    rep = divergence_classify(seq, cfg.epsilon_ladder, depth=cfg.depth)
    return rep.at_plus2, rep.at_minus2, rep.slope_plus, rep.slope_minus


def scan_phase(cfg, workers=1):
    """Rows ``(alpha, beta, predicted, measured, ...)`` in (alpha, beta) order."""
    cells = [(float(a), float(b)) for a in cfg.axis("alpha_range") for b in cfg.axis("beta_range")]
    jobs = [(a, b, cfg) for a, b in cells]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_phase_cell, jobs))
    else:
        results = [_phase_cell(j) for j in jobs]
    step = cfg.step()
    rows = []
    for (a, b), (sp, sm, slp, slm) in zip(cells, results):
        predicted = askey_classify(a, b)
        measured = phase_class(sp, sm)
        dist = min(abs(2 * a - b), abs(2 * a + b)) / math.sqrt(5.0)
        far = dist >= step * (1 - 1e-9) if step > 0 else dist > 0
        rows.append([a, b, predicted, measured, sp, sm, slp, slm, dist, far, predicted == measured])
    return rows


PHASE_CODES = {"szego_both": 3, "szego_at_plus2_only": 2, "szego_at_minus2_only": 1,
               "szego_neither": 0, "borderline_open": -1}


def cmd_phase(cfg):
    sc = ScanConfig(
        _parse_range(cfg["alpha_range"]), _parse_range(cfg["beta_range"]),
        float(cfg["gamma"]), float(cfg["error_amp"]), float(cfg["error_exp"]), int(cfg["error_seed"]),
        int(cfg["N"]), int(cfg["depth"]), _ladder(cfg["eps_min_exp"]), str(cfg["out"]),
    )
    rows = scan_phase(sc, _workers())
    out = _outdir(cfg)
    header = ["alpha", "beta", "predicted", "measured", "at_plus2", "at_minus2", "slope_plus",
              "slope_minus", "line_distance", "far_from_lines", "agree"]
    _write_csv(out / "phase.csv", header, rows)
    with open(out / "phase.dat", "w") as fh:
        fh.write("# alpha beta predicted_code measured_code\n")
        for r in rows:
            fh.write(f"{r[0]!r} {r[1]!r} {PHASE_CODES[r[2]]} {PHASE_CODES[r[3]]}\n")
    far = [r for r in rows if r[9]]
    decided = [r for r in rows if r[2] != "borderline_open" and r[3] != "borderline_open"]
    summary = {
        "cells": len(rows),
        "far_cells": len(far),
        "far_agreement": sum(r[10] for r in far) / len(far) if far else 1.0,
        "agreement_excluding_borderline": sum(r[10] for r in decided) / len(decided) if decided else 1.0,
        "disagreeing_far_cells": [[r[0], r[1], r[2], r[3]] for r in far if not r[10]],
    }
    summary["pass"] = not summary["disagreeing_far_cells"]
    _write_json(out / "phase_summary.json", summary)
    return summary["pass"], summary


def cmd_report(cfg):
    seq = build_sequence(cfg)
    ladder = _ladder(cfg["eps_min_exp"])
    dens = density_via_m(seq, theta_grid(ladder[-1]), depth=int(cfg["depth"]))
    values = {}
    for kind in KINDS:
        v = szego_integral(dens, kind, ladder)
        values[kind] = {"value": v.value, "diverged": v.diverged, "edge": v.edge,
                        "slope_plus": v.plus.slope, "slope_minus": v.minus.slope}
    es = eigenvalues_outside(TruncatedJacobi(seq, int(cfg["N"]), 0, "free"))
    adm = admissibility(seq, int(cfg["N"]))
    rep = {
        "sequence": seq.to_dict(),
        "szego": values,
        "classification": phase_class(
            "diverges" if values["Z1_plus"]["diverged"] and values["Z1_plus"]["edge"] in ("+2", "both") else "converges",
            "diverges" if values["Z1_minus"]["diverged"] and values["Z1_minus"]["edge"] in ("-2", "both") else "converges",
        ),
        "bound_states": {"above": es.above, "below": es.below},
        "admissible": adm.is_admissible_finite,
    }
    if cfg["kind"] == "coulomb":
        rep["predicted"] = askey_classify(float(cfg["alpha"]), float(cfg["beta"]))
    _write_json(_outdir(cfg) / "report.json", rep)
    return True, {"classification": rep["classification"], "predicted": rep.get("predicted")}


COMMANDS = {"density": cmd_density, "sumrule": cmd_sumrule, "perturb": cmd_perturb,
            "phase": cmd_phase, "report": cmd_report}


def _parser():
    p = argparse.ArgumentParser(prog="szego-lab", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def seq_args(sp):
        sp.add_argument("--config", help="JSON file with option values")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--kind", choices=["free", "coulomb"])
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--beta", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--error-amp", type=float)
        sp.add_argument("--error-exp", type=float)
        sp.add_argument("--error-seed", type=int)
        sp.add_argument("--override", action="append", default=[], metavar="N:A:B",
                        help="replace (a_N, b_N); repeatable")

    sp = sub.add_parser("density", help="nu' by both routes on a uniform grid")
    seq_args(sp)
    sp.add_argument("--grid", type=int, help="number of interior points (default 101)")
    sp.add_argument("--n-T", type=int, help="envelope depth (default 100000)")
    sp.add_argument("--depth", type=int, help="continued-fraction depth (default 65536)")
    sp.add_argument("--tol", type=float, help="relative agreement budget (default 1e-3)")

    sp = sub.add_parser("sumrule", help="step-by-step sum rules")
    seq_args(sp)
    sp.add_argument("--n", help="strip counts, e.g. 3 or 1-8 or 1,2,5")
    sp.add_argument("--N", type=int, help="number of sites before the free tail (default 4000)")
    sp.add_argument("--rule", choices=["Z", "Z1_plus", "Z1_minus"])

    sp = sub.add_parser("perturb", help="derivative checks and minoration audits")
    seq_args(sp)
    sp.add_argument("--spec", choices=["L33", "L34", "L35", "rank-one-a", "rank-one-b"])
    sp.add_argument("--site", type=int)
    sp.add_argument("--c", type=float)
    sp.add_argument("--d", type=float)
    sp.add_argument("--k", type=int, help="second site offset for L33/L34")
    sp.add_argument("--delta", type=float)
    sp.add_argument("--N", type=int)
    sp.add_argument("--j-max", type=int, help="eigenvalues per side for derivative checks")
    sp.add_argument("--flow-steps", type=int, help="audit along the path in this many steps")
    sp.add_argument("--fd-tol", type=float)
    sp.add_argument("--staged", action="store_true", default=None,
                    help="staged walk from the error-free sequence to the one with errors")
    sp.add_argument("--stages", type=int)

    sp = sub.add_parser("phase", help="(alpha, beta) phase-diagram scan")
    seq_args(sp)
    sp.add_argument("--alpha-range", help="min,max,steps (default -1,1,9)")
    sp.add_argument("--beta-range", help="min,max,steps (default -1,1,9)")
    sp.add_argument("--depth", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--eps-min-exp", type=int, help="smallest cutoff is 2^-k (default 12)")

    sp = sub.add_parser("report", help="Szegő values, bound states and class of one sequence")
    seq_args(sp)
    sp.add_argument("--depth", type=int)
    sp.add_argument("--N", type=int)
    sp.add_argument("--eps-min-exp", type=int)
    return p


def main(argv=None):
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge(args)
        ok, summary = COMMANDS[args.command](cfg)
    except (UsageError, ParameterError, WindowError, FileNotFoundError, json.JSONDecodeError) as e:
        parser.print_usage(sys.stderr)
        print(f"szego-lab {args.command}: error: {e}", file=sys.stderr)
        return 2
    print(json.dumps(_clean(summary), sort_keys=True))
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
