"""Command-line entry point: ``nilflow <subcommand> [params] [flags]``.

Every run prints one JSON report to stdout; tabular data goes to ``--out``
as CSV.  Exit codes: 0 success, 1 validation/usage error, 2 internal
consistency failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import continuous, discrete, field, poincare
from .errors import ConsistencyError, IntegrationError, ValidationError
from .numeric import fmt, round_sig
from .params_io import digest, load_params
from .poly import TriPoly, UniPoly

COMMANDS = (
    "nilcheck",
    "normalize",
    "fixed-point",
    "cycles",
    "iterate",
    "integrals",
    "simulate",
    "classify",
    "poincare",
    "phase-data",
)
ORIG = ("x", "y", "z")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def jsonable(obj):
    """Convert results to JSON-ready values; floats rounded to 15 significant digits."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return round_sig(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, TriPoly):
        return obj.to_str(ORIG)
    if isinstance(obj, UniPoly):
        return obj.to_str()
    if isinstance(obj, field.PolyMap3):
        return obj.to_strs()
    if isinstance(obj, discrete.OrbitPoint):
        return jsonable(obj.coords)
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _point(text: str) -> tuple:
    """Parse ``x,y,z``; integers and ``p/q`` stay exact, decimals become floats."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"--start: expected three comma-separated values, got {text!r}")
    out = []
    for i, p in enumerate(parts):
        try:
            out.append(Fraction(p) if ("." not in p and "e" not in p.lower()) else float(p))
        except ValueError as exc:
            raise ValidationError(f"--start[{i}]: not a number: {p!r}") from exc
    if any(isinstance(v, float) for v in out):
        out = [float(v) for v in out]
    return tuple(out)


def _pair(text: str, name: str) -> tuple[float, float]:
    parts = text.split(",")
    try:
        a, b = (float(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"{name}: expected two comma-separated numbers, got {text!r}") from exc
    return a, b


def _write_csv(path: str, header: Sequence[str], rows) -> int:
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
            n += 1
    return n


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return fmt(float(v))


def _float_eval(poly: TriPoly, p) -> float:
    return float(poly(*map(float, p)))


# -- subcommands ---------------------------------------------------------


def cmd_nilcheck(args, params):
    F = field.build_field(params)
    rep = field.check_nilpotent(F)
    results = {
        "field": F,
        "trace": rep.trace,
        "minor_sum": rep.minor_sum,
        "determinant": rep.determinant,
        "cube_is_zero": rep.cube_test,
    }
    verdicts = {
        "coefficient_test": rep.coefficient_test,
        "cube_test": rep.cube_test,
        "nilpotent": rep.verdict,
    }
    return results, verdicts


def cmd_normalize(args, params):
    F = field.build_field(params)
    psi = field.psi_automorphism(params)
    G = field.conjugate(F, psi)
    closed = field.conjugated_map_closed_form(params)
    if G != closed:
        raise ConsistencyError("conjugated map differs from its closed form")
    results = {
        "psi": psi,
        "psi_inverse": psi.inverse,
        "conjugated_map": G,
        "conjugated_field": continuous.conjugated_field(params),
    }
    verdicts = {
        "psi_is_automorphism": psi.after(psi.inverse).is_identity() and psi.inverse.after(psi).is_identity(),
        "conjugated_map_matches_closed_form": True,
    }
    if params.d2 == 1:
        p2 = field.psi2_automorphism(params)
        N = field.conjugate(G, p2.map)
        if N != field.normal_map_closed_form(params):
            raise ConsistencyError("normal map differs from its closed form")
        results.update({"psi2": p2.map, "alpha": p2.alpha, "nu": p2.nu, "normal_map": N})
        verdicts["normal_map_matches_closed_form"] = True
    if params.d1 == 1 and params.d2 == 1 and params.a12 != 0:
        red = poincare.reduce(params)
        results["reduction"] = {
            "mu": red.mu,
            "classification": red.classification,
            "original_to_normal": red.original_to_normal,
        }
        verdicts["reduction_verified"] = True
    return results, verdicts


def cmd_fixed_point(args, params):
    fp = discrete.fixed_point(params)
    F = field.build_field(params)
    results = {"original": fp.original, "conjugated": fp.conjugated, "normal": fp.normal}
    verdicts = {"fixed_exactly": tuple(F(fp.original)) == tuple(fp.original)}
    if not verdicts["fixed_exactly"]:
        raise ConsistencyError("computed fixed point is not fixed")
    return results, verdicts


def _cycle_dict(c: discrete.CycleReport) -> dict:
    return {
        "length": c.length,
        "frame": c.frame,
        "points": c.points,
        "original_points": c.original_points,
        "multiplier": c.multiplier,
        "closed_form_multiplier": c.closed_form_multiplier,
        "classification": c.classification,
        "s0": c.s0,
        "exact": c.exact,
    }


def cmd_cycles(args, params):
    m = args.length
    seed = args.seed if args.seed is not None else 0
    if m == 2:
        cert = discrete.certify_no_2cycles(params, args.starts, seed)
        results = {
            "length": 2,
            "cycles": [],
            "certificate": {
                "case": cert.case,
                "identities": cert.identities,
                "statement": cert.statement,
                "fixed_point": cert.fixed_point,
                "newton_converged": cert.newton_converged,
                "newton_clusters": cert.newton_clusters,
            },
        }
        return results, {"no_2cycles": cert.holds}
    if m == 3 and params.d2 == 1 and params.a12 != 0:
        cycles = discrete.find_3cycle(params)
        method = "h_roots"
        verdicts = {
            "product_structure": all(c.classification != "invalid" for c in cycles),
            "closed_form_matches_product": all(
                c.closed_form_multiplier is None
                or abs(float(c.multiplier) - float(c.closed_form_multiplier))
                <= 1e-10 * max(1.0, abs(float(c.closed_form_multiplier)))
                for c in cycles
            ),
        }
    elif args.exact:
        raise ValidationError("--exact cycle search is available only for length 3 with d2 = 1 and a12 != 0")
    else:
        cycles = discrete.find_cycles_numeric(params, m, args.starts, seed)
        method = "newton_multistart"
        verdicts = {"closure_verified": True}
    results = {"length": m, "method": method, "count": len(cycles), "cycles": [_cycle_dict(c) for c in cycles]}
    if method == "newton_multistart":
        results["note"] = "numeric search: an empty list means none found, not none exist"
    return results, verdicts


def cmd_iterate(args, params):
    if args.start is None:
        raise ValidationError("--start: required")
    start = _point(args.start)
    # floats unless --exact; exact orbits of degree-2 maps grow fast
    start = tuple(Fraction(v) for v in start) if args.exact else tuple(float(v) for v in start)
    frame = discrete.dynamics_frame(params)
    inv = frame.chart.inverse
    if all(isinstance(v, Fraction) for v in start):
        fstart = tuple(inv(start))
    else:
        fstart = tuple(_float_eval(c, start) for c in inv.components)
    orbit = discrete.iterate(frame.map, fstart, args.steps)
    rows = []
    for pt in orbit:
        if pt.exact:
            orig = tuple(frame.chart(pt.coords))
        else:
            try:
                orig = tuple(_float_eval(c, pt.coords) for c in frame.chart.components)
            except OverflowError:
                orig = (math.inf,) * 3
        rows.append((pt.index, *orig, *pt.coords))
    fp = discrete.fixed_point(params)
    fp_frame = fp.normal if frame.name == "normal" else fp.conjugated
    reached = None
    for pt in orbit:
        if pt.exact and tuple(pt.coords) == tuple(fp_frame):
            reached = pt.index
            break
    if args.out:
        _write_csv(args.out, ("k", "x", "y", "z", "X", "Y", "Z"), rows)
    last = rows[-1]
    results = {
        "frame": frame.name,
        "steps_requested": args.steps,
        "steps_completed": len(orbit) - 1,
        "diverged": orbit.diverged,
        "exact": orbit[0].exact,
        "final_original": last[1:4],
        "final_frame": last[4:7],
        "fixed_point_reached_at": reached,
    }
    verdicts = {}
    if params.a12 == 0 and orbit[0].exact and args.steps >= 3:
        verdicts["fixed_point_after_three_steps"] = reached is not None and reached <= 3
        if not verdicts["fixed_point_after_three_steps"]:
            raise ConsistencyError("a12 = 0 orbit did not reach the fixed point within three steps")
    return results, verdicts


def _integral_set(params, frame):
    if params.a12 == 0:
        return continuous.derive_complete(params, frame)
    return continuous.derive_H(params, frame)


def cmd_integrals(args, params):
    frame = {"original": "original", "conjugated": "psi_conjugated", "psi_conjugated": "psi_conjugated"}[args.frame]
    fis = _integral_set(params, frame)
    results = {
        "frame": frame,
        "field": fis.field,
        "integrals": fis.integrals(),
        "independence_witness": fis.independence_witness,
    }
    if params.a12 != 0:
        results["note"] = "a12 != 0: one polynomial first integral is reported"
    verdicts = {f"lie_derivative_zero_{k}": bool(v) for k, v in fis.verified.items()}
    verdicts["completely_integrable"] = fis.completely_integrable
    return results, verdicts


def cmd_simulate(args, params):
    if args.start is None:
        raise ValidationError("--start: required")
    start = tuple(float(v) for v in _point(args.start))
    a, b = _pair(args.tspan, "--tspan")
    tol = args.tol if args.tol is not None else 1e-10
    F = field.build_field(params)
    fis = _integral_set(params, "original")
    ints = fis.integrals()
    tr = continuous.integrate(F, start, (a, b), tol, ints)
    fns = {k: continuous._integral_functions({k: v})[k] for k, v in ints.items()}
    if args.out:
        rows = (
            (t, *s, *(fns[k](s) if k in fns else None for k in ("H", "H1", "H2")))
            for t, s in zip(tr.t.tolist(), tr.states.tolist())
        )
        _write_csv(args.out, ("t", "x", "y", "z", "H", "H1", "H2"), rows)
    results = {
        "outcome": tr.outcome,
        "samples": len(tr.t),
        "t_range": (float(tr.t[0]), float(tr.t[-1])),
        "start": start,
        "final_forward": tr.states[-1],
        "final_backward": tr.states[0],
        "relative_drift": tr.drifts,
        "escape_times": tr.escape_times,
    }
    verdicts = {"relative_drift_le_1e-7": tr.H_drift <= 1e-7}
    if params.d1 == 1 and params.d2 == 1 and params.a12 == 0 and tr.outcome == "bounded_window":
        exact = continuous.explicit_flow_linear_case(params, start, float(tr.t[-1]))
        err = float(np.max(np.abs(np.array(exact) - tr.states[-1])) / max(1.0, float(np.max(np.abs(exact)))))
        results["closed_form_relative_error"] = err
        verdicts["matches_closed_form_1e-8"] = err <= 1e-8
    return results, verdicts


def cmd_classify(args, params):
    results: dict = {"d1": params.d1, "d2": params.d2, "a12": params.a12}
    verdicts: dict = {}
    if params.d1 == 1 and params.d2 == 1:
        if params.a12 == 0:
            results["case"] = "linear"
            results["classification"] = "explicit_cubic_flow"
        else:
            red = poincare.reduce(params)
            results["case"] = "reduced"
            results["mu"] = red.mu
            results["classification"] = red.classification
            results["original_to_normal"] = red.original_to_normal
            verdicts["reduction_verified"] = True
            if red.beta is not None:
                results["beta"] = red.beta
                results["time_scale"] = red.time_scale
        if args.start is not None:
            tc = poincare.classify_trajectory(params, _point(args.start), frame=args.frame)
            results["trajectory"] = {"outcome": tc.outcome, "evidence": tc.evidence}
    crit = poincare.planar_critical_points(params)
    results["planar_hamiltonian"] = continuous.hamiltonian_conjugated(params)
    results["critical_points"] = [
        {"point": c.point, "kind": c.kind, "energy": c.energy} for c in crit
    ]
    results["centers"] = sum(1 for c in crit if c.kind == "center")
    results["saddles"] = sum(1 for c in crit if c.kind == "saddle")
    return results, verdicts


def _cstar_grid(n: int) -> list[float]:
    lo, hi = poincare.CSTAR_BRACKET
    return [float(c) for c in np.linspace(lo, hi, n)]


def cmd_poincare(args, params):
    results: dict = {"system": poincare.UNIT_SYSTEM, "hamiltonian": poincare.UNIT_HAMILTONIAN}
    verdicts: dict = {}
    if args.orbit is not None:
        rec, rows = poincare.return_orbit(args.orbit, args.x0)
        if args.out:
            _write_csv(args.out, ("tau", "x", "y", "z"), rows)
        results["orbit"] = {
            "c": args.orbit,
            "x0": args.x0,
            "return_time": rec.return_time,
            "displacement": rec.displacement,
            "c_drift": rec.c_drift,
            "end_state": rec.end_state,
            "samples": len(rows),
        }
        verdicts["c_drift_le_1e-8"] = rec.c_drift <= 1e-8
        return results, verdicts
    tol_c = args.tol if args.tol is not None else 1e-6
    if args.find_cstar or args.isochrony:
        cs = poincare.find_cstar(tol_c)
        results["cstar"] = {
            "c_star": cs.c_star,
            "z_star": cs.z_star,
            "bracket": (cs.lo, cs.hi),
            "bisection_steps": cs.iterations,
            "coordinates": "unit system; z* = sqrt(2 c*) on the section y = 0",
        }
        verdicts["z_star_in_(1.6305,1.6310)"] = 1.6305 < cs.z_star < 1.6310
    if args.isochrony:
        cs_fine = poincare.find_cstar(1e-11)
        iso = poincare.verify_isochronous_surface(cs_fine.c_star, params=params if _mu_negative(params) else None)
        results["isochrony"] = {
            "c_star": iso.c_star,
            "samples": iso.samples,
            "period": iso.period,
            "period_spread": iso.period_spread,
            "original_start": iso.original_start,
            "original_period": iso.original_period,
        }
        verdicts["isochronous"] = iso.isochronous
    if args.out or args.profile:
        prof = poincare.displacement_profile(_cstar_grid(args.grid))
        rows = [
            (r.start.c, r.displacement, r.return_time, r.c_drift)
            if isinstance(r, poincare.ReturnRecord)
            else (c, None, None, None)
            for c, r in zip(_cstar_grid(args.grid), prof.records)
        ]
        if args.out:
            _write_csv(args.out, ("c", "L", "tau", "c_drift"), rows)
        results["profile"] = {
            "points": len(rows),
            "sign_changes": prof.sign_changes,
            "monotonicity_violations": prof.monotonicity_violations,
            "L_first": rows[0][1],
            "L_last": rows[-1][1],
        }
        verdicts["single_sign_change"] = prof.sign_changes == 1
        verdicts["monotone_increasing_empirical"] = prof.monotonicity_violations == 0
    return results, verdicts


def _mu_negative(params) -> bool:
    return (
        params is not None
        and params.d1 == 1
        and params.d2 == 1
        and params.a12 != 0
        and poincare.reduce(params).mu < 0
    )


def cmd_phase_data(args, params):
    if args.level is None:
        raise ValidationError("--level: required")
    lo, hi = _pair(args.vrange, "--vrange")
    if args.grid < 2:
        raise ValidationError("--grid: must be at least 2")
    pts = continuous.level_set_points(params, Fraction(args.level), (lo, hi), args.grid)
    if args.out:
        _write_csv(args.out, ("v", "w"), pts)
    results = {
        "level": Fraction(args.level),
        "v_range": (lo, hi),
        "grid": args.grid,
        "points": len(pts),
        "hamiltonian": continuous.hamiltonian_conjugated(params),
        "coordinates": "(v, w) of the conjugated frame",
    }
    return results, {}


HANDLERS = {
    "nilcheck": cmd_nilcheck,
    "normalize": cmd_normalize,
    "fixed-point": cmd_fixed_point,
    "cycles": cmd_cycles,
    "iterate": cmd_iterate,
    "integrals": cmd_integrals,
    "simulate": cmd_simulate,
    "classify": cmd_classify,
    "poincare": cmd_poincare,
    "phase-data": cmd_phase_data,
}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--params", default=d, help="parameter file (or bundled:<name>)")
    p.add_argument("--out", default=d, help="CSV output path")
    p.add_argument("--tol", type=float, default=d, help="tolerance")
    p.add_argument("--exact", action="store_true", default=argparse.SUPPRESS if suppress else False, help="rational arithmetic where supported")
    p.add_argument("--seed", type=int, default=d, help="multi-start seed")
    p.add_argument("--timings", action="store_true", default=argparse.SUPPRESS if suppress else False, help="include runtimes in diagnostics (breaks byte-identical output)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilflow", description="Nilpotent polynomial maps and fields in 3-space.")
    _add_globals(parser, False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        _add_globals(sp, True)
        if name != "poincare":
            sp.add_argument("params_file", nargs="?", help="parameter file (or bundled:<name>)")
        else:
            sp.add_argument("params_file", nargs="?", help="optional mu < 0 parameters for original-coordinate output")
        if name == "cycles":
            sp.add_argument("--length", type=int, required=True)
            sp.add_argument("--starts", type=int, default=discrete.NEWTON_STARTS)
        if name == "iterate":
            sp.add_argument("--start")
            sp.add_argument("--steps", type=int, default=10)
        if name == "integrals":
            sp.add_argument("--frame", choices=("original", "conjugated", "psi_conjugated"), default="conjugated")
        if name == "simulate":
            sp.add_argument("--start")
            sp.add_argument("--tspan", default="0,50")
        if name == "classify":
            sp.add_argument("--start")
            sp.add_argument("--frame", choices=("original", "unit"), default="original")
        if name == "poincare":
            sp.add_argument("--find-cstar", action="store_true")
            sp.add_argument("--isochrony", action="store_true")
            sp.add_argument("--profile", action="store_true")
            sp.add_argument("--grid", type=int, default=50)
            sp.add_argument("--orbit", type=float)
            sp.add_argument("--x0", type=float, default=0.0)
        if name == "phase-data":
            sp.add_argument("--level")
            sp.add_argument("--grid", type=int, default=101)
            sp.add_argument("--vrange", default="-5,5")
    return parser


def _validate_numbers(args):
    if args.tol is not None and not (args.tol > 0 and math.isfinite(args.tol)):
        raise ValidationError("--tol: must be a positive finite number")
    if getattr(args, "steps", 0) < 0:
        raise ValidationError("--steps: must be non-negative")
    if getattr(args, "starts", 1) < 1:
        raise ValidationError("--starts: must be positive")
    if args.command == "cycles" and not 2 <= args.length <= 8:
        raise ValidationError("--length: must lie in [2, 8]")
    if args.command == "poincare" and args.grid < 2:
        raise ValidationError("--grid: must be at least 2")


def execute(argv: Sequence[str]) -> tuple[int, dict | None, str | None]:
    """Run a command; returns (exit code, report, error message)."""
    try:
        args = build_parser().parse_args(list(argv))
        if args.command is None:
            raise UsageError("nilflow: a subcommand is required: " + " | ".join(COMMANDS))
        _validate_numbers(args)
        source = args.params_file or args.params
        params, doc = (None, None)
        if source is not None:
            params, doc = load_params(source)
        elif args.command != "poincare":
            raise ValidationError("params: a parameter file is required")
        t0 = time.perf_counter()
        results, verdicts = HANDLERS[args.command](args, params)
        elapsed = time.perf_counter() - t0
    except (UsageError, ValidationError) as exc:
        return 1, None, str(exc)
    except ConsistencyError as exc:
        return 2, None, f"consistency failure: {exc}"
    except IntegrationError as exc:
        return 1, None, f"integration failed: {exc}"
    diagnostics = {
        "tol": args.tol,
        "exact": args.exact,
        "seed": args.seed,
        "out": args.out,
    }
    if args.timings:
        diagnostics["runtime_seconds"] = elapsed
    report = {
        "command": args.command,
        "input_digest": digest(doc) if doc is not None else None,
        "results": jsonable(results),
        "diagnostics": jsonable(diagnostics),
        "verdicts": [{"name": k, "passed": bool(v)} for k, v in verdicts.items()],
    }
    return 0, report, None


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    code, report, err = execute(sys.argv[1:] if argv is None else argv)
    if report is not None:
        stdout.write(json.dumps(report, indent=2) + "\n")
    if err:
        stderr.write(err + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
