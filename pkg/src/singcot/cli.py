"""Command-line front door: build models, run the verification suites, write reports.

Model strings are factors joined by ``*``; a factor is ``r`` (regular),
``e`` (elliptic), ``h`` (hyperbolic) or ``ff`` (focus-focus).  Examples:
``h``, ``ff``, ``h*ff``, ``h*h*r``.

Exit codes: 0 all checks passed, 1 a verification failed, 2 bad input,
3 unsupported model (elliptic factors cannot be glued).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, Tolerances
from .cotangent_model import MomentumSystem, build_hyperbolic_loop, build_local_system, verify_commutation
from .dynamics import conservation_report, integrate_flow, sample_level
from .errors import EllipticFactorUnsupported, EpsilonOutOfRange, ParseError, SingcotError
from .geometry import PointRef
from .normal_forms import Kind, LeafType, LocalModel, branch_count, classify_model, enumerate_branches, label_str, leaf_type_valid
from .sphere import build_glued_sphere_system, build_profile, profile_check, singular_scan

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_UNSUPPORTED = 0, 1, 2, 3

SPHERE_FLOW_START = ("T*PM", (0.3, 0.0, 1e-4, 1e-5))
SPHERE_FLOW_TIME = 10.0
SPHERE_FLOW_STEP = 1e-3


class BadInput(ValueError):
    pass


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, default=_jsonable) + "\n"


def write_report(cfg: RunConfig, name: str, report: dict):
    if cfg.out is None:
        return
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / name).write_text(dumps(report))


def parse_real(text: str) -> float:
    """A float, or a multiple of pi such as ``pi/16``, ``3pi/40`` or ``0.5*pi``."""
    s = text.strip().lower().replace(" ", "")
    m = re.fullmatch(r"([0-9.]*)\*?pi(?:/([0-9.]+))?", s)
    try:
        if m:
            num = float(m.group(1)) if m.group(1) else 1.0
            den = float(m.group(2)) if m.group(2) else 1.0
            return num * math.pi / den
        return float(s)
    except ValueError:
        raise BadInput(f"not a number: {text!r}") from None


def parse_vector(text: str) -> tuple[float, ...]:
    return tuple(parse_real(t) for t in text.split(",") if t.strip())


# commands


def cmd_verify(cfg: RunConfig) -> tuple[int, dict]:
    model = LocalModel.parse(cfg.model or "")
    model.require_no_elliptic()
    system = build_local_system(
        model,
        radius=1.0,
        samples=cfg.gluing_samples,
        seed=cfg.seed,
        tol=cfg.tol.descent,
        atlas_samples=cfg.atlas_samples,
    )
    comm = verify_commutation(system, cfg.samples, box_radius=2.0, seed=cfg.seed, tol=cfg.tol.bracket, workers=cfg.workers)
    atlas = system.report["atlas"]
    failures = []
    if not atlas["passed"]:
        failures.append("atlas validation")
    if not comm.passed:
        worst = max(comm.pairs, key=lambda p: p["max_abs_bracket"])
        failures.append(f"commutation in {worst['chart']} (g{worst['i']}, g{worst['j']}): {worst['max_abs_bracket']:.3e}")
    report = {
        "command": "verify",
        "config": cfg.to_dict(),
        "model": str(model),
        "n": model.n,
        "branches": [label_str(b) for b in enumerate_branches(model)],
        "charts": sorted(system.functions),
        "gluings": [g.describe() for g in system.gluings],
        "symplectic": system.report["symplectic"],
        "descent": system.report["descent"],
        "atlas": atlas,
        "commutation": comm.to_dict(),
        "failures": failures,
        "passed": not failures,
    }
    return (EXIT_OK if not failures else EXIT_FAIL), report


def _origin_leaf(model: LocalModel) -> LeafType:
    wt = classify_model(model)
    # regular factors move the origin along an open line; nothing closes up in a local model
    return LeafType(wt.k_e, wt.k_h, wt.k_f, 0, model.count(Kind.REGULAR))


def cmd_classify(cfg: RunConfig) -> tuple[int, dict]:
    model = LocalModel.parse(cfg.model or "")
    wt = classify_model(model, seed=cfg.seed)
    leaf = _origin_leaf(model)
    ok = leaf_type_valid(leaf, model.n)
    report = {
        "command": "classify",
        "config": cfg.to_dict(),
        "model": str(model),
        "n": model.n,
        "williamson_type": list(wt.as_tuple()),
        "branch_count": branch_count(model),
        "branches": [label_str(b) for b in enumerate_branches(model)],
        "leaf_type": list(leaf.as_tuple()),
        "leaf_type_identity": ok,
        "passed": ok,
    }
    return (EXIT_OK if ok else EXIT_FAIL), report


def _flow_summary(system: MomentumSystem, i: int, start: PointRef, t_end: float, step: float, tol: float) -> tuple[dict, list]:
    traj = integrate_flow(system, i, start, t_end, step)
    cons = conservation_report(system, traj, flowed=i)
    summary = {
        "function": i + 1,
        "start": {"chart": start.chart, "coords": list(start.coords)},
        "end": {"chart": traj.end.chart, "coords": list(traj.end.coords)},
        "t_end": t_end,
        "step": step,
        "integrator": traj.integrator,
        "switches": [list(s) for s in traj.switches],
        "conservation": cons.to_dict(),
        "drift_tol": tol,
        "passed": max(cons.drifts) <= tol,
    }
    return summary, traj.rows()


def _write_csv(path: Path, header: list[str], rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([repr(v) if isinstance(v, float) else v for v in row] for row in rows)


def cmd_sphere(cfg: RunConfig) -> tuple[int, dict]:
    eps = cfg.epsilon
    h = build_profile(eps)
    prof = profile_check(h)
    system = build_glued_sphere_system(eps, seed=cfg.seed, descent_tol=cfg.tol.descent, samples=cfg.gluing_samples)
    comm = verify_commutation(system, cfg.samples, seed=cfg.seed, tol=cfg.tol.bracket, workers=cfg.workers)
    scan = singular_scan(system, seed=cfg.seed)
    start = PointRef.of(*SPHERE_FLOW_START)
    flows, rows = [], []
    for i in range(system.n):
        summary, r = _flow_summary(system, i, start, SPHERE_FLOW_TIME, SPHERE_FLOW_STEP, cfg.tol.drift)
        flows.append(summary)
        rows.append(r)
    gluings = {
        "gluings": [g.describe() for g in system.gluings],
        "symplectic": system.report["symplectic"],
        "descent": system.report["descent"],
        "descent_tol": system.report["descent_tol"],
        "atlas": system.report["atlas"],
        "representatives_max_error": system.report["representatives_max_error"],
    }
    checks = {
        "profile": prof["passed"],
        "atlas": system.report["atlas"]["passed"],
        "commutation": comm.passed,
        "scan": scan.passed,
        "f_flow": flows[0]["passed"],
        "g_flow": flows[1]["passed"],
    }
    report = {
        "command": "sphere",
        "config": cfg.to_dict(),
        "epsilon": eps,
        "profile": prof,
        "gluing": gluings,
        "commutation": comm.to_dict(),
        "scan": scan.to_dict(),
        "flows": flows,
        "checks": checks,
        "failures": sorted(k for k, v in checks.items() if not v),
        "passed": all(checks.values()),
    }
    if cfg.out is not None:
        _write_csv(cfg.out / "profile.csv", ["phi", "h", "dh"], h.table(1e-3))
        write_report(cfg, "scan.json", scan.to_dict())
        write_report(cfg, "gluings.json", gluings)
        for i, r in enumerate(rows):
            _write_csv(cfg.out / f"flow_g{i + 1}.csv", ["t", "chart", "q1", "q2", "p1", "p2"], r)
    return (EXIT_OK if report["passed"] else EXIT_FAIL), report


def build_named_system(name: str, cfg: RunConfig, glued: bool = True) -> MomentumSystem:
    """``sphere``, ``loop`` (compact one-degree-of-freedom hyperbolic loop) or a model string."""
    if name == "sphere":
        return build_glued_sphere_system(cfg.epsilon, seed=cfg.seed, descent_tol=cfg.tol.descent, samples=cfg.gluing_samples)
    if name == "loop":
        return build_hyperbolic_loop(glued=glued, seed=cfg.seed)
    return build_local_system(name, radius=5.0, glued=glued, seed=cfg.seed, tol=cfg.tol.descent)


def _start(system: MomentumSystem, chart: str | None, coords: tuple[float, ...]) -> PointRef:
    cid = chart or sorted(system.functions)[0]
    if cid not in system.functions:
        raise BadInput(f"unknown chart {cid!r}; charts are {sorted(system.functions)}")
    if len(coords) != 2 * system.n:
        raise BadInput(f"start needs {2 * system.n} coordinates, got {len(coords)}")
    return PointRef.of(cid, coords)


def cmd_flow(cfg: RunConfig, args) -> tuple[int, dict]:
    system = build_named_system(cfg.model or "", cfg, glued=not args.unglued)
    start = _start(system, args.chart, parse_vector(args.start))
    i = args.index - 1
    if not 0 <= i < system.n:
        raise BadInput(f"--index must be in 1..{system.n}")
    summary, rows = _flow_summary(system, i, start, args.time, args.step, cfg.tol.drift)
    report = {"command": "flow", "config": cfg.to_dict(), "system": system.name, "flow": summary, "passed": summary["passed"]}
    if cfg.out is not None:
        names = [f"q{k + 1}" for k in range(system.n)] + [f"p{k + 1}" for k in range(system.n)]
        _write_csv(cfg.out / "trajectory.csv", ["t", "chart", *names], rows)
    return (EXIT_OK if summary["passed"] else EXIT_FAIL), report


def cmd_sample_level(cfg: RunConfig, args) -> tuple[int, dict]:
    system = build_named_system(cfg.model or "", cfg, glued=not args.unglued)
    start = _start(system, args.chart, parse_vector(args.start))
    values = parse_vector(args.level) if args.level else (0.0,) * system.n
    if len(values) != system.n:
        raise BadInput(f"--level needs {system.n} values")
    res = sample_level(system, values, [start], budget=args.budget, seed=cfg.seed)
    report = {
        "command": "sample-level",
        "config": cfg.to_dict(),
        "system": system.name,
        "glued": not args.unglued,
        "level": list(values),
        "budget": args.budget,
        "sample": res.to_dict(),
        "diameter": res.diameter,
        "passed": True,
    }
    if cfg.out is not None:
        names = [f"q{k + 1}" for k in range(system.n)] + [f"p{k + 1}" for k in range(system.n)]
        _write_csv(cfg.out / "level_points.csv", ["chart", *names], [[p.chart, *p.coords] for p in res.points])
    return EXIT_OK, report


# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model string, e.g. h, ff, h*ff (factors r|e|h|ff joined by '*')")
    common.add_argument("--epsilon", default="pi/16", help="sphere collar width, 0 < eps < pi/8 (accepts pi/16)")
    common.add_argument("--samples", type=int, default=10_000, help="commutation samples per chart")
    common.add_argument(
        "--tol", type=float, default=None, help="headline tolerance: gluing descent (verify, sphere) or conservation drift (flow)"
    )
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--out", type=Path, default=None, help="directory for JSON reports and CSV tables")
    common.add_argument("--workers", type=int, default=None, help="parallel chart sweeps (default: all cores)")

    p = argparse.ArgumentParser(prog="singcot", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"singcot {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="glue a local model and verify commutation, descent and the atlas")
    sub.add_parser("classify", parents=[common], help="Williamson type, branch count and leaf-type identity")
    sub.add_parser("sphere", parents=[common], help="end-to-end sphere example with one focus-focus point")
    for name, helptext in [("flow", "integrate one Hamiltonian flow"), ("sample-level", "explore a level set by flows")]:
        sp = sub.add_parser(name, parents=[common], help=helptext)
        sp.add_argument("--chart", default=None, help="chart of the start point (default: first chart id)")
        sp.add_argument("--start", required=True, help="comma-separated phase coordinates q..., p...")
        sp.add_argument("--unglued", action="store_true", help="use the un-glued branch charts")
        if name == "flow":
            sp.add_argument("--index", type=int, default=1, help="flow of g_INDEX (1-based)")
            sp.add_argument("--time", type=float, default=1.0)
            sp.add_argument("--step", type=float, default=1e-3)
        else:
            sp.add_argument("--level", default=None, help="comma-separated level values (default 0)")
            sp.add_argument("--budget", type=int, default=10_000, help="total flow steps")
    return p


def config_from_args(args) -> RunConfig:
    base = Tolerances()
    tol = base
    if args.tol is not None:
        key = "drift" if args.command == "flow" else "descent"
        tol = Tolerances(**{**base.to_dict(), key: args.tol})
    kwargs = dict(model=args.model, epsilon=parse_real(args.epsilon), samples=args.samples, seed=args.seed, out=args.out, tol=tol)
    if args.workers is not None:
        kwargs["workers"] = args.workers
    return RunConfig(**kwargs)


def _summary_line(code: int, report: dict) -> str:
    status = "PASS" if code == EXIT_OK else "FAIL"
    what = report.get("model") or report.get("system") or f"eps={report.get('epsilon')}"
    return f"{report['command']} {what}: {status}"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command in ("verify", "classify", "flow", "sample-level") and not cfg.model:
            raise BadInput(f"{args.command} needs --model")
        if args.command == "verify":
            code, report = cmd_verify(cfg)
        elif args.command == "classify":
            code, report = cmd_classify(cfg)
        elif args.command == "sphere":
            code, report = cmd_sphere(cfg)
        elif args.command == "flow":
            code, report = cmd_flow(cfg, args)
        else:
            code, report = cmd_sample_level(cfg, args)
    except EllipticFactorUnsupported as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ParseError, EpsilonOutOfRange, BadInput, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SingcotError as e:
        print(f"verification failed: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL
    write_report(cfg, f"{args.command}.json", report)
    for f in report.get("failures", []):
        print(f"failed: {f}", file=sys.stderr)
    if args.command == "classify":
        print(
            f"model {report['model']}: Williamson type {tuple(report['williamson_type'])}, "
            f"{report['branch_count']} branches, leaf type {tuple(report['leaf_type'])}"
        )
    print(_summary_line(code, report))
    return code


if __name__ == "__main__":
    sys.exit(main())
