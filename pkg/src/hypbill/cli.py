"""Command-line front end.

Every subcommand except ``scenarios`` writes its data files, a PNG figure
and a run manifest, and prints a ``key: value`` summary to stdout.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
import warnings
from pathlib import Path


from . import __version__
from .certify import (
    CERTIFIED,
    REFUTED,
    CertifyInputError,
    CriterionConstants,
    certify_sinai,
    certify_theorem1,
    certify_theorem3,
    check_theorem4_hypothesis,
    cone_map_check,
    cone_parameter,
    expansion_gain,
    invariant_directions,
    lyapunov_estimate,
)
from .dynamics import DEFAULT_STEP, PhasePoint, StepUnderflow, flow, horizon_probe, sample_ensemble
from .geometry import TableError, table_to_dict
from .io import (
    RICCATI_COLUMNS,
    read_cocycle,
    write_collisions,
    write_csv,
    write_json,
    write_manifest,
    write_trajectory,
)
from .scenarios import BUILTIN, describe, load_table
from .tangent import riccati_along

EXIT_OK = 0
EXIT_REFUTED = 2
EXIT_INCONCLUSIVE = 3
EXIT_INPUT = 4


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hypb", description="Billiards on flat and conformal tori: simulation and hyperbolicity checks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_suffix, seed=True):
        sp.add_argument("--table", required=True, help="built-in scenario name or table file (TOML)")
        sp.add_argument("--out", type=Path, help=f"output {out_suffix} path (default runs/<command>/)")
        sp.add_argument("--step", type=_positive, default=DEFAULT_STEP, help="integrator step on curved metrics")
        sp.add_argument("--jobs", type=_count, default=os.cpu_count() or 1, help="worker processes (HYPB_JOBS overrides)")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        if seed:
            sp.add_argument("--seed", type=_seed, default=0)

    sp = sub.add_parser("simulate", help="one trajectory to CSV")
    common(sp, "CSV", seed=False)
    for name in ("--x0", "--y0", "--angle0"):
        sp.add_argument(name, type=float, required=True)
    sp.add_argument("--duration", type=_positive, required=True)
    sp.add_argument("--stride", type=_positive, default=0.01, help="sampling interval")
    sp.add_argument("--precision", type=int, help="decimal digits for the flat kernel")

    sp = sub.add_parser("riccati", help="Riccati solution along one trajectory")
    common(sp, "CSV", seed=False)
    for name in ("--x0", "--y0", "--angle0", "--u0"):
        sp.add_argument(name, type=float, required=True)
    sp.add_argument("--duration", type=_positive, required=True)
    sp.add_argument("--stride", type=_positive, default=0.01)

    sp = sub.add_parser("lyapunov", help="maximal exponent over an ensemble")
    common(sp, "JSON")
    sp.add_argument("--ensemble", type=_count, default=100)
    sp.add_argument("--duration", type=_positive, default=1000.0)
    sp.add_argument("--renorm", type=_positive, default=1.0)

    sp = sub.add_parser("certify", help="hyperbolicity criteria")
    common(sp, "JSON")
    sp.add_argument("--mode", choices=("thm3", "thm1", "thm4", "sinai"), required=True)
    sp.add_argument("--ensemble", type=_count, default=100)
    sp.add_argument("--duration", type=_positive, default=1000.0, help="window T (t0 for thm1/thm4)")
    sp.add_argument("--A", dest="A", type=_positive, default=2.0)
    sp.add_argument("--m", dest="m", type=_positive, default=0.01)
    sp.add_argument("--c", dest="c", type=_positive)
    sp.add_argument("--C", dest="C", type=_positive)
    sp.add_argument("--stride", type=_positive, help="thm3 candidate grid stride (default c/10)")
    sp.add_argument("--probe-directions", type=_count, default=3600)
    sp.add_argument("--probe-origins", type=_count, default=100)
    sp.add_argument("--probe-cap", type=_positive, default=50.0)

    sp = sub.add_parser("horizon", help="probe for collision-free directions")
    common(sp, "JSON")
    sp.add_argument("--directions", type=_count, default=3600)
    sp.add_argument("--origins", type=_count, default=100)
    sp.add_argument("--cap", type=_positive, default=50.0)

    sp = sub.add_parser("cones", help="cone checks and invariant directions of a cocycle file")
    sp.add_argument("--cocycle", type=Path, required=True, help="CSV with columns a,b,c,d")
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--iterations", type=_count, default=40)
    sp.add_argument("--out", type=Path)
    sp.add_argument("--no-figures", action="store_true")

    sp = sub.add_parser("scenarios", help="built-in tables")
    sp.add_argument("action", choices=("list", "show"))
    sp.add_argument("name", nargs="?")
    return p


def _jobs(args) -> int:
    env = os.environ.get("HYPB_JOBS")
    if env:
        try:
            v = int(env)
        except ValueError:
            raise InputError(f"HYPB_JOBS must be a positive integer, got {env!r}")
        if v < 1:
            raise InputError(f"HYPB_JOBS must be a positive integer, got {env!r}")
        return v
    return getattr(args, "jobs", 1)


def _paths(args, suffix: str) -> tuple[Path, Path]:
    out = args.out or Path("runs") / args.command / f"{args.command}{suffix}"
    return out, out.with_name(out.name + ".manifest.json")


def _sidecar(out: Path, tag: str) -> Path:
    return out.with_name(f"{out.stem}{tag}")


def _emit(summary: dict) -> None:
    print("---")
    for k, v in summary.items():
        print(f"{k}: {v}")
    print("---")


def _start(args, table) -> PhasePoint:
    p = PhasePoint.from_angle(table.metric, args.x0, args.y0, args.angle0)
    if table.walls and not table.contains(p.position, 1e-9):
        raise InputError(f"--x0/--y0 start ({args.x0}, {args.y0}) is not inside the billiard")
    return p


def cmd_simulate(args, table, out: Path, outputs: list) -> int:
    rec = flow(table, _start(args, table), args.duration, h=args.step, stride=args.stride, precision=args.precision)
    outputs.append(write_trajectory(out, rec))
    outputs.append(write_collisions(_sidecar(out, ".collisions.csv"), rec))
    if not args.no_figures:
        from .plotting import plot_trajectory

        outputs.append(plot_trajectory(_sidecar(out, ".png"), table, rec.samples))
    last = rec.samples[-1]
    _emit({
        "table": table.name, "termination": rec.termination, "t_end": rec.t_end, "collisions": len(rec.events),
        "final_x": last[1], "final_y": last[2], "trajectory_csv": out,
    })
    return EXIT_OK


def cmd_riccati(args, table, out: Path, outputs: list) -> int:
    rec = flow(table, _start(args, table), args.duration, h=args.step)
    rows = riccati_along(table, rec, args.u0, args.stride)
    outputs.append(write_csv(out, RICCATI_COLUMNS, rows))
    if not args.no_figures:
        from .plotting import plot_riccati

        outputs.append(plot_riccati(_sidecar(out, ".png"), rows))
    blow = [r[0] for r in rows if r[4] == 1]
    _emit({
        "table": table.name, "termination": rec.termination, "collisions": len(rec.events),
        "blowups": len(blow), "first_blowup": blow[0] if blow else None, "final_u": rows[-1][1], "riccati_csv": out,
    })
    return EXIT_OK


def cmd_lyapunov(args, table, out: Path, outputs: list) -> int:
    ens = sample_ensemble(table, args.ensemble, args.seed)
    est = lyapunov_estimate(table, ens, args.duration, renorm=args.renorm, h=args.step, jobs=_jobs(args))
    summary = est.summary()
    outputs.append(write_json(out, {"lyapunov": summary, "table": table.name}))
    outputs.append(write_csv(
        _sidecar(out, ".csv"), ("exponent", "unstable_y", "unstable_ydot", "stable_y", "stable_ydot"),
        [(e, u[0], u[1], s[0], s[1]) for e, u, s in zip(est.exponents, est.unstable_directions, est.stable_directions)],
    ))
    if not args.no_figures:
        from .plotting import plot_lyapunov

        outputs.append(plot_lyapunov(_sidecar(out, ".png"), est.exponents, est.mean, est.stderr))
    _emit({"table": table.name, **summary, "report": out})
    return EXIT_OK


def _verdict_code(verdict: str) -> int:
    if verdict == CERTIFIED:
        return EXIT_OK
    if verdict == REFUTED:
        return EXIT_REFUTED
    return EXIT_INCONCLUSIVE


def cmd_certify(args, table, out: Path, outputs: list) -> int:
    ens = sample_ensemble(table, args.ensemble, args.seed)
    jobs = _jobs(args)
    if args.mode == "thm1":
        res = certify_theorem1(table, ens, args.duration, h=args.step)
        report = {
            "verdict": res.verdict, "mode": "thm1", "t0": args.duration, "margin": res.margin,
            "blowups": res.blowups, "samples": len(ens),
        }
        outputs.append(write_json(out, report))
        outputs.append(write_csv(_sidecar(out, ".csv"), ("terminal_u",), [(u,) for u in res.terminal_u]))
        _emit({"table": table.name, **report, "report": out})
        return _verdict_code(res.verdict)
    if args.mode == "thm4":
        res = check_theorem4_hypothesis(table, ens, args.duration, args.m, h=args.step)
        verdict = CERTIFIED if res.passed else "hypothesis-fails"
        report = {
            "verdict": verdict, "mode": "thm4", "t0": args.duration, "m": args.m, "nonpositive": res.nonpositive,
            "max_grid_curvature": res.max_grid_curvature, "worst_integral": res.worst_integral,
        }
        outputs.append(write_json(out, report))
        outputs.append(write_csv(_sidecar(out, ".csv"), ("integral",), [(v,) for v in res.integrals]))
        _emit({"table": table.name, **report, "report": out})
        return _verdict_code(verdict)
    if args.mode == "sinai":
        cert = certify_sinai(
            table, ens, args.duration, A=args.A, probe=(args.probe_directions, args.probe_origins, args.probe_cap),
            probe_seed=args.seed, h=args.step, jobs=jobs,
        )
    else:
        if args.c is None or args.C is None:
            raise InputError("thm3 mode needs --c and --C")
        constants = CriterionConstants(args.A, args.m, args.c, args.C, table.metric.k_max)
        cert = certify_theorem3(table, ens, args.duration, constants, stride=args.stride, h=args.step, jobs=jobs)
    report = cert.report()
    report["table"] = table.name
    outputs.append(write_json(out, report))
    rows = []
    for i, seq in enumerate(cert.sequences):
        for k in range(len(seq.times) - 1):
            rows.append((i, k, seq.times[k], seq.times[k + 1], seq.collisions[k], seq.min_u[k], seq.terminal_u[k]))
    outputs.append(write_csv(
        _sidecar(out, ".csv"), ("trajectory", "k", "t_k", "t_k1", "collisions", "min_u", "terminal_u"), rows,
    ))
    if not args.no_figures:
        from .plotting import plot_certificate

        outputs.append(plot_certificate(_sidecar(out, ".png"), cert))
    consts = report["constants"] or {}
    _emit({
        "table": table.name, "verdict": cert.verdict, "mode": cert.mode, "window": cert.window,
        **{k: consts.get(k) for k in ("A", "m", "c", "C", "eta", "alpha", "epsilon")},
        "min_terminal_u": report["min_terminal_u"], "witness": cert.witness, "report": out,
    })
    return _verdict_code(cert.verdict)


def cmd_horizon(args, table, out: Path, outputs: list) -> int:
    if not table.is_flat:
        raise InputError("--table: the horizon probe needs a flat metric")
    rep = horizon_probe(table, args.directions, args.origins, args.cap, seed=args.seed)
    summary = {
        "table": table.name, "directions": args.directions, "origins": args.origins, "t_cap": args.cap,
        "capped": len(rep.capped), "max_free_time": rep.max_free_time,
        "finite_horizon_evidence": rep.finite_horizon_evidence,
    }
    outputs.append(write_json(out, summary))
    outputs.append(write_csv(_sidecar(out, ".csv"), ("x", "y", "angle"), rep.capped))
    if not args.no_figures:
        from .plotting import plot_horizon

        outputs.append(plot_horizon(_sidecar(out, ".png"), rep))
    _emit({**summary, "report": out})
    return EXIT_OK


def cmd_cones(args, out: Path, outputs: list) -> int:
    if not 0 < args.epsilon < 1:
        raise InputError("--epsilon must lie in (0, 1)")
    try:
        mats = read_cocycle(args.cocycle)
    except (OSError, ValueError) as exc:
        raise InputError(f"--cocycle: {exc}")
    if not mats:
        raise InputError("--cocycle: no matrices")
    checks = []
    for A in mats:
        try:
            checks.append(cone_map_check(A, args.epsilon))
        except ValueError as exc:
            raise InputError(f"--cocycle: {exc}")
    gains = [expansion_gain(A if A[0, 0] >= 0 else -A, (1.0, 1.0)) for A, ok in zip(mats, checks) if ok]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        field = invariant_directions(mats, args.iterations)
    summary = {
        "factors": len(mats), "passed": int(sum(checks)), "epsilon": args.epsilon,
        "gain_bound": 1.0 / (1.0 - args.epsilon**2), "min_axis_gain": min(gains) if gains else None,
        "measured_epsilon": min(cone_parameter(A) for A in mats), "contracting": field.contracting,
        "warnings": [str(w.message) for w in caught],
    }
    outputs.append(write_json(out, summary))
    outputs.append(write_csv(
        _sidecar(out, ".csv"), ("k", "unstable_angle", "stable_angle", "unstable_width", "stable_width"),
        [(k, field.unstable_angle[k], field.stable_angle[k], field.unstable_diameter[k], field.stable_diameter[k])
         for k in range(len(field.unstable_angle))],
    ))
    if not args.no_figures:
        from .plotting import plot_directions

        outputs.append(plot_directions(_sidecar(out, ".png"), field))
    _emit({**summary, "report": out})
    return EXIT_OK if all(checks) else EXIT_INCONCLUSIVE


def cmd_scenarios(args) -> int:
    if args.action == "list":
        for name in BUILTIN:
            print(f"{name}\t{describe(name)}")
        return EXIT_OK
    if args.name not in BUILTIN:
        raise InputError(f"unknown scenario {args.name!r}; try 'scenarios list'")
    sys.stdout.write(BUILTIN[args.name])
    return EXIT_OK


SUFFIX = {"simulate": ".csv", "riccati": ".csv", "lyapunov": ".json", "certify": ".json", "horizon": ".json", "cones": ".json"}
HANDLERS = {
    "simulate": cmd_simulate, "riccati": cmd_riccati, "lyapunov": cmd_lyapunov,
    "certify": cmd_certify, "horizon": cmd_horizon,
}


def _config(args, table) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    cfg.pop("jobs", None)  # results do not depend on it
    cfg.pop("no_figures", None)
    if table is not None:
        cfg["table_definition"] = table_to_dict(table)
    return cfg


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


def run(argv=None) -> int:
    with warnings.catch_warnings():
        warnings.showwarning = _show_warning
        return _run(argv)


def _run(argv) -> int:
    try:
        args = build_parser().parse_args(argv)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.command == "scenarios":
        try:
            return cmd_scenarios(args)
        except InputError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
    out, manifest = _paths(args, SUFFIX[args.command])
    outputs: list[Path] = []
    t0 = time.perf_counter()
    table = None
    status, error, code = "complete", None, EXIT_OK
    try:
        if args.command == "cones":
            code = cmd_cones(args, out, outputs)
        else:
            try:
                table, _ = load_table(args.table)
            except TableError as exc:
                raise InputError(f"--table: {exc}")
            code = HANDLERS[args.command](args, table, out, outputs)
    except (InputError, TableError, CertifyInputError, StepUnderflow) as exc:
        status, error, code = "failed", str(exc), EXIT_INPUT
        print(f"error: {exc}", file=sys.stderr)
    except Exception as exc:  # still leave a manifest behind
        status, error, code = "failed", f"{type(exc).__name__}: {exc}", 1
        print(f"error: {error}", file=sys.stderr)
    write_manifest(
        manifest, version=__version__, command=args.command, config=_config(args, table),
        seed=getattr(args, "seed", None), wall_time=time.perf_counter() - t0, outputs=outputs, status=status,
        error=error,
    )
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
