"""Command-line interface.

Subcommands: ``run``, ``verify``, ``study``, ``laws`` and ``stability``.
Failures print ``error[<category>]: <message>`` on stderr and exit with the
code attached to the error class.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import MiscibleError

log = logging.getLogger("miscible_slip")


def _cmd_run(args) -> int:
    from .config import echo_config, parse_config
    from .diagnostics import trajectory_monitors
    from .friction import verify_hypotheses
    from .io import write_json, write_snapshot, write_timeseries
    from .stepper import run

    cfg = parse_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.toml").write_text(echo_config(cfg))
    every = cfg.snapshot_every
    spaces_box = {}

    def on_step(i, state, rec):
        if every and i % every == 0:
            write_snapshot(state, spaces_box["spaces"], out / f"snapshot_{i:04d}.vtk")

    from .stepper import project_initial, setup
    problem = setup(cfg)
    spaces_box["spaces"] = problem.spaces
    initial = project_initial(problem)
    if every:
        write_snapshot(initial, problem.spaces, out / "snapshot_0000.vtk")
    res = run(cfg, on_step=on_step, problem=problem, initial=initial)
    write_timeseries(res.records, out / "timeseries.csv")
    hyp = verify_hypotheses(cfg.make_law())
    summary = {
        "steps": len(res.records),
        "final_time": res.final.t,
        "retried_steps": sum(r.retried for r in res.reports),
        "monitors": trajectory_monitors(res.records, cfg, res.initial_record),
        "hypotheses": {"ok": hyp.ok, "margins": hyp.margins, "failures": hyp.failures},
    }
    write_json(summary, out / "summary.json")
    print(f"{len(res.records)} steps to t={res.final.t:.6g}; output in {out}")
    return 0


def _cmd_verify(args) -> int:
    from . import verification as V
    from .io import write_table

    case = args.case
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    if case in V.MANUFACTURED_CASES:
        levels = [4 * 2**i for i in range(args.levels)]
        table = V.manufactured_convergence(case, levels)
        print(table.format())
        if out:
            write_table(table.rows(), out / f"{case}.csv")
        return 0
    if case == "couette":
        c = V.couette_comparison()
        rows = [["slip_2d", "slip_oracle", "relative_error", "roots"],
                [c.slip_2d, c.oracle.slip, c.relative_error, ";".join(repr(r) for r in c.oracle.roots)]]
        print(f"2D slip {c.slip_2d:.10g}  oracle {c.oracle.slip:.10g}  relative error {c.relative_error:.3e}")
    elif case == "korteweg":
        r = V.korteweg_identity_check()
        rows = [["divergence_form", "reduced_form", "relative_difference"],
                [r.divergence_form, r.reduced_form, r.relative_difference]]
        print(f"divergence form {r.divergence_form:.15g}  reduced form {r.reduced_form:.15g}  "
              f"relative difference {r.relative_difference:.3e}")
    elif case == "quadrature":
        import numpy as np

        from .geometry import build_rect_mesh
        from .spaces import build_spaces, interpolate
        sp_ = build_spaces(build_rect_mesh(8, 8))
        C = interpolate(sp_, lambda p: np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1]))
        r = V.quadrature_oracle_check(sp_, C=C)
        rows = [["form", "relative_discrepancy", "element"]] + [
            [k, v, r.worst_elements[k]] for k, v in sorted(r.discrepancies.items())]
        for row in rows[1:]:
            print(f"{row[0]:>12}  {row[1]:.3e}  (element {row[2]})")
    else:
        raise MiscibleError(f"unknown case {case!r}")
    if out:
        write_table(rows, out / f"{case}.csv")
    return 0


def _cmd_study(args) -> int:
    from .config import parse_config
    from .io import write_table
    from .verification import galerkin_study

    cfg = parse_config(args.config)
    levels = [cfg.nx * 2**i for i in range(args.levels)]
    st = galerkin_study(cfg, levels)
    rows = [["coarse", "fine", "l2_l2_difference"]] + [
        [a, b, d] for a, b, d in zip(levels[:-1], levels[1:], st.differences)]
    for r in rows[1:]:
        print(f"{r[0]:>5} -> {r[1]:<5} {r[2]:.6e}")
    print("strictly decreasing" if st.strictly_decreasing else "NOT strictly decreasing")
    if args.out:
        write_table(rows, args.out)
    return 0


def _cmd_laws(args) -> int:
    import csv

    from .friction import MollifiedLaw, make_law
    from .verification import tabulate_law

    mlaw = MollifiedLaw(make_law(args.law), args.m)
    table = tabulate_law(mlaw, args.samples, args.smax)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s", "Dj_m(s)", "clarke_lo", "clarke_hi"])
        for row in table:
            w.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            fh.close()
    return 0


def _cmd_stability(args) -> int:
    from .config import parse_config
    from .diagnostics import stability_study

    cfg = parse_config(args.config)
    rep = stability_study(cfg, args.delta)
    d = rep.to_dict()
    d.pop("times")
    d.pop("differences")
    print(json.dumps(d, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="miscible-slip", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="integrate a configuration and write results")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_run)

    v = sub.add_parser("verify", help="run a verification case")
    v.add_argument("--case", required=True,
                   choices=["manufactured", "manufactured_stokes", "couette", "korteweg", "quadrature"])
    v.add_argument("--levels", type=int, default=4)
    v.add_argument("--out")
    v.set_defaults(func=_cmd_verify)

    s = sub.add_parser("study", help="mesh refinement study of a configuration")
    s.add_argument("--config", required=True)
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--out")
    s.set_defaults(func=_cmd_study)

    la = sub.add_parser("laws", help="tabulate a mollified friction law as CSV")
    la.add_argument("--law", required=True)
    la.add_argument("--m", type=int, default=64)
    la.add_argument("--samples", type=int, default=201)
    la.add_argument("--smax", type=float, default=3.0)
    la.add_argument("--out")
    la.set_defaults(func=_cmd_laws)

    st = sub.add_parser("stability", help="perturb the initial velocity and measure the response")
    st.add_argument("--config", required=True)
    st.add_argument("--delta", type=float, required=True)
    st.set_defaults(func=_cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except MiscibleError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
