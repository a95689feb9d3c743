"""Command-line front end: run cases, convergence sweeps, stencil dumps.

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
divergence, 4 acceptance-gate failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_GATE = 4


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get("RBFFLOW_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    from .config import CaseConfig, ConfigError, load_config
    from . import benchmarks  # noqa: F401  (registers case runners)
    from .benchmarks import cases as case_mod
    from .io_utils import atomic_write_text, write_csv
    from .snapshots import write_fields_csv, write_fields_vtk
    from .solver import DivergedError

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(args.out_dir or os.environ.get("RBFFLOW_OUT") or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if args.dry_run:
        print("resolved configuration:")
        for key, val in vars(cfg).items():
            print(f"  {key} = {val}")
        return EXIT_OK

    try:
        result = _dispatch_case(cfg, case_mod)
    except DivergedError as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED

    lines = [f"case: {result.name}", f"n_points: {result.n_points}",
             f"spacing: {result.spacing!r}", f"degree: {result.degree}",
             f"steps: {result.steps}", f"converged: {result.converged}"]
    for key, val in sorted(result.errors.items()):
        lines.append(f"{key}: {val!r}")
    atomic_write_text(out / "run_summary.txt", "\n".join(lines) + "\n")
    if result.state is not None and result.cloud is not None:
        st = result.state
        div = np.zeros(result.cloud.n_points)
        write_fields_csv(out / "fields.csv", result.cloud, st.u, st.v, st.p, div)
        write_fields_vtk(out / "fields.vtk", result.cloud,
                         {"u": st.u, "v": st.v, "p": st.p})
    write_csv(out / "errors.csv", ["metric", "value"],
              sorted(result.errors.items()))
    print("\n".join(lines))
    return EXIT_OK


def _dispatch_case(cfg, case_mod):
    name = cfg.benchmark
    kwargs = {}
    n_target = cfg.target_points or 1000
    if name == "kovasznay":
        if cfg.reynolds:
            kwargs["re"] = cfg.reynolds
        return case_mod.run_kovasznay(n_target, cfg.poly_degree, dt=cfg.dt,
                                      steady_tol=cfg.steady_tol,
                                      max_steps=cfg.max_steps, seed=cfg.seed,
                                      **kwargs)
    if name == "couette":
        return case_mod.run_couette(n_target, cfg.poly_degree, dt=cfg.dt,
                                    steady_tol=cfg.steady_tol,
                                    max_steps=cfg.max_steps, seed=cfg.seed)
    if name == "eccentric":
        return case_mod.run_eccentric(n_target, cfg.poly_degree, dt=cfg.dt,
                                      steady_tol=cfg.steady_tol,
                                      max_steps=cfg.max_steps, seed=cfg.seed)
    if name == "ellipse":
        return case_mod.run_ellipse(n_target, cfg.poly_degree, dt=cfg.dt,
                                    steady_tol=cfg.steady_tol,
                                    max_steps=cfg.max_steps, seed=cfg.seed)
    if name == "bell":
        return case_mod.run_bell(n_target, cfg.poly_degree,
                                 dt=cfg.dt or 5e-5,
                                 t_final=cfg.t_final or 0.5, seed=cfg.seed)
    if name == "cavity":
        return case_mod.run_cavity(n_target, cfg.poly_degree,
                                   re=cfg.reynolds or 100.0, dt=cfg.dt,
                                   steady_tol=cfg.steady_tol,
                                   max_steps=cfg.max_steps, seed=cfg.seed)
    if name == "shear-layer":
        return case_mod.run_shear_layer(n_target, cfg.poly_degree,
                                        alpha=cfg.hyper_alpha,
                                        dt=cfg.dt or 5e-4,
                                        t_final=cfg.t_final or 2.0,
                                        seed=cfg.seed)
    if name == "cylinder":
        return case_mod.run_cylinder(re=cfg.reynolds or 100.0,
                                     k=cfg.poly_degree,
                                     dt=cfg.dt or 2.5e-3,
                                     t_final=cfg.t_final or 200.0,
                                     seed=cfg.seed)
    from .config import ConfigError

    raise ConfigError(f"unknown benchmark {name!r}")


# acceptance bands for --gate: slope within [k-1, k+1]
def _gate_ok(slopes: dict, degrees) -> bool:
    for k in degrees:
        for fld, slope in slopes[k].items():
            if not (k - 1.0 <= slope <= k + 1.0):
                return False
    return True


def cmd_convergence(args) -> int:
    from .benchmarks import cases as case_mod
    from .benchmarks.operator_study import study

    degrees = [int(s) for s in args.k.split(",") if s.strip()]
    if not degrees:
        print("usage error: --k must list at least one polynomial degree",
              file=sys.stderr)
        return EXIT_CONFIG
    out = _out_dir(args)

    if args.case == "operators":
        res = study(degrees=degrees, levels=args.levels)
        rows = []
        ok = True
        for k, d in res.items():
            print(f"k={k}: gradient slope {d['grad_slope']:.3f}, "
                  f"laplacian slope {d['lap_slope']:.3f}")
            ok &= (k - 1 <= d["grad_slope"] <= k + 1)
            ok &= (k - 2 <= d["lap_slope"] <= k)
            for h, g, l in d["rows"]:
                rows.append(["operators", k, "", h, g, "", "", l,
                             d["grad_slope"]])
        from .io_utils import write_csv
        write_csv(out / "convergence_operators.csv",
                  ["case", "k", "n_points", "dx", "err_u", "err_v", "err_p",
                   "err_div", "slope"], rows)
        if args.gate and not ok:
            return EXIT_GATE
        return EXIT_OK

    if args.case not in case_mod.CASE_RUNNERS:
        print(f"unknown case {args.case!r}; choose from "
              f"{sorted(case_mod.CASE_RUNNERS) + ['operators']}", file=sys.stderr)
        return EXIT_CONFIG
    resolutions = None
    if args.res:
        resolutions = [int(s) for s in args.res.split(",") if s.strip()]
    report = case_mod.convergence_sweep(args.case, degrees, resolutions,
                                        workers=args.threads)
    case_mod.report_to_csv(report, out / f"convergence_{args.case}.csv")
    for k in degrees:
        print(f"k={k}: slopes " + ", ".join(
            f"{fld}={s:.3f}" for fld, s in report["slopes"][k].items()))
    if args.gate and not _gate_ok(report["slopes"], degrees):
        return EXIT_GATE
    return EXIT_OK


def cmd_stencil_dump(args) -> int:
    from .cloud import build_clouds, from_csv
    from .operators import BasisConfig, build_operator_set
    from .sparse import write_matrix_market

    try:
        cloud = from_csv(args.cloud)
    except OSError as exc:
        print(f"cannot read cloud file: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = BasisConfig(degree=args.k, phs_exponent=args.a)
    q = min(cfg.cloud_size, cloud.n_points)
    cloud = build_clouds(cloud, q)
    ops = build_operator_set(cloud, cfg, require_2m=False,
                             allow_underdetermined=True)
    out = _out_dir(args)
    for name, mat in (("dx", ops.dx), ("dy", ops.dy), ("lap", ops.lap)):
        write_matrix_market(out / f"stencil_{name}.mtx", mat)
    print(f"wrote stencil_dx/dy/lap.mtx for {cloud.n_points} points to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rbfflow",
        description="Meshless PHS-RBF incompressible flow solver and "
                    "verification benchmarks")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the RNG seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes for sweeps")
    parser.add_argument("--out-dir", default=None,
                        help="output directory (default: $RBFFLOW_OUT or cwd)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a case from a config file")
    p_run.add_argument("config")
    p_run.add_argument("--dry-run", action="store_true",
                       help="validate and print the resolved config only")
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="error sweep over degrees "
                            "and resolutions")
    p_conv.add_argument("case")
    p_conv.add_argument("--k", required=True,
                        help="comma-separated polynomial degrees")
    p_conv.add_argument("--res", default=None,
                        help="comma-separated point counts")
    p_conv.add_argument("--levels", type=int, default=6,
                        help="halvings for the operator study")
    p_conv.add_argument("--gate", action="store_true",
                        help="exit 4 if a slope leaves [k-1, k+1]")
    p_conv.set_defaults(func=cmd_convergence)

    p_st = sub.add_parser("stencil-dump", help="export operator matrices "
                          "as Matrix Market files")
    p_st.add_argument("cloud", help="cloud CSV (id,x,y,flag,nx,ny)")
    p_st.add_argument("--k", type=int, default=2)
    p_st.add_argument("--a", type=int, default=1)
    p_st.set_defaults(func=cmd_stencil_dump)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
