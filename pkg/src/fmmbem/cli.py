"""Command-line front end: mesh generation, solves, and study runs."""

import argparse
import contextlib
import sys

import numpy as np

from . import mesh as meshes
from . import solver, study
from .bemop import BemOperator


@contextlib.contextmanager
def _thread_limit(n):
    """Cap BLAS threads when threadpoolctl is available; no-op otherwise."""
    if n is None:
        yield
        return
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        yield
        return
    with threadpool_limits(limits=n):
        yield


def _add_mesh_parser(sub):
    p = sub.add_parser("mesh", help="generate a surface mesh file")
    shapes = p.add_subparsers(dest="shape", required=True)
    sphere = shapes.add_parser("sphere", help="octahedral sphere refinement")
    sphere.add_argument("--level", type=int, required=True)
    sphere.add_argument("--radius", type=float, default=1.0)
    rbc = shapes.add_parser("rbc", help="biconcave-disc surface")
    rbc.add_argument("--level", type=int, required=True)
    scene = shapes.add_parser("scene", help="several randomly oriented spheres")
    scene.add_argument("--cells", type=int, required=True)
    scene.add_argument("--level", type=int, default=3)
    scene.add_argument("--seed", type=int, default=0)
    for sp in (sphere, rbc, scene):
        sp.add_argument("--output", required=True)


def _add_solve_parser(sub):
    p = sub.add_parser("solve", help="solve a boundary-value problem")
    p.add_argument("--problem", choices=["laplace1", "laplace2", "stokes"],
                   required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--p", type=int, default=12)
    p.add_argument("--p-min", type=int, default=1)
    p.add_argument("--relax", choices=["on", "off"], default="on")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--ncrit", type=int, default=126)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--mu", type=float, default=1e-3)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--output", required=True,
                   help="solve report path; history CSV goes next to it")


def _add_study_parser(sub):
    p = sub.add_parser("study", help="run a predefined experiment")
    kinds = p.add_subparsers(dest="study_kind", required=True)
    conv = kinds.add_parser("convergence")
    conv.add_argument("--problem",
                      choices=["laplace1", "laplace2", "stokes", "rbc"],
                      required=True)
    conv.add_argument("--levels", type=int, nargs="+", required=True)
    conv.add_argument("--p", type=int, default=12)
    conv.add_argument("--tol", type=float, default=1e-6)
    relax = kinds.add_parser("relaxation")
    relax.add_argument("--problem", choices=["laplace1", "laplace2", "stokes"],
                       required=True)
    relax.add_argument("--level", type=int, required=True)
    relax.add_argument("--p", type=int, default=12)
    relax.add_argument("--p-min", type=int, default=1)
    relax.add_argument("--tol", type=float, default=1e-5)
    relax.add_argument("--ncrit-candidates", type=int, nargs="+", default=[126])
    scal = kinds.add_parser("scaling")
    scal.add_argument("--sizes", type=int, nargs="+", required=True)
    scal.add_argument("--p", type=int, default=5)
    scal.add_argument("--ncrit", type=int, default=126)
    for sp in (conv, relax, scal):
        sp.add_argument("--repeats", type=int, default=3)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--theta", type=float, default=0.5)
        sp.add_argument("--output", required=True)


def _run_mesh(args):
    if args.shape == "sphere":
        m = meshes.make_sphere(args.level, radius=args.radius)
    elif args.shape == "rbc":
        m = meshes.make_rbc(args.level)
    else:
        m = meshes.make_scene(args.cells, args.level, seed=args.seed)
    meshes.write_mesh(args.output, m)
    print(f"wrote {m.n_panels} panels ({len(m.vertices)} vertices) to {args.output}")


def _run_solve(args):
    m = meshes.read_mesh(args.mesh)
    form = study._FORMULATIONS[args.problem]
    op = BemOperator(m, form, theta=args.theta, n_crit=args.ncrit, mu=args.mu)
    if args.problem == "stokes":
        data = np.tile([1.0, 0.0, 0.0], (m.n_panels, 1))
    else:
        data = np.ones(m.n_panels)
    b = op.assemble_rhs(data)
    res = solver.solve(op, b, eta=args.tol, p_initial=args.p, p_min=args.p_min,
                       relaxed=args.relax == "on", max_iter=args.max_iters)
    rep = study.StudyReport("solve", params=dict(
        problem=args.problem, mesh=args.mesh, p=args.p, p_min=args.p_min,
        relaxed=args.relax == "on", tol=args.tol, n_crit=args.ncrit,
        theta=args.theta))
    rec = dict(N=op.n_panels, iterations=res.n_iterations,
               converged=res.converged,
               final_residual=res.residuals[-1] if res.residuals else 0.0)
    if args.problem == "stokes":
        rec["drag"] = list(map(float, op.drag_force(res.x)))
    rep.records.append(rec)
    rep.write(args.output)
    res.save_history(args.output + ".history.csv")
    status = "converged" if res.converged else "NOT converged"
    print(f"{status} in {res.n_iterations} iterations; report in {args.output}")


def _run_study(args):
    if args.study_kind == "convergence":
        rep = study.run_convergence(args.problem, args.levels, p=args.p,
                                    tol=args.tol, theta=args.theta)
    elif args.study_kind == "relaxation":
        rep = study.run_relaxation_comparison(
            args.problem, args.level, tol=args.tol, p_initial=args.p,
            p_min=args.p_min, theta=args.theta,
            ncrit_candidates=args.ncrit_candidates, repeats=args.repeats)
    else:
        rep = study.run_scaling(args.sizes, p=args.p, n_crit=args.ncrit,
                                theta=args.theta, repeats=args.repeats,
                                seed=args.seed)
    rep.write(args.output)
    rep.write_csv(args.output + ".csv")
    for k, v in rep.derived.items():
        print(f"{k}: {v}")
    print(f"report in {args.output}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="fmmbem",
        description="Boundary element solver with relaxed multipole orders")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_mesh_parser(sub)
    _add_solve_parser(sub)
    _add_study_parser(sub)
    args = parser.parse_args(argv)
    threads = getattr(args, "threads", None)
    with _thread_limit(threads):
        if args.command == "mesh":
            _run_mesh(args)
        elif args.command == "solve":
            _run_solve(args)
        else:
            _run_study(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
