"""Experiment harness: convergence, relaxation-speedup and scaling studies.

Each study returns a StudyReport holding per-run records plus derived
quantities (observed order, extrapolated limit, speedup).  Reports write to
a key-value text file and a CSV of the records; timings are wall-clock
around the solve loop only and averaged over repeated identical runs.
"""

import json
import time

import numpy as np

from . import mesh as meshes
from . import solver
from .bemop import BemOperator, Formulation
from .fmm import FmmPlan, evaluate
from .kernels import KernelKind


def observed_order(f1, f2, f3, c=4.0):
    """Convergence order from three values on meshes refined by factor c.

    order = ln((f2 - f1)/(f3 - f2)) / ln(c); the triple must be monotone.
    """
    if c <= 1.0:
        raise ValueError("refinement ratio c must exceed 1")
    num = f2 - f1
    den = f3 - f2
    if den == 0.0 or num / den <= 0.0:
        raise ValueError("triple is not monotone; order undefined")
    return np.log(num / den) / np.log(c)


def richardson(f1, f2, f3):
    """Extrapolated limit (f1 f3 - f2^2)/(f1 - 2 f2 + f3) of a refinement triple."""
    den = f1 - 2.0 * f2 + f3
    if den == 0.0:
        raise ValueError("degenerate triple; extrapolation undefined")
    return (f1 * f3 - f2 * f2) / den


class StudyReport:
    """Structured study output: records (one dict per run) plus derived values."""

    def __init__(self, kind, params=None, records=None, derived=None):
        self.kind = kind
        self.params = dict(params or {})
        self.records = list(records or [])
        self.derived = dict(derived or {})

    def write(self, path):
        """Key-value text file; every value is JSON-encoded on its line."""
        with open(path, "w") as fh:
            fh.write(f"kind = {json.dumps(self.kind)}\n")
            for k, v in self.params.items():
                fh.write(f"param.{k} = {json.dumps(v)}\n")
            for i, rec in enumerate(self.records):
                fh.write(f"record.{i} = {json.dumps(rec)}\n")
            for k, v in self.derived.items():
                fh.write(f"derived.{k} = {json.dumps(v)}\n")

    @classmethod
    def read(cls, path):
        rep = cls(kind="")
        records = {}
        with open(path) as fh:
            for line in fh:
                key, _, raw = line.partition(" = ")
                val = json.loads(raw)
                if key == "kind":
                    rep.kind = val
                elif key.startswith("param."):
                    rep.params[key[6:]] = val
                elif key.startswith("record."):
                    records[int(key[7:])] = val
                elif key.startswith("derived."):
                    rep.derived[key[8:]] = val
        rep.records = [records[i] for i in sorted(records)]
        return rep

    def write_csv(self, path):
        """One CSV row per record, columns from the union of record keys."""
        cols = []
        for rec in self.records:
            for k in rec:
                if k not in cols:
                    cols.append(k)
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for rec in self.records:
                fh.write(",".join(json.dumps(rec.get(c, "")) for c in cols) + "\n")


_FORMULATIONS = {
    "laplace1": Formulation.LAPLACE_FIRST,
    "laplace2": Formulation.LAPLACE_SECOND,
    "stokes": Formulation.STOKES,
}


def _sphere_problem(problem, level, theta, n_crit, mu):
    """Operator, boundary data and exact per-panel solution on the unit sphere.

    laplace1: phi = 1 given, exact charge q = 1.  laplace2: q = 1 given,
    exact phi = 1.  stokes: ambient velocity (1, 0, 0), exact drag 6 pi mu.
    """
    m = meshes.make_sphere(level)
    form = _FORMULATIONS[problem]
    op = BemOperator(m, form, theta=theta, n_crit=n_crit, mu=mu)
    if problem == "stokes":
        data = np.tile([1.0, 0.0, 0.0], (m.n_panels, 1))
        exact = None
    else:
        data = np.ones(m.n_panels)
        exact = np.ones(m.n_panels)
    return op, data, exact


def _solution_error(op, problem, x, exact):
    """Relative error metric of one converged solve."""
    if problem == "stokes":
        drag = op.drag_force(x)[0]
        ref = 6.0 * np.pi * op.mu
        return abs(drag - ref) / ref
    w = op.areas
    return float(np.sqrt(w @ (x - exact) ** 2 / (w @ exact ** 2)))


def _middle_triples(values, counts):
    """Observed orders from interior triples ("middle of each line")."""
    orders = []
    idx = range(1, len(values) - 1) if len(values) >= 5 else [len(values) // 2]
    for i in idx:
        try:
            orders.append(float(observed_order(values[i - 1], values[i], values[i + 1],
                                               c=counts[i] / counts[i - 1])))
        except ValueError:
            pass
    return orders


def run_convergence(problem, levels, p=12, tol=1e-6, theta=0.5, n_crit=126,
                    mu=1e-3, p_min=1, relaxed=True, max_iter=100):
    """Solve one problem family over refined meshes and report error orders.

    problem: 'laplace1' | 'laplace2' | 'stokes' | 'rbc'.  The rbc study has
    no analytic solution; its drag values are Richardson-extrapolated instead.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 mesh levels")
    params = dict(problem=problem, p=p, tol=tol, theta=theta, n_crit=n_crit,
                  p_min=p_min, relaxed=relaxed)
    report = StudyReport("convergence", params)
    errors, drags, counts = [], [], []
    for level in levels:
        if problem == "rbc":
            m = meshes.make_rbc(level)
            op = BemOperator(m, Formulation.STOKES, theta=theta, n_crit=n_crit, mu=mu)
            data = np.tile([1.0, 0.0, 0.0], (m.n_panels, 1))
            exact = None
        else:
            op, data, exact = _sphere_problem(problem, level, theta, n_crit, mu)
        b = op.assemble_rhs(data)
        t0 = time.perf_counter()
        res = solver.solve(op, b, eta=tol, p_initial=p, p_min=p_min,
                           relaxed=relaxed, max_iter=max_iter)
        t1 = time.perf_counter()
        rec = dict(N=op.n_panels, iterations=res.n_iterations,
                   converged=res.converged, time=t1 - t0, orders=res.orders)
        counts.append(op.n_panels)
        if problem in ("stokes", "rbc"):
            drag = float(op.drag_force(res.x)[0])
            rec["drag"] = drag
            drags.append(drag)
        if problem == "rbc":
            errors.append(drag)
        else:
            err = _solution_error(op, problem, res.x, exact)
            rec["error"] = err
            errors.append(err)
        report.records.append(rec)
    if problem == "rbc":
        f1, f2, f3 = drags[-3:]
        report.derived["extrapolated_drag"] = float(richardson(f1, f2, f3))
        report.derived["order"] = float(observed_order(f1, f2, f3,
                                                       c=counts[-1] / counts[-2]))
    else:
        orders = _middle_triples(errors, counts)
        report.derived["orders"] = orders
        report.derived["order"] = float(np.mean(orders)) if orders else float("nan")
    return report


def _timed_solve(op, b, repeats, **kw):
    """Mean/min/max wall time over identical runs, plus the last result."""
    times = []
    res = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = solver.solve(op, b, **kw)
        times.append(time.perf_counter() - t0)
    return res, float(np.mean(times)), float(min(times)), float(max(times))


def run_relaxation_comparison(problem, level, tol=1e-5, p_initial=12, p_min=1,
                              theta=0.5, ncrit_candidates=(126,), mu=1e-3,
                              repeats=3, max_iter=100):
    """Paired relaxed / fixed-order solves with per-variant best n_crit.

    The optimal near/far balance differs between the two variants because
    relaxation cheapens only the far field, so each candidate n_crit is tried
    for both and the fastest kept.  speedup = best fixed time / best relaxed.
    """
    params = dict(problem=problem, level=level, tol=tol, p_initial=p_initial,
                  p_min=p_min, theta=theta, repeats=repeats,
                  ncrit_candidates=list(ncrit_candidates))
    report = StudyReport("relaxation", params)
    best = {True: None, False: None}
    x_best = {}
    for n_crit in ncrit_candidates:
        op, data, _ = _sphere_problem(problem, level, theta, n_crit, mu)
        b = op.assemble_rhs(data)
        for relaxed in (True, False):
            res, t_mean, t_min, t_max = _timed_solve(
                op, b, repeats, eta=tol, p_initial=p_initial,
                p_min=p_min if relaxed else p_initial,
                relaxed=relaxed, max_iter=max_iter)
            rec = dict(N=op.n_panels, n_crit=n_crit, relaxed=relaxed,
                       iterations=res.n_iterations, converged=res.converged,
                       time=t_mean, time_min=t_min, time_max=t_max)
            report.records.append(rec)
            if best[relaxed] is None or t_mean < best[relaxed]["time"]:
                best[relaxed] = rec
                x_best[relaxed] = res.x
    report.derived["speedup"] = best[False]["time"] / best[True]["time"]
    report.derived["iterations_relaxed"] = best[True]["iterations"]
    report.derived["iterations_fixed"] = best[False]["iterations"]
    dx = np.linalg.norm(x_best[True] - x_best[False])
    report.derived["solution_difference"] = float(dx / np.linalg.norm(x_best[False]))
    return report


def run_scaling(sizes, p=5, n_crit=126, theta=0.5, repeats=1, seed=0):
    """Wall time of one Laplace tree evaluation across problem sizes.

    Uniform random sources in the unit cube; the fitted log-log slope should
    stay near 1 for a linear-scaling evaluation.
    """
    sizes = [int(n) for n in sizes]
    rng = np.random.default_rng(seed)
    params = dict(p=p, n_crit=n_crit, theta=theta, repeats=repeats, seed=seed)
    report = StudyReport("scaling", params)
    times = []
    for n in sizes:
        pos = rng.uniform(0.0, 1.0, size=(n, 3))
        charges = rng.uniform(-1.0, 1.0, size=n)
        plan = FmmPlan(pos, pos, n_crit=n_crit, theta=theta)
        run_times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            evaluate(KernelKind.LAPLACE_SINGLE, pos, charges, pos, p=p, plan=plan)
            run_times.append(time.perf_counter() - t0)
        t_mean = float(np.mean(run_times))
        times.append(t_mean)
        report.records.append(dict(N=n, time=t_mean,
                                   time_min=float(min(run_times)),
                                   time_max=float(max(run_times))))
    if len(sizes) >= 2:
        slope = np.polyfit(np.log(sizes), np.log(times), 1)[0]
        report.derived["slope"] = float(slope)
    return report
