"""Laplace boundary element solves on the unit sphere.

A unit sphere held at potential phi = 1 carries the uniform charge
density q = 1 (in the scaling used here), so both the first-kind and
the second-kind formulations have a known exact answer.  The error
decreases with mesh refinement at the expected rate.
"""

import numpy as np

from fmmbem import BemOperator, Formulation, make_sphere, solve

for name, form in (("first kind", Formulation.LAPLACE_FIRST),
                   ("second kind", Formulation.LAPLACE_SECOND)):
    print(f"\n{name}:")
    print("    N     iterations    rel. L2 error")
    errors = []
    for level in (2, 3, 4):
        m = make_sphere(level)
        op = BemOperator(m, form)
        b = op.assemble_rhs(np.ones(m.n_panels))
        res = solve(op, b, eta=1e-6, p_initial=12)
        w = op.areas
        err = np.sqrt(w @ (res.x - 1.0) ** 2 / w.sum())
        errors.append(err)
        print(f"  {m.n_panels:5d}    {res.n_iterations:6d}       {err:11.3e}")
    rate = np.log(errors[-2] / errors[-1]) / np.log(4.0)
    print(f"  observed order (area scales like 1/N): {rate:.2f}")
