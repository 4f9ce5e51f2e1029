"""GMRES with residual-driven relaxation of the expansion order.

The mat-vec accuracy a Krylov method actually needs grows as the residual
falls, so each iteration may use a cheaper (lower-order) multipole
approximation than the last.  The per-iteration accuracy budget is

    eps_k = min(eta / min(r_{k-1}, 1), 1)

with r_{k-1} the preceding relative residual and eta the solve tolerance,
and the order follows as p_k = ceil(-log2 eps_k), clamped to
[p_min, p_initial] and kept non-increasing.
"""

import math
from dataclasses import dataclass, field

import numpy as np


def relax_eps(residual, eta):
    """Per-iteration mat-vec accuracy budget from the current relative residual."""
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    return min(eta / min(max(residual, eta), 1.0), 1.0)


def schedule_p(residual, eta, p_initial, p_min):
    """Expansion order for the next iteration under the relaxation rule."""
    eps = relax_eps(residual, eta)
    p = math.ceil(-math.log2(eps)) if eps < 1.0 else p_min
    return int(min(p_initial, max(p_min, p)))


@dataclass
class RelaxationSchedule:
    """Order policy for the solver; fixed order when relaxed is False."""

    p_initial: int = 12
    p_min: int = 1
    eta: float = 1e-5
    relaxed: bool = True

    def order(self, residual, previous_p):
        if not self.relaxed:
            return self.p_initial
        p = schedule_p(residual, self.eta, self.p_initial, self.p_min)
        return min(p, previous_p)  # never spend more than an earlier iteration


@dataclass
class SolveResult:
    x: np.ndarray
    residuals: list = field(default_factory=list)   # relative, one per iteration
    orders: list = field(default_factory=list)      # p used in each iteration
    converged: bool = False

    @property
    def n_iterations(self):
        return len(self.orders)

    def save_history(self, path):
        """Write 'iteration,residual,p' lines for the convergence history."""
        with open(path, "w") as fh:
            fh.write("iteration,residual,p\n")
            for k, (r, p) in enumerate(zip(self.residuals, self.orders), start=1):
                fh.write(f"{k},{r:.17g},{p}\n")


def gmres(apply_fn, b, schedule=None, tol=1e-5, max_iter=100, callback=None):
    """Unrestarted GMRES on y = apply_fn(x, p) with a per-iteration order p.

    apply_fn: callable (x, p) -> A x.  schedule: RelaxationSchedule (defaults
    to a fixed-order solve at p_initial=12 with eta=tol).  Iterates until the
    relative residual estimate drops below tol or max_iter is reached.
    Modified Gram-Schmidt Arnoldi with Givens rotations; no restarting, so
    max_iter basis vectors are kept at most.
    """
    if schedule is None:
        schedule = RelaxationSchedule(eta=tol, relaxed=False)
    b = np.asarray(b, dtype=float)
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return SolveResult(x=np.zeros_like(b), converged=True)

    n = len(b)
    basis = [b / norm_b]
    H = np.zeros((max_iter + 1, max_iter))
    cs = np.zeros(max_iter)
    sn = np.zeros(max_iter)
    g = np.zeros(max_iter + 1)
    g[0] = norm_b
    result = SolveResult(x=np.zeros(n))
    residual = 1.0
    prev_p = schedule.p_initial

    for k in range(max_iter):
        p = schedule.order(residual, prev_p)
        prev_p = p
        w = apply_fn(basis[k], p)
        for j in range(k + 1):
            H[j, k] = basis[j] @ w
            w = w - H[j, k] * basis[j]
        H[k + 1, k] = np.linalg.norm(w)
        if H[k + 1, k] > 0.0:
            basis.append(w / H[k + 1, k])
        else:
            basis.append(np.zeros(n))  # lucky breakdown; residual hits zero below
        for j in range(k):
            h1 = cs[j] * H[j, k] + sn[j] * H[j + 1, k]
            H[j + 1, k] = -sn[j] * H[j, k] + cs[j] * H[j + 1, k]
            H[j, k] = h1
        denom = math.hypot(H[k, k], H[k + 1, k])
        cs[k] = H[k, k] / denom
        sn[k] = H[k + 1, k] / denom
        H[k, k] = denom
        H[k + 1, k] = 0.0
        g[k + 1] = -sn[k] * g[k]
        g[k] = cs[k] * g[k]
        residual = abs(g[k + 1]) / norm_b
        result.residuals.append(residual)
        result.orders.append(p)
        if callback is not None:
            callback(k + 1, residual, p)
        if residual < tol:
            result.converged = True
            break

    m = len(result.orders)
    y = np.linalg.solve(H[:m, :m], g[:m]) if m else np.zeros(0)
    x = np.zeros(n)
    for j in range(m):
        x += y[j] * basis[j]
    result.x = x
    return result


def solve(operator, b, eta=1e-5, p_initial=12, p_min=1, relaxed=True,
          max_iter=100, callback=None):
    """Convenience wrapper: relaxed (or fixed-order) GMRES on a BEM operator."""
    schedule = RelaxationSchedule(p_initial=p_initial, p_min=p_min, eta=eta,
                                  relaxed=relaxed)
    return gmres(operator.apply, b, schedule=schedule, tol=eta,
                 max_iter=max_iter, callback=callback)
