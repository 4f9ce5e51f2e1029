"""Triangle quadrature rules and panel integration for collocation BEM.

Panels carry piecewise-constant densities and are collocated at centroids.
Three regimes are distinguished per (target, panel) pair:

* far: a coarse symmetric rule is enough (and is what the fast summation
  uses, treating Gauss points as independent point sources),
* near: a fine rule controls the nearly-singular error,
* singular: the target is the panel's own centroid; the kernel is integrated
  in polar coordinates about it, radially exact for the 1/r singularity.
"""

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .kernels import FOUR_PI, KernelKind


@dataclass(frozen=True)
class TriangleRule:
    """Quadrature rule in barycentric coordinates; weights sum to one."""

    name: str
    bary: np.ndarray     # (K, 3)
    weights: np.ndarray  # (K,)

    @property
    def n_points(self):
        return len(self.weights)


def _sym3(a):
    """The three cyclic permutations of (a, a, 1 - 2a)."""
    c = 1.0 - 2.0 * a
    return [(c, a, a), (a, c, a), (a, a, c)]


def _sym6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


def _make_far_rule():
    # symmetric 4-point rule, degree 3, centroid first
    pts = [(1 / 3, 1 / 3, 1 / 3)] + _sym3(0.2)
    wts = [-27 / 48] + [25 / 48] * 3
    return TriangleRule("far", np.array(pts), np.array(wts))


def _make_near_rule():
    # 19-point symmetric rule, degree 9
    pts = [(1 / 3, 1 / 3, 1 / 3)]
    wts = [0.097135796282799]
    for a, w in [
        (0.489682519198738, 0.031334700227139),
        (0.437089591492937, 0.077827541004774),
        (0.188203535619033, 0.079647738927210),
        (0.044729513394453, 0.025577675658698),
    ]:
        pts += _sym3(a)
        wts += [w] * 3
    pts += _sym6(0.741198598784498, 0.036838412054736)
    wts += [0.043283539377289] * 6
    return TriangleRule("near", np.array(pts), np.array(wts))


FAR_RULE = _make_far_rule()
NEAR_RULE = _make_near_rule()


@lru_cache(maxsize=16)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


class PanelRegime(enum.Enum):
    FAR = "far"
    NEAR = "near"
    SINGULAR = "singular"


def panel_geometry(vertices):
    """(centroid, unit normal, area) of one or many triangles.

    vertices: (3, 3) or (P, 3, 3); normal follows the right-hand rule on the
    vertex ordering.
    """
    v = np.asarray(vertices, dtype=float)
    single = v.ndim == 2
    v = v[None] if single else v
    centroid = v.mean(axis=1)
    cross = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    if np.any(norm == 0.0):
        raise ValueError("degenerate triangle")
    normal = cross / norm[:, None]
    area = 0.5 * norm
    if single:
        return centroid[0], normal[0], area[0]
    return centroid, normal, area


def quadrature_points(vertices, rule):
    """Physical quadrature points and weights (including the panel area).

    vertices: (3, 3) or (P, 3, 3).  Returns points (..., K, 3) and weights
    (..., K) such that sum(w_k f(x_k)) approximates the surface integral.
    """
    v = np.asarray(vertices, dtype=float)
    single = v.ndim == 2
    v = v[None] if single else v
    _, _, area = panel_geometry(v)
    pts = np.einsum("kc,pcd->pkd", rule.bary, v)
    wts = area[:, None] * rule.weights[None, :]
    if single:
        return pts[0], wts[0]
    return pts, wts


def classify(targets, centroids, areas, near_factor=2.0):
    """Regime of every (target, panel) pair, as a (T, P) array of int codes.

    Codes: 0 far, 1 near, 2 singular.  A pair is near when the target lies
    within near_factor * sqrt(2 * area) of the panel centroid, and singular
    when the distance is (numerically) zero.
    """
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    c = np.atleast_2d(np.asarray(centroids, dtype=float))
    d = np.linalg.norm(t[:, None, :] - c[None, :, :], axis=-1)
    cutoff = near_factor * np.sqrt(2.0 * np.asarray(areas, dtype=float))
    out = np.zeros(d.shape, dtype=np.int8)
    out[d < cutoff[None, :]] = 1
    out[d < 1e-12 * np.maximum(1.0, np.linalg.norm(c, axis=1))[None, :]] = 2
    return out


def integrate_panel(kind, vertices, targets, rule=NEAR_RULE):
    """Quadrature of one panel's kernel against a unit constant density.

    Returns (T,) for Laplace kernels, (T, 3, 3) blocks for Stokes kernels
    (block acting on the panel strength vector).  Targets must not lie on
    the panel (use the singular routines for the self term).
    """
    kind = KernelKind(kind)
    tgt = np.atleast_2d(np.asarray(targets, dtype=float))
    _, normal, _ = panel_geometry(vertices)
    pts, wts = quadrature_points(vertices, rule)
    r = tgt[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(r, axis=-1)
    if np.any(dist == 0.0):
        raise ValueError("target coincides with a quadrature point")
    if kind is KernelKind.LAPLACE_SINGLE:
        return np.sum(wts / dist, axis=1) / FOUR_PI
    if kind is KernelKind.LAPLACE_DOUBLE:
        rn = r @ normal
        return np.sum(wts * rn / dist ** 3, axis=1) / FOUR_PI
    if kind is KernelKind.STOKESLET:
        outer = np.einsum("tki,tkj->tkij", r, r)
        blocks = np.eye(3)[None, None] / dist[..., None, None] + outer / (
            dist ** 3
        )[..., None, None]
        return np.einsum("k,tkij->tij", wts, blocks)
    if kind is KernelKind.STRESSLET:
        rn = r @ normal
        outer = np.einsum("tki,tkj->tkij", r, r)
        blocks = 6.0 * outer * (rn / dist ** 5)[..., None, None]
        return np.einsum("k,tkij->tij", wts, blocks)
    raise ValueError(f"unsupported kernel {kind!r}")


def _local_frame(vertices):
    """Orthonormal frame (e1, e2, n) and in-plane vertex coords about the centroid."""
    v = np.asarray(vertices, dtype=float)
    centroid, normal, _ = panel_geometry(v)
    e1 = v[1] - v[0]
    e1 = e1 - np.dot(e1, normal) * normal
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(normal, e1)
    rel = v - centroid
    uv = np.stack([rel @ e1, rel @ e2], axis=1)
    return centroid, np.stack([e1, e2, normal]), uv


def _polar_subtriangles(uv, n_gauss):
    """Angular Gauss nodes, weights and radial extents around the origin.

    uv: (3, 2) in-plane vertices of a triangle containing the origin.
    Yields per sub-triangle the angles phi_k, quadrature weights, and the
    distance R(phi_k) to the opposite edge.
    """
    x, w = _leggauss(n_gauss)
    for i in range(3):
        a, b = uv[i], uv[(i + 1) % 3]
        ta = math.atan2(a[1], a[0])
        tb = math.atan2(b[1], b[0])
        if tb <= ta:
            tb += 2.0 * math.pi
        phi = 0.5 * (tb - ta) * x + 0.5 * (tb + ta)
        wphi = 0.5 * (tb - ta) * w
        edge = b - a
        n_e = np.array([edge[1], -edge[0]])
        n_e /= np.linalg.norm(n_e)
        d_e = float(n_e @ a)
        if d_e < 0.0:
            n_e, d_e = -n_e, -d_e
        cosfac = np.cos(phi) * n_e[0] + np.sin(phi) * n_e[1]
        yield phi, wphi, d_e / cosfac


def integrate_singular_laplace(vertices, n_gauss=32):
    """Integral of 1/(4 pi r) over a triangle, singularity at the centroid.

    Radial integration is exact; the angular factor R(phi) is integrated by
    Gauss-Legendre on three centroid-vertex sub-triangles.
    """
    _, _, uv = _local_frame(vertices)
    total = 0.0
    for _, wphi, R in _polar_subtriangles(uv, n_gauss):
        total += float(wphi @ R)
    return total / FOUR_PI


def integrate_singular_stokeslet(vertices, n_gauss=32):
    """(3, 3) integral of the bare stokeslet over its own triangle.

    In the panel plane G = (I + u u^T)/r with u the in-plane unit direction,
    so the radial integral is R(phi) (I + u u^T); the result is rotated back
    to global axes.
    """
    _, frame, uv = _local_frame(vertices)
    block2 = np.zeros((2, 2))
    scalar = 0.0
    for phi, wphi, R in _polar_subtriangles(uv, n_gauss):
        c, s = np.cos(phi), np.sin(phi)
        scalar += float(wphi @ R)
        block2[0, 0] += float(wphi @ (R * c * c))
        block2[0, 1] += float(wphi @ (R * c * s))
        block2[1, 1] += float(wphi @ (R * s * s))
    block2[1, 0] = block2[0, 1]
    local = np.eye(3) * scalar
    local[:2, :2] += block2
    # flat panel: r has no normal component, so the n-n entry stays I * scalar
    return frame.T @ local @ frame


def singular_panel_block(kind, vertices, n_gauss=32):
    """Self-panel integral for any kernel (zero for the odd flat-panel ones)."""
    kind = KernelKind(kind)
    if kind is KernelKind.LAPLACE_SINGLE:
        return integrate_singular_laplace(vertices, n_gauss)
    if kind is KernelKind.LAPLACE_DOUBLE:
        return 0.0
    if kind is KernelKind.STOKESLET:
        return integrate_singular_stokeslet(vertices, n_gauss)
    if kind is KernelKind.STRESSLET:
        return np.zeros((3, 3))
    raise ValueError(f"unsupported kernel {kind!r}")
