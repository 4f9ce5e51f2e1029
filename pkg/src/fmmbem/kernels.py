"""Point-to-point Green's function kernels and the direct N-body reference sum.

Laplace kernels carry the 1/(4 pi) factor of G = 1/(4 pi r).  The Stokes
kernels are prefactor-free (the -1/(8 pi mu) and 1/(8 pi) factors of the
boundary-integral formulation are applied by the operator layer).
"""

import enum

import numpy as np

FOUR_PI = 4.0 * np.pi


class KernelKind(enum.Enum):
    LAPLACE_SINGLE = "laplace_single"
    LAPLACE_DOUBLE = "laplace_double"
    STOKESLET = "stokeslet"
    STRESSLET = "stresslet"


def _separation(x_t, x_s):
    r = np.asarray(x_t, dtype=float) - np.asarray(x_s, dtype=float)
    dist = np.linalg.norm(r, axis=-1)
    if np.any(dist == 0.0):
        raise ValueError("coincident source and target")
    return r, dist


def laplace_single(x_t, x_s):
    """1 / (4 pi |x_t - x_s|)."""
    _, dist = _separation(x_t, x_s)
    return 1.0 / (FOUR_PI * dist)


def laplace_double(x_t, x_s, normal_s):
    """(x_t - x_s) . n_s / (4 pi r^3), the normal derivative of G at the source."""
    r, dist = _separation(x_t, x_s)
    return np.sum(r * np.asarray(normal_s, dtype=float), axis=-1) / (FOUR_PI * dist ** 3)


def stokeslet(x_t, x_s):
    """3x3 stokeslet block delta_ij / r + r_i r_j / r^3."""
    r, dist = _separation(x_t, x_s)
    eye = np.eye(3)
    outer = np.einsum("...i,...j->...ij", r, r)
    shape = np.shape(dist)
    return eye / dist.reshape(shape + (1, 1)) + outer / (dist ** 3).reshape(shape + (1, 1))


def stresslet_contracted(x_t, x_s, normal_s):
    """3x3 block of the stresslet contracted with the source normal:
    6 r_i r_j (r . n) / r^5."""
    r, dist = _separation(x_t, x_s)
    rn = np.sum(r * np.asarray(normal_s, dtype=float), axis=-1)
    outer = np.einsum("...i,...j->...ij", r, r)
    shape = np.shape(dist)
    return 6.0 * outer * rn.reshape(shape + (1, 1)) / (dist ** 5).reshape(shape + (1, 1))


def direct_sum(kind, src_pos, weights, targets, normals=None, chunk=2048):
    """Direct O(N_t * N_s) kernel sum, deterministic (ascending source index).

    weights: (Ns,) scalar charges for Laplace kernels, (Ns, 3) strengths for
    Stokes kernels.  normals: (Ns, 3), required for double-layer/stresslet.
    Returns (Nt,) potentials or (Nt, 3) velocities.
    """
    kind = KernelKind(kind)
    src = np.atleast_2d(np.asarray(src_pos, dtype=float))
    tgt = np.atleast_2d(np.asarray(targets, dtype=float))
    w = np.asarray(weights, dtype=float)
    needs_normal = kind in (KernelKind.LAPLACE_DOUBLE, KernelKind.STRESSLET)
    if needs_normal and normals is None:
        raise ValueError(f"{kind.value} requires source normals")
    scalar = kind in (KernelKind.LAPLACE_SINGLE, KernelKind.LAPLACE_DOUBLE)
    out = np.zeros(len(tgt)) if scalar else np.zeros((len(tgt), 3))
    for lo in range(0, len(tgt), chunk):
        t = tgt[lo:lo + chunk]
        r = t[:, None, :] - src[None, :, :]
        d2 = np.einsum("tsi,tsi->ts", r, r)
        if np.any(d2 == 0.0):
            ti, si = np.argwhere(d2 == 0.0)[0]
            raise ValueError(f"coincident pair: target {lo + ti}, source {si}")
        d = np.sqrt(d2)
        if kind is KernelKind.LAPLACE_SINGLE:
            out[lo:lo + chunk] = np.sum(w / d, axis=1) / FOUR_PI
        elif kind is KernelKind.LAPLACE_DOUBLE:
            rn = np.einsum("tsi,si->ts", r, normals)
            out[lo:lo + chunk] = np.sum(w * rn / d ** 3, axis=1) / FOUR_PI
        elif kind is KernelKind.STOKESLET:
            rw = np.einsum("tsi,si->ts", r, w)
            out[lo:lo + chunk] = np.einsum("si,ts->ti", w, 1.0 / d) + np.einsum(
                "tsi,ts->ti", r, rw / d ** 3
            )
        else:  # stresslet
            rw = np.einsum("tsi,si->ts", r, w)
            rn = np.einsum("tsi,si->ts", r, normals)
            out[lo:lo + chunk] = 6.0 * np.einsum("tsi,ts->ti", r, rw * rn / d ** 5)
    return out
