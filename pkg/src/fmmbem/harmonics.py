"""Solid spherical harmonics and the translation machinery built on them.

Two families are used throughout, stored as flat complex arrays indexed by
``n*n + n + m`` for 0 <= n <= p, -n <= m <= n:

* regular   R_n^m(r) = rho^n P_n^m(cos a) e^{i m b} / (n+m)!
* irregular I_n^m(r) = (n-m)! P_n^m(cos a) e^{i m b} / rho^(n+1)

With this normalization the key identities are free of binomial factors:

* 1/|x - y|      = sum_nm R_n^m(y) conj(I_n^m(x))           (|y| < |x|)
* R_n^m(a + b)   = sum_jk R_j^k(a) R_{n-j}^{m-k}(b)
* I_n^m(a + b)   = sum_jk (-1)^j conj(R_j^k(b)) I_{n+j}^{m+k}(a)   (|b| < |a|)

and the gradient shift rules

* dz R_n^m = R_{n-1}^m,  (dx + i dy) R_n^m = R_{n-1}^{m+1},
  (dx - i dy) R_n^m = -R_{n-1}^{m-1}
* dz I_n^m = -I_{n+1}^m, (dx + i dy) I_n^m = I_{n+1}^{m+1},
  (dx - i dy) I_n^m = -I_{n+1}^{m-1}

All functions are batched over the leading axis and stateless.
"""

from functools import lru_cache

import numpy as np


def num_coeffs(p):
    return (p + 1) ** 2


def flat_index(n, m):
    return n * n + n + m


def regular(vecs, p):
    """R_n^m for a batch of vectors, shape (N, (p+1)^2)."""
    v = np.atleast_2d(np.asarray(vecs, dtype=float))
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    rho2 = x * x + y * y + z * z
    xi = x + 1j * y
    out = np.zeros((v.shape[0], num_coeffs(p)), dtype=complex)
    out[:, 0] = 1.0
    for m in range(1, p + 1):
        out[:, flat_index(m, m)] = -xi / (2 * m) * out[:, flat_index(m - 1, m - 1)]
    for m in range(0, p):
        out[:, flat_index(m + 1, m)] = z * out[:, flat_index(m, m)]
    for m in range(0, p + 1):
        for n in range(m + 2, p + 1):
            out[:, flat_index(n, m)] = (
                (2 * n - 1) * z * out[:, flat_index(n - 1, m)]
                - rho2 * out[:, flat_index(n - 2, m)]
            ) / ((n + m) * (n - m))
    for n in range(1, p + 1):
        for m in range(1, n + 1):
            out[:, flat_index(n, -m)] = (-1) ** m * np.conj(out[:, flat_index(n, m)])
    return out


def irregular(vecs, p):
    """I_n^m for a batch of vectors, shape (N, (p+1)^2).  Vectors must be nonzero."""
    v = np.atleast_2d(np.asarray(vecs, dtype=float))
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    rho2 = x * x + y * y + z * z
    xi = x + 1j * y
    out = np.zeros((v.shape[0], num_coeffs(p)), dtype=complex)
    out[:, 0] = 1.0 / np.sqrt(rho2)
    for m in range(1, p + 1):
        out[:, flat_index(m, m)] = (
            -(2 * m - 1) * xi / rho2 * out[:, flat_index(m - 1, m - 1)]
        )
    for m in range(0, p):
        out[:, flat_index(m + 1, m)] = (2 * m + 1) * z / rho2 * out[:, flat_index(m, m)]
    for m in range(0, p + 1):
        for n in range(m + 2, p + 1):
            out[:, flat_index(n, m)] = (
                (2 * n - 1) * z * out[:, flat_index(n - 1, m)]
                - ((n - 1) ** 2 - m * m) * out[:, flat_index(n - 2, m)]
            ) / rho2
    for n in range(1, p + 1):
        for m in range(1, n + 1):
            out[:, flat_index(n, -m)] = (-1) ** m * np.conj(out[:, flat_index(n, m)])
    return out


def _append_zero_slot(arr):
    """Add one trailing zero entry so gather maps can use index -1 for 'absent'."""
    pad = np.zeros(arr.shape[:-1] + (1,), dtype=arr.dtype)
    return np.concatenate([arr, pad], axis=-1)


@lru_cache(maxsize=64)
def shift_maps(p):
    """Index maps realizing the gradient shift rules on flat arrays of order p.

    Returns dict with int arrays of length (p+1)^2; -1 marks entries that fall
    outside the triangle (gathered from a zero slot).  'dn_*' maps give the
    coefficient of order n-1 (for regular gradients), 'up_*' the order n+1
    coefficient (for irregular gradients).
    """
    size = num_coeffs(p)
    dn_z = np.full(size, -1, dtype=np.intp)
    dn_p = np.full(size, -1, dtype=np.intp)  # m+1 at n-1
    dn_m = np.full(size, -1, dtype=np.intp)  # m-1 at n-1
    up_z = np.full(size, -1, dtype=np.intp)
    up_p = np.full(size, -1, dtype=np.intp)
    up_m = np.full(size, -1, dtype=np.intp)
    for n in range(p + 1):
        for m in range(-n, n + 1):
            i = flat_index(n, m)
            if n >= 1:
                if abs(m) <= n - 1:
                    dn_z[i] = flat_index(n - 1, m)
                if abs(m + 1) <= n - 1:
                    dn_p[i] = flat_index(n - 1, m + 1)
                if abs(m - 1) <= n - 1:
                    dn_m[i] = flat_index(n - 1, m - 1)
            if n + 1 <= p:
                up_z[i] = flat_index(n + 1, m)
                up_p[i] = flat_index(n + 1, m + 1)
                up_m[i] = flat_index(n + 1, m - 1)
    return {"dn_z": dn_z, "dn_p": dn_p, "dn_m": dn_m,
            "up_z": up_z, "up_p": up_p, "up_m": up_m}


def regular_gradient(reg, p):
    """(dx, dy, dz) of R_n^m arrays, each shaped like ``reg``.

    ``reg`` must hold coefficients of order p (gradient uses orders <= p-1).
    """
    maps = shift_maps(p)
    padded = _append_zero_slot(reg)
    a = padded[..., maps["dn_p"]]          # (dx + i dy) R
    b = -padded[..., maps["dn_m"]]         # (dx - i dy) R
    gx = 0.5 * (a + b)
    gy = (a - b) / 2j
    gz = padded[..., maps["dn_z"]]
    return gx, gy, gz


def irregular_gradient(irr_p1, p):
    """(dx, dy, dz) of I_n^m at order p, from I arrays computed at order p+1."""
    maps = shift_maps(p + 1)
    size = num_coeffs(p)
    padded = _append_zero_slot(irr_p1)
    a = padded[..., maps["up_p"][:size]]
    b = -padded[..., maps["up_m"][:size]]
    gx = 0.5 * (a + b)
    gy = (a - b) / 2j
    gz = -padded[..., maps["up_z"][:size]]
    return gx, gy, gz


@lru_cache(maxsize=64)
def rconv_map(p):
    """Gather map for R-convolution translations (M2M and L2L).

    T[out, in] = R_{delta_n}^{delta_m}(d): for M2M delta = out - in, for L2L
    delta = in - out.  Returns (m2m_map, l2l_map), each ((p+1)^2, (p+1)^2)
    int arrays into a flat R array of order p, with -1 for absent terms.
    """
    size = num_coeffs(p)
    m2m = np.full((size, size), -1, dtype=np.intp)
    l2l = np.full((size, size), -1, dtype=np.intp)
    for n in range(p + 1):
        for m in range(-n, n + 1):
            o = flat_index(n, m)
            for j in range(p + 1):
                for k in range(-j, j + 1):
                    i = flat_index(j, k)
                    if j <= n and abs(m - k) <= n - j:
                        m2m[o, i] = flat_index(n - j, m - k)
                    if j >= n and abs(k - m) <= j - n:
                        l2l[o, i] = flat_index(j - n, k - m)
    return m2m, l2l


@lru_cache(maxsize=64)
def m2l_map(p):
    """Gather map and sign for M2L.

    L_j^k = (-1)^j sum_nm M_n^m conj(I_{n+j}^{m+k}(D)); the map indexes a flat
    irregular array of order 2p.  Returns (map, sign) with shape
    ((p+1)^2, (p+1)^2).
    """
    size = num_coeffs(p)
    gmap = np.empty((size, size), dtype=np.intp)
    sign = np.empty(size, dtype=float)
    for j in range(p + 1):
        for k in range(-j, j + 1):
            o = flat_index(j, k)
            sign[o] = (-1.0) ** j
            for n in range(p + 1):
                for m in range(-n, n + 1):
                    gmap[o, flat_index(n, m)] = flat_index(n + j, m + k)
    return gmap, sign


def translation_matrix(kind, d, p):
    """Dense ((p+1)^2, (p+1)^2) translation operator for offset d.

    kind: 'm2m' or 'l2l' (d = child_center - parent_center, applied as
    coeffs_new = T @ coeffs_old) or 'm2l' (d = target_center - source_center).
    """
    d = np.asarray(d, dtype=float)
    if kind == "m2l":
        gmap, sign = m2l_map(p)
        grid = irregular(d[None, :], 2 * p)[0]
        return sign[:, None] * np.conj(grid)[gmap]
    grid = _append_zero_slot(regular(d[None, :], p)[0])
    m2m, l2l = rconv_map(p)
    if kind == "m2m":
        return grid[m2m]
    if kind == "l2l":
        return grid[l2l]
    raise ValueError(f"unknown translation kind {kind!r}")


def particle_to_multipole(rel_pos, charges, p, dipoles=None):
    """Multipole coefficients of point charges (and optional dipoles).

    rel_pos: (N, 3) positions relative to the expansion center.
    charges: (..., N) weights, leading axes are broadcast channels.
    dipoles: optional (..., N, 3) dipole moments (normal-derivative sources).
    Returns coefficients shaped (..., (p+1)^2).
    """
    reg = regular(rel_pos, p)
    coeffs = np.asarray(charges, dtype=float) @ reg
    if dipoles is not None:
        gx, gy, gz = regular_gradient(reg, p)
        dip = np.asarray(dipoles, dtype=float)
        coeffs = coeffs + dip[..., 0] @ gx + dip[..., 1] @ gy + dip[..., 2] @ gz
    return coeffs


def multipole_to_point(coeffs, rel_pos, p, want_gradient=False):
    """Evaluate a multipole expansion at points relative to its center.

    coeffs: ((p+1)^2,) or (C, (p+1)^2); rel_pos: (N, 3).  Returns (N,) or
    (C, N) potentials and, if requested, gradients with a trailing 3-axis.
    """
    single = np.asarray(coeffs).ndim == 1
    c = np.atleast_2d(coeffs)
    irr = irregular(rel_pos, p + 1 if want_gradient else p)
    size = num_coeffs(p)
    pot = np.real(c[:, :size] @ np.conj(irr[:, :size]).T)
    if not want_gradient:
        return pot[0] if single else pot
    gx, gy, gz = irregular_gradient(irr, p)
    grad = np.stack([np.real(c[:, :size] @ np.conj(g).T) for g in (gx, gy, gz)], axis=-1)
    if single:
        return pot[0], grad[0]
    return pot, grad


def local_to_point(coeffs, rel_pos, p, want_gradient=False):
    """Evaluate a local expansion at points relative to its center."""
    single = np.asarray(coeffs).ndim == 1
    c = np.atleast_2d(coeffs)
    reg = regular(rel_pos, p)
    pot = np.real(c @ reg.T)
    if not want_gradient:
        return pot[0] if single else pot
    gx, gy, gz = regular_gradient(reg, p)
    grad = np.stack([np.real(c @ g.T) for g in (gx, gy, gz)], axis=-1)
    if single:
        return pot[0], grad[0]
    return pot, grad
