"""Solid-harmonic expansions and translations against direct kernel sums."""

import numpy as np
import pytest

from fmmbem import harmonics as H
from fmmbem import fmm
from fmmbem.kernels import FOUR_PI, direct_sum, KernelKind

RNG = np.random.default_rng(7)


def _cluster(n=40, radius=0.5):
    v = RNG.normal(size=(n, 3))
    v *= radius * RNG.uniform(0.2, 1.0, size=(n, 1)) / np.linalg.norm(v, axis=1, keepdims=True)
    return v


def test_expansion_identity_converges():
    """Multipole evaluation of sum q/(4 pi r) converges geometrically in p."""
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    tgt = np.array([[2.0, 0.3, -0.4], [0.0, -2.5, 1.0]])
    ref = direct_sum(KernelKind.LAPLACE_SINGLE, src, q, tgt)
    errs = []
    for p in (4, 8, 12):
        exp = fmm.p2m(src, q, np.zeros(3), p)
        val = fmm.m2p(exp, tgt) / FOUR_PI
        errs.append(np.max(np.abs(val - ref) / np.abs(ref)))
    assert errs[0] < 1e-2
    assert errs[1] < errs[0] / 10
    assert errs[2] < 1e-8


def test_dipole_expansion_matches_double_layer():
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    normals = RNG.normal(size=(len(src), 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    tgt = np.array([[2.2, -0.1, 0.5]])
    ref = direct_sum(KernelKind.LAPLACE_DOUBLE, src, q, tgt, normals=normals)
    exp = fmm.p2m(src, np.zeros(len(src)), np.zeros(3), 14,
                  dipoles=q[:, None] * normals)
    val = fmm.m2p(exp, tgt) / FOUR_PI
    assert abs(val[0] - ref[0]) < 1e-9 * abs(ref[0]) + 1e-14


def test_m2m_is_exact():
    """Shifting a multipole expansion loses nothing at fixed order."""
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    p = 8
    shifted_center = np.array([0.3, -0.2, 0.1])
    direct = fmm.p2m(src, q, shifted_center, p)
    via_shift = fmm.m2m(fmm.p2m(src, q, np.zeros(3), p), shifted_center)
    np.testing.assert_allclose(via_shift.coeffs, direct.coeffs, atol=1e-12)


def test_l2l_is_exact():
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    p = 8
    local = fmm.m2l(fmm.p2m(src, q, np.zeros(3), p), np.array([3.0, 0.0, 0.0]))
    moved = fmm.l2l(local, np.array([3.1, 0.05, -0.1]))
    tgt = np.array([[3.15, 0.1, -0.05]])
    np.testing.assert_allclose(fmm.l2p(moved, tgt), fmm.l2p(local, tgt), rtol=1e-12)


def test_m2l_converges():
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    tgt = np.array([[2.9, 0.2, -0.1], [3.1, -0.2, 0.15]])
    ref = direct_sum(KernelKind.LAPLACE_SINGLE, src, q, tgt)
    errs = []
    for p in (4, 10):
        local = fmm.m2l(fmm.p2m(src, q, np.zeros(3), p), np.array([3.0, 0.0, 0.0]))
        val = fmm.l2p(local, tgt) / FOUR_PI
        errs.append(np.max(np.abs(val - ref) / np.abs(ref)))
    assert errs[0] < 1e-2
    assert errs[1] < 1e-6


@pytest.mark.parametrize("which", ["multipole", "local"])
def test_gradients_match_finite_differences(which):
    src = _cluster()
    q = RNG.uniform(-1.0, 1.0, size=len(src))
    p = 10
    exp = fmm.p2m(src, q, np.zeros(3), p)
    if which == "local":
        exp = fmm.m2l(exp, np.array([2.5, 0.1, 0.0]))
        evaluate, tgt = fmm.l2p, np.array([[2.6, 0.2, -0.1]])
    else:
        evaluate, tgt = fmm.m2p, np.array([[2.0, 0.4, -0.3]])
    _, grad = evaluate(exp, tgt, want_gradient=True)
    h = 1e-6
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        fd = (evaluate(exp, tgt + step)[0] - evaluate(exp, tgt - step)[0]) / (2 * h)
        assert abs(grad[0, axis] - fd) < 1e-6 * max(1.0, abs(fd))


def test_flat_index_layout():
    assert H.flat_index(0, 0) == 0
    assert H.flat_index(1, -1) == 1
    assert H.flat_index(1, 0) == 2
    assert H.flat_index(1, 1) == 3
    assert H.num_coeffs(3) == 16


def test_regular_conjugate_symmetry():
    """R_n^{-m} = (-1)^m conj(R_n^m)."""
    p = 6
    reg = H.regular(RNG.normal(size=(5, 3)), p)
    for n in range(p + 1):
        for m in range(n + 1):
            a = reg[:, H.flat_index(n, -m)]
            b = (-1.0) ** m * np.conj(reg[:, H.flat_index(n, m)])
            np.testing.assert_allclose(a, b, atol=1e-12)
