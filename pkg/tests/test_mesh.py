"""Mesh generators, validity checks and file round-trips."""

import numpy as np
import pytest

from fmmbem import mesh as M


@pytest.mark.parametrize("level", [0, 1, 3])
def test_sphere_panel_count_and_validity(level):
    m = M.make_sphere(level)
    assert m.n_panels == 8 * 4 ** level
    assert M.check_closed(m)
    assert M.check_outward(m)
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1.0)


def test_sphere_area_volume_converge():
    errs_a, errs_v = [], []
    for level in (2, 3, 4):
        m = M.make_sphere(level)
        errs_a.append(abs(m.area - 4.0 * np.pi) / (4.0 * np.pi))
        errs_v.append(abs(m.volume - 4.0 * np.pi / 3.0) / (4.0 * np.pi / 3.0))
    assert errs_a[0] > errs_a[1] > errs_a[2]
    assert errs_v[2] < 1e-2


def test_sphere_radius_center():
    m = M.make_sphere(2, radius=2.5, center=(1.0, -2.0, 0.5))
    r = np.linalg.norm(m.vertices - [1.0, -2.0, 0.5], axis=1)
    np.testing.assert_allclose(r, 2.5)


def test_rbc_shape():
    m = M.make_rbc(3)
    assert M.check_closed(m)
    assert M.check_outward(m)
    rho = np.linalg.norm(m.vertices[:, :2], axis=1)
    assert np.isclose(rho.max(), M.RBC_SCALE, rtol=1e-6)
    # biconcave: thinner at the axis than at the rim
    axis_thickness = np.abs(m.vertices[rho < 0.5, 2]).max()
    max_thickness = np.abs(m.vertices[:, 2]).max()
    assert axis_thickness < max_thickness


def test_scene_determinism_and_separation(tmp_path):
    a = M.make_scene(4, level=1, seed=3)
    b = M.make_scene(4, level=1, seed=3)
    pa, pb = tmp_path / "a.msh", tmp_path / "b.msh"
    M.write_mesh(pa, a)
    M.write_mesh(pb, b)
    assert pa.read_bytes() == pb.read_bytes()
    c = M.make_scene(4, level=1, seed=4)
    assert not np.array_equal(a.vertices, c.vertices)
    # bodies separated: per-body vertex clouds do not overlap
    nv = len(a.vertices) // 4
    centers = a.vertices.reshape(4, nv, 3).mean(axis=1)
    d = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
    d[np.diag_indices(4)] = np.inf
    assert d.min() > 2.0


def test_mesh_roundtrip(tmp_path):
    m = M.make_rbc(2)
    m.tags[:5] = 7
    path = tmp_path / "m.msh"
    M.write_mesh(path, m)
    back = M.read_mesh(path)
    np.testing.assert_array_equal(back.triangles, m.triangles)
    np.testing.assert_array_equal(back.tags, m.tags)
    np.testing.assert_allclose(back.vertices, m.vertices, rtol=0, atol=0)


def test_mesh_file_format(tmp_path):
    m = M.make_sphere(0)
    path = tmp_path / "m.msh"
    M.write_mesh(path, m)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["6", "8"]
    assert len(lines) == 1 + 6 + 8
    assert len(lines[1].split()) == 3            # x y z
    assert len(lines[7].split()) == 4            # i j k tag
    assert lines[7].split()[3] == "0"


def test_tagless_file_still_reads(tmp_path):
    path = tmp_path / "legacy.msh"
    path.write_text("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n")
    m = M.read_mesh(path)
    assert m.n_panels == 1
    np.testing.assert_array_equal(m.tags, [0])


def test_invalid_mesh_rejected():
    with pytest.raises(ValueError):
        M.Mesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))
    with pytest.raises(ValueError):
        M.Mesh(np.zeros((3, 3)), np.array([[0, 1, 2]]), tags=[1, 2])


def test_open_surface_detected():
    m = M.make_sphere(1)
    open_mesh = M.Mesh(m.vertices, m.triangles[:-1])
    assert not M.check_closed(open_mesh)
    flipped = M.Mesh(m.vertices, m.triangles[:, ::-1])
    assert not M.check_outward(flipped)
