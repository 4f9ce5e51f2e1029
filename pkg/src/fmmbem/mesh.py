"""Triangulated closed surfaces: generators, file I/O and validity checks.

Meshes are flat-panel triangulations with outward vertex ordering
(right-hand rule).  Sphere meshes start from a regular octahedron whose
edge midpoints are repeatedly projected back to the sphere, giving
8 * 4^level congruent-quality panels.  A biconcave-disc (red blood cell)
shape is obtained by remapping the sphere points.
"""

import io
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

from .quadrature import panel_geometry


@dataclass
class Mesh:
    """Vertices (V, 3) and triangles (P, 3) indexing them, outward oriented.

    tags carries one integer boundary-condition id per panel (0 by default).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    tags: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.intp)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (V, 3)")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise ValueError("triangles must be (P, 3)")
        if self.triangles.min(initial=0) < 0 or self.triangles.max(initial=-1) >= len(self.vertices):
            raise ValueError("triangle indices out of range")
        if self.tags is None:
            self.tags = np.zeros(len(self.triangles), dtype=np.intp)
        else:
            self.tags = np.asarray(self.tags, dtype=np.intp)
            if self.tags.shape != (len(self.triangles),):
                raise ValueError("tags must have one entry per triangle")

    @property
    def n_panels(self):
        return len(self.triangles)

    @property
    def panel_vertices(self):
        return self.vertices[self.triangles]

    def geometry(self):
        """(centroids, outward normals, areas) of all panels."""
        return panel_geometry(self.panel_vertices)

    @property
    def area(self):
        return float(self.geometry()[2].sum())

    @property
    def volume(self):
        """Signed enclosed volume; positive for outward orientation."""
        v = self.panel_vertices
        return float(np.einsum("pi,pi->p", v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    def translated(self, offset):
        return Mesh(self.vertices + np.asarray(offset, dtype=float), self.triangles, self.tags)

    def rotated(self, rotation):
        return Mesh(rotation.apply(self.vertices), self.triangles, self.tags)


_OCTA_VERTS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]],
    dtype=float,
)
# outward-ordered faces of the regular octahedron
_OCTA_FACES = np.array(
    [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
     [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
)


def _subdivide(vertices, triangles):
    """Split every triangle in four via deduplicated edge midpoints."""
    verts = list(vertices)
    midpoint = {}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in midpoint:
            verts.append(0.5 * (vertices[a] + vertices[b]))
            midpoint[key] = len(verts) - 1
        return midpoint[key]

    tris = []
    for a, b, c in triangles:
        ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
        tris += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
    return np.asarray(verts), np.asarray(tris)


def make_sphere(level, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Sphere mesh with 8 * 4^level panels by recursive octahedron refinement.

    Midpoints are projected radially after every subdivision so panel quality
    stays uniform.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    verts, tris = _OCTA_VERTS.copy(), _OCTA_FACES.copy()
    for _ in range(level):
        verts, tris = _subdivide(verts, tris)
        verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    verts = verts / np.linalg.norm(verts, axis=1, keepdims=True)
    return Mesh(verts * radius + np.asarray(center, dtype=float), tris)


RBC_SCALE = 3.91
RBC_SHAPE = (0.81, 7.83, -4.39)


def rbc_transform(points, scale=RBC_SCALE, shape=RBC_SHAPE):
    """Map unit-sphere points to a biconcave disc of diameter 2 * scale.

    With s = rho / scale the height profile is
    z = sign(z0) * 0.5 * sqrt(1 - s^2) * (C0 + C2 s^2 + C4 s^4),
    applied to sphere points scaled so their equatorial radius is `scale`.
    """
    pts = np.asarray(points, dtype=float) * scale
    c0, c2, c4 = shape
    s2 = (pts[:, 0] ** 2 + pts[:, 1] ** 2) / scale ** 2
    s2 = np.clip(s2, 0.0, 1.0)
    height = 0.5 * np.sqrt(1.0 - s2) * (c0 + c2 * s2 + c4 * s2 ** 2)
    out = pts.copy()
    out[:, 2] = np.sign(pts[:, 2]) * height
    return out


def make_rbc(level, scale=RBC_SCALE, shape=RBC_SHAPE):
    """Biconcave-disc mesh obtained by remapping an octahedral sphere mesh."""
    sphere = make_sphere(level)
    return Mesh(rbc_transform(sphere.vertices, scale, shape), sphere.triangles)


def make_scene(n_bodies, level, radius=1.0, spacing_margin=0.05, seed=0):
    """Several randomly oriented spheres packed without overlap.

    Bodies are placed on a jittered cubic grid whose pitch guarantees at
    least ``spacing_margin`` relative clearance between bounding spheres.
    Returns a single merged mesh.
    """
    if n_bodies < 1:
        raise ValueError("n_bodies must be >= 1")
    rng = np.random.default_rng(seed)
    side = int(np.ceil(n_bodies ** (1.0 / 3.0)))
    pitch = 2.0 * radius * (1.0 + spacing_margin) * 1.2
    cells = [(i, j, k) for i in range(side) for j in range(side) for k in range(side)]
    centers = np.asarray(cells[:n_bodies], dtype=float) * pitch
    centers += rng.uniform(-0.08, 0.08, size=centers.shape) * radius
    base = make_sphere(level, radius=radius)
    verts, tris = [], []
    offset = 0
    for c in centers:
        rot = Rotation.random(rng=rng)
        body = base.rotated(rot).translated(c)
        verts.append(body.vertices)
        tris.append(body.triangles + offset)
        offset += len(body.vertices)
    return Mesh(np.vstack(verts), np.vstack(tris))


def write_mesh(path, mesh):
    """Plain-text format: 'nv np' header, nv vertex lines, np 'i j k tag' lines."""
    buf = io.StringIO()
    buf.write(f"{len(mesh.vertices)} {mesh.n_panels}\n")
    for v in mesh.vertices:
        buf.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
    for t, tag in zip(mesh.triangles, mesh.tags):
        buf.write(f"{t[0]} {t[1]} {t[2]} {tag}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_mesh(path):
    with open(path) as fh:
        nv, npan = map(int, fh.readline().split())
        verts = np.loadtxt(fh, max_rows=nv, ndmin=2)
        tris = np.loadtxt(fh, dtype=np.intp, max_rows=npan, ndmin=2)
    if verts.shape != (nv, 3):
        raise ValueError("mesh file does not match its header counts")
    if tris.shape == (npan, 3):
        tags = None
    elif tris.shape == (npan, 4):
        tris, tags = tris[:, :3], tris[:, 3]
    else:
        raise ValueError("mesh file does not match its header counts")
    return Mesh(verts, tris, tags)


def check_closed(mesh):
    """True when every edge is shared by exactly two triangles, once per direction."""
    edges = {}
    for a, b, c in mesh.triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            edges[(u, v)] = edges.get((u, v), 0) + 1
    if any(n != 1 for n in edges.values()):
        return False
    return all((v, u) in edges for u, v in edges)


def check_outward(mesh):
    """True when the orientation yields positive enclosed volume."""
    return mesh.volume > 0.0
