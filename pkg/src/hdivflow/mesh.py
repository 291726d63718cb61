"""Conforming 2D simplicial meshes with the face topology the scheme needs.

A mesh stores, besides vertices and triangles, one record per face (edge):
a globally fixed unit normal, the one or two incident elements ordered so
the normal points out of the first, and per-element face lists with
orientation signs.  All arrays are immutable after construction.

Face normal convention: for interior faces the normal points from the
lower-index element to the higher-index one; boundary normals point out of
the domain.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh topology or geometry (hanging vertices, inverted cells...)."""


@dataclass(frozen=True)
class SimplicialMesh:
    """Conforming triangulation of a polygonal domain.

    vertices            (nv, 2) coordinates
    elements            (ne, 3) vertex indices, counterclockwise
    faces               (nf, 2) vertex indices; the stored order fixes the
                        face parameterization t in [0, 1] and the normal
    face_normals        (nf, 2) unit normals, out of ``face_elements[f, 0]``
    face_elements       (nf, 2) incident elements, -1 marks the outside
    element_faces       (ne, 3) global face index of local edges
                        (v0,v1), (v1,v2), (v2,v0)
    element_face_signs  (ne, 3) +1 if the face normal is outward for the
                        element, -1 otherwise
    boundary_tags       per-face tag id, -1 for interior faces
    tag_names           tag id -> name
    """

    vertices: np.ndarray
    elements: np.ndarray
    faces: np.ndarray
    face_normals: np.ndarray
    face_elements: np.ndarray
    element_faces: np.ndarray
    element_face_signs: np.ndarray
    boundary_tags: np.ndarray
    tag_names: tuple
    areas: np.ndarray = field(repr=False, default=None)
    h_elem: np.ndarray = field(repr=False, default=None)
    h_face: np.ndarray = field(repr=False, default=None)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def interior_faces(self):
        return np.nonzero(self.face_elements[:, 1] >= 0)[0]

    @property
    def boundary_faces(self):
        return np.nonzero(self.face_elements[:, 1] < 0)[0]

    def element_coords(self, elems=None):
        """Vertex coordinates per element, shape (ne, 3, 2)."""
        idx = self.elements if elems is None else self.elements[elems]
        return self.vertices[idx]

    def face_coords(self, faces=None):
        idx = self.faces if faces is None else self.faces[faces]
        return self.vertices[idx]

    def element_patch(self, elem):
        """Elements sharing at least one face with ``elem`` (itself included)."""
        neigh = {elem}
        for f in self.element_faces[elem]:
            for e in self.face_elements[f]:
                if e >= 0:
                    neigh.add(int(e))
        return sorted(neigh)

    def face_patch(self, face):
        """The one or two elements incident to ``face``."""
        return [int(e) for e in self.face_elements[face] if e >= 0]

    def faces_with_tag(self, name):
        if name not in self.tag_names:
            raise MeshError(f"unknown boundary tag {name!r}; have {self.tag_names}")
        tid = self.tag_names.index(name)
        return np.nonzero(self.boundary_tags == tid)[0]

    def centroids(self):
        return self.element_coords().mean(axis=1)


def _triangle_geometry(vertices, elements):
    coords = vertices[elements]
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    edge_len = np.stack(
        [
            np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1),
            np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1),
            np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1),
        ],
        axis=1,
    )
    return areas, edge_len.max(axis=1), edge_len


def _assemble_topology(vertices, elements, tag_names=(), tagged_faces=None):
    """Derive faces, normals, adjacency and diameters; validate conformity."""
    vertices = np.asarray(vertices, dtype=float)
    elements = np.asarray(elements, dtype=np.int64)
    if elements.ndim != 2 or elements.shape[1] != 3:
        raise MeshError("elements must be triples of vertex indices")
    if elements.min(initial=0) < 0 or elements.max(initial=-1) >= len(vertices):
        raise MeshError("element refers to a vertex that does not exist")

    seen = set()
    for e, tri in enumerate(elements):
        if len(set(tri)) != 3:
            raise MeshError(f"element {e} repeats a vertex: {tri.tolist()}")
        key = tuple(sorted(tri.tolist()))
        if key in seen:
            raise MeshError(f"duplicate element {tri.tolist()}")
        seen.add(key)

    areas, h_elem, _ = _triangle_geometry(vertices, elements)
    flipped = areas < 0
    if flipped.any():  # normalize to counterclockwise
        elements = elements.copy()
        elements[flipped] = elements[flipped][:, [0, 2, 1]]
        areas, h_elem, _ = _triangle_geometry(vertices, elements)
    if (areas <= 1e-14).any():
        bad = int(np.argmin(areas))
        raise MeshError(f"element {bad} has non-positive area {areas[bad]:.3e}")

    face_index = {}
    faces = []
    face_elements = []
    element_faces = np.empty((len(elements), 3), dtype=np.int64)
    local_edges = [(0, 1), (1, 2), (2, 0)]
    for e, tri in enumerate(elements):
        for loc, (a, b) in enumerate(local_edges):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            f = face_index.get(key)
            if f is None:
                f = len(faces)
                face_index[key] = f
                faces.append((tri[a], tri[b]))
                face_elements.append([e, -1])
            else:
                if face_elements[f][1] >= 0:
                    raise MeshError(
                        f"face {key} shared by more than two elements (non-conforming)"
                    )
                face_elements[f][1] = e
            element_faces[e, loc] = f

    faces = np.asarray(faces, dtype=np.int64)
    face_elements = np.asarray(face_elements, dtype=np.int64)

    # Orient: first incident element is the lower index; normal exits it.
    swap = (face_elements[:, 1] >= 0) & (face_elements[:, 0] > face_elements[:, 1])
    face_elements[swap] = face_elements[swap][:, ::-1]

    tangents = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    h_face = np.linalg.norm(tangents, axis=1)
    if (h_face <= 1e-14).any():
        raise MeshError("degenerate (zero-length) face")
    normals = np.stack([tangents[:, 1], -tangents[:, 0]], axis=1) / h_face[:, None]

    # The normal must exit face_elements[:, 0]; flip the stored vertex order
    # (and thus the normal and the t parameterization) where it does not.
    first = face_elements[:, 0]
    to_mid = 0.5 * (vertices[faces[:, 0]] + vertices[faces[:, 1]]) - vertices[
        elements[first]
    ].mean(axis=1)
    wrong = (normals * to_mid).sum(axis=1) < 0
    faces[wrong] = faces[wrong][:, ::-1]
    normals[wrong] *= -1.0

    signs = np.empty((len(elements), 3), dtype=np.int64)
    for loc in range(3):
        f = element_faces[:, loc]
        signs[:, loc] = np.where(face_elements[f, 0] == np.arange(len(elements)), 1, -1)

    boundary_tags = np.full(len(faces), -1, dtype=np.int64)
    names = list(tag_names)
    if tagged_faces:
        for name, face_ids in tagged_faces.items():
            if name not in names:
                names.append(name)
            tid = names.index(name)
            for f in face_ids:
                if face_elements[f, 1] >= 0:
                    raise MeshError(f"cannot tag interior face {f} as {name!r}")
                boundary_tags[f] = tid

    return SimplicialMesh(
        vertices=vertices,
        elements=elements,
        faces=faces,
        face_normals=normals,
        face_elements=face_elements,
        element_faces=element_faces,
        element_face_signs=signs,
        boundary_tags=boundary_tags,
        tag_names=tuple(names),
        areas=areas,
        h_elem=h_elem,
        h_face=h_face,
    )


def tag_boundary(mesh, predicates, default="wall"):
    """Assign boundary tags from midpoint predicates.

    ``predicates`` is a list of (name, fn) pairs tried in order; ``fn`` takes
    the face midpoint (x, y).  Faces matching nothing get ``default``.
    """
    mids = 0.5 * (
        mesh.vertices[mesh.faces[:, 0]] + mesh.vertices[mesh.faces[:, 1]]
    )
    names = [default] + [n for n, _ in predicates if n != default]
    tags = mesh.boundary_tags.copy()
    for f in mesh.boundary_faces:
        tags[f] = 0
        for name, fn in predicates:
            if fn(mids[f]):
                tags[f] = names.index(name)
                break
    return SimplicialMesh(
        vertices=mesh.vertices,
        elements=mesh.elements,
        faces=mesh.faces,
        face_normals=mesh.face_normals,
        face_elements=mesh.face_elements,
        element_faces=mesh.element_faces,
        element_face_signs=mesh.element_face_signs,
        boundary_tags=tags,
        tag_names=tuple(names),
        areas=mesh.areas,
        h_elem=mesh.h_elem,
        h_face=mesh.h_face,
    )


def build_structured_mesh(n, domain=(0.0, 1.0, 0.0, 1.0), jitter=0.0, seed=0):
    """Diagonal triangulation of a rectangle, n x n cells split in two.

    ``jitter`` moves interior vertices by a uniform perturbation of up to
    ``jitter * cell size`` in each direction, emulating an unstructured mesh
    while preserving conformity.  Inverted triangles are rejected.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")
    x0, x1, y0, y1 = domain
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    vertices = np.column_stack([xx.ravel(), yy.ravel()])

    if jitter > 0.0:
        rng = np.random.default_rng(seed)
        hx, hy = (x1 - x0) / n, (y1 - y0) / n
        interior = np.ones(len(vertices), dtype=bool)
        ij = np.stack(np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij"), -1)
        ij = ij.reshape(-1, 2)
        interior &= (ij[:, 0] > 0) & (ij[:, 0] < n) & (ij[:, 1] > 0) & (ij[:, 1] < n)
        shift = rng.uniform(-jitter, jitter, size=(len(vertices), 2))
        shift[:, 0] *= hx
        shift[:, 1] *= hy
        vertices[interior] += shift[interior]

    def vid(i, j):
        return i * (n + 1) + j

    elements = []
    for i in range(n):
        for j in range(n):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    elements = np.asarray(elements, dtype=np.int64)

    areas, _, _ = _triangle_geometry(vertices, elements)
    if (areas <= 1e-14).any():
        raise MeshError(
            f"jitter {jitter} inverted {(areas <= 1e-14).sum()} triangles; reduce it"
        )

    mesh = _assemble_topology(vertices, elements)
    tol = 1e-12 * max(x1 - x0, y1 - y0)
    return tag_boundary(
        mesh,
        [
            ("left", lambda m: abs(m[0] - x0) < 1e-9 + tol),
            ("right", lambda m: abs(m[0] - x1) < 1e-9 + tol),
            ("bottom", lambda m: abs(m[1] - y0) < 1e-9 + tol),
            ("top", lambda m: abs(m[1] - y1) < 1e-9 + tol),
        ],
    )


def build_unstructured_mesh(n, domain=(0.0, 1.0, 0.0, 1.0), jitter=0.35,
                            seed=7, grading=0.35):
    """Delaunay triangulation of a graded, jittered lattice.

    Lattice coordinates are warped by a smooth monotone map (element sizes
    vary by roughly 2.5x across the domain for the default grading) and
    interior points then move randomly by up to ``jitter`` cells before
    triangulating.  This emulates generator-produced unstructured meshes:
    the mildly jittered structured family is too regular to show the
    size-variation-driven interpolation jumps that real triangulations
    have.  Boundary points stay on the (warped) grid.
    """
    from scipy.spatial import Delaunay

    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= jitter < 0.5:
        raise ValueError("jitter must lie in [0, 0.5)")
    if not 0.0 <= grading < 0.5:
        raise ValueError("grading must lie in [0, 0.5)")
    x0, x1, y0, y1 = domain
    rng = np.random.default_rng(seed + 1000 * n)

    def warp(s):
        return s + 2.0 * grading * s * (1.0 - s) * (1.0 - 2.0 * s)

    s = warp(np.linspace(0.0, 1.0, n + 1))[:-1]
    bnd = np.concatenate(
        [
            np.stack([s, np.zeros_like(s)], axis=1),
            np.stack([np.ones_like(s), s], axis=1),
            np.stack([1.0 - s, np.ones_like(s)], axis=1),
            np.stack([np.zeros_like(s), 1.0 - s], axis=1),
        ]
    )
    ii, jj = np.meshgrid(np.arange(1, n), np.arange(1, n), indexing="ij")
    interior = np.stack([warp(ii.ravel() / n), warp(jj.ravel() / n)], axis=-1)
    interior = interior + rng.uniform(-jitter, jitter, interior.shape) / n
    interior = np.clip(interior, 1e-3, 1.0 - 1e-3)
    unit = np.vstack([bnd, interior])
    pts = np.column_stack(
        [x0 + (x1 - x0) * unit[:, 0], y0 + (y1 - y0) * unit[:, 1]]
    )
    mesh = _assemble_topology(pts, Delaunay(pts).simplices)
    tol = 1e-9
    return tag_boundary(
        mesh,
        [
            ("left", lambda m: abs(m[0] - x0) < tol),
            ("right", lambda m: abs(m[0] - x1) < tol),
            ("bottom", lambda m: abs(m[1] - y0) < tol),
            ("top", lambda m: abs(m[1] - y1) < tol),
        ],
    )


def build_channel_mesh(nx, ny, length=3.0, height=1.0, bump_start=1.0,
                       bump_end=2.0, bump_height=0.5):
    """Channel with a circular-arc bump on the bottom wall.

    A structured grid on the rectangle is sheared vertically so the bottom
    boundary follows the arc; the triangulation stays conforming.  Boundary
    tags: ``inlet`` (x=0), ``outlet`` (x=length), ``wall`` elsewhere.
    """
    if not 0.0 < bump_start < bump_end < length:
        raise ValueError("bump must lie strictly inside the channel")
    if not 0.0 < bump_height < height:
        raise ValueError("bump height must lie in (0, channel height)")

    half = 0.5 * (bump_end - bump_start)
    xc = 0.5 * (bump_start + bump_end)
    radius = (half**2 + bump_height**2) / (2.0 * bump_height)

    def profile(x):
        inside = (x > bump_start) & (x < bump_end)
        b = np.zeros_like(x)
        arc = radius**2 - (x[inside] - xc) ** 2
        b[inside] = np.sqrt(np.maximum(arc, 0.0)) + bump_height - radius
        return np.maximum(b, 0.0)

    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, 1.0, ny + 1)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    bottom = profile(xx)
    phys_y = bottom + yy * (height - bottom)
    vertices = np.column_stack([xx.ravel(), phys_y.ravel()])

    def vid(i, j):
        return i * (ny + 1) + j

    elements = []
    for i in range(nx):
        for j in range(ny):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            elements.append((a, b, c))
            elements.append((a, c, d))
    mesh = _assemble_topology(vertices, np.asarray(elements, dtype=np.int64))
    return tag_boundary(
        mesh,
        [
            ("inlet", lambda m: abs(m[0]) < 1e-9),
            ("outlet", lambda m: abs(m[0] - length) < 1e-9),
        ],
        default="wall",
    )


def load_mesh(path_or_buffer):
    """Read the plain-text mesh format.

    Header ``vertices N elements M``, then N coordinate lines ``x y``, then
    M connectivity lines ``i j k`` (0-based), then optionally a ``tags:``
    section with one line per tag: ``<name> i0 j0 i1 j1 ...`` listing the
    vertex pairs of tagged boundary faces.
    """
    if hasattr(path_or_buffer, "read"):
        lines = path_or_buffer.read().splitlines()
    else:
        with open(path_or_buffer) as fh:
            lines = fh.read().splitlines()
    lines = [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise MeshError("empty mesh file")
    header = lines[0].split()
    if len(header) != 4 or header[0] != "vertices" or header[2] != "elements":
        raise MeshError(f"bad header {lines[0]!r}; expected 'vertices N elements M'")
    nv, ne = int(header[1]), int(header[3])
    if len(lines) < 1 + nv + ne:
        raise MeshError("mesh file truncated")

    try:
        vertices = np.array(
            [[float(v) for v in lines[1 + i].split()] for i in range(nv)]
        )
        elements = np.array(
            [[int(v) for v in lines[1 + nv + i].split()] for i in range(ne)],
            dtype=np.int64,
        )
    except ValueError as exc:
        raise MeshError(f"malformed vertex or element line: {exc}") from exc
    if vertices.shape != (nv, 2):
        raise MeshError("vertex lines must contain two coordinates")
    if elements.shape != (ne, 3):
        raise MeshError("element lines must contain three vertex indices")

    tagged = {}
    rest = lines[1 + nv + ne:]
    if rest:
        if rest[0] != "tags:":
            raise MeshError(f"unexpected trailing content {rest[0]!r}")
        pair_index = {}
        for ln in rest[1:]:
            parts = ln.split()
            name, ids = parts[0], [int(v) for v in parts[1:]]
            if len(ids) % 2:
                raise MeshError(f"tag {name!r} has an odd vertex list")
            tagged[name] = [tuple(sorted(ids[i:i + 2])) for i in range(0, len(ids), 2)]

        mesh = _assemble_topology(vertices, elements)
        pair_index = {
            (min(a, b), max(a, b)): f for f, (a, b) in enumerate(mesh.faces)
        }
        resolved = {}
        for name, pairs in tagged.items():
            ids = []
            for pair in pairs:
                if pair not in pair_index:
                    raise MeshError(f"tagged face {pair} does not exist")
                ids.append(pair_index[pair])
            resolved[name] = ids
        return _assemble_topology(vertices, elements, tagged_faces=resolved)

    return _assemble_topology(vertices, elements)


def save_mesh(mesh, path):
    """Write a mesh in the plain-text format understood by :func:`load_mesh`."""
    buf = io.StringIO()
    buf.write(f"vertices {mesh.n_vertices} elements {mesh.n_elements}\n")
    for x, y in mesh.vertices:
        buf.write(f"{x:.17g} {y:.17g}\n")
    for tri in mesh.elements:
        buf.write(f"{tri[0]} {tri[1]} {tri[2]}\n")
    named = [t for t in mesh.tag_names if len(mesh.faces_with_tag(t))]
    if named:
        buf.write("tags:\n")
        for name in named:
            ids = mesh.faces_with_tag(name)
            flat = " ".join(f"{mesh.faces[f, 0]} {mesh.faces[f, 1]}" for f in ids)
            buf.write(f"{name} {flat}\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def mesh_statistics(mesh):
    """h_max, mean diameter, and the shape-regularity max h_T / rho_T."""
    coords = mesh.element_coords()
    perim = (
        np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
        + np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1)
        + np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1)
    )
    inradius = 2.0 * mesh.areas / perim
    return {
        "h_max": float(mesh.h_elem.max()),
        "h_mean": float(mesh.h_elem.mean()),
        "shape_regularity": float((mesh.h_elem / inradius).max()),
    }
