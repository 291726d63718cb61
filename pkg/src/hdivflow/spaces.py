"""Global discrete spaces and fields.

Velocity: the lowest-order H(div)-conforming space of piecewise-linear
vector fields with continuous normal traces, two degrees of freedom per
face (the moments of v . n_F against P1 of the face).  Pressure: piecewise
constants, one DOF per element, with the zero-mean constraint handled at
solve time.

Velocity DOF numbering: dof 2*f + s is moment s on face f.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BDMBasis, EdgeScalarBasis, TriangleScalarBasis
from .quadrature import edge_rule, map_to_elements, map_to_faces, triangle_rule


class EvaluationError(Exception):
    pass


class VelocitySpace:
    """H(div)-conforming vector P1 space on a mesh."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.basis = BDMBasis(mesh)
        self.n_dofs = 2 * mesh.n_faces
        f = mesh.element_faces
        self.element_dofs = np.stack(
            [2 * f[:, 0], 2 * f[:, 0] + 1,
             2 * f[:, 1], 2 * f[:, 1] + 1,
             2 * f[:, 2], 2 * f[:, 2] + 1],
            axis=1,
        )
        self._elem_tables = {}
        self._face_tables = {}

    def face_dofs(self, faces):
        faces = np.atleast_1d(np.asarray(faces))
        return np.stack([2 * faces, 2 * faces + 1], axis=1).ravel()

    def boundary_dofs(self, tags=None):
        """DOFs sitting on boundary faces, optionally restricted to tags."""
        if tags is None:
            faces = self.mesh.boundary_faces
        else:
            faces = np.concatenate(
                [self.mesh.faces_with_tag(t) for t in tags]
            ) if tags else np.array([], dtype=int)
        return self.face_dofs(faces) if len(faces) else np.array([], dtype=int)

    def elem_tables(self, order):
        """Quadrature points/weights and basis values on every element."""
        if order not in self._elem_tables:
            rule = triangle_rule(order)
            pts, wq = map_to_elements(rule, self.mesh.element_coords())
            vals = self.basis.eval(np.arange(self.mesh.n_elements), pts)
            self._elem_tables[order] = {"points": pts, "weights": wq, "basis": vals}
        return self._elem_tables[order]

    def face_tables(self, order):
        """Face quadrature and both one-sided basis traces on every face.

        ``trace{0,1}[f, q, k, c]`` is component c of local basis function k
        of the first/second incident element at face point q; the second
        side is zero on boundary faces.
        """
        if order not in self._face_tables:
            mesh = self.mesh
            rule = edge_rule(order)
            pts, wq = map_to_faces(rule, mesh.face_coords())
            e0 = mesh.face_elements[:, 0]
            e1 = mesh.face_elements[:, 1]
            tr0 = self.basis.eval(e0, pts)
            interior = e1 >= 0
            tr1 = np.zeros_like(tr0)
            tr1[interior] = self.basis.eval(e1[interior], pts[interior])
            self._face_tables[order] = {
                "points": pts,
                "weights": wq,
                "t": rule.points[:, 0],
                "trace0": tr0,
                "trace1": tr1,
                "interior": interior,
            }
        return self._face_tables[order]


class PressureSpace:
    """Piecewise-constant pressures, one DOF per element."""

    def __init__(self, mesh):
        self.mesh = mesh
        self.n_dofs = mesh.n_elements
        self.element_areas = mesh.areas

    def remove_mean(self, coeffs):
        mean = (coeffs * self.element_areas).sum() / self.element_areas.sum()
        return coeffs - mean

    def mean(self, coeffs):
        return (coeffs * self.element_areas).sum() / self.element_areas.sum()


@dataclass
class FEFunction:
    """Coefficient vector over a discrete space."""

    space: object
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.space.n_dofs,):
            raise ValueError(
                f"coefficient vector has length {len(self.coeffs)}, "
                f"space has {self.space.n_dofs} DOFs"
            )

    def copy(self):
        return FEFunction(self.space, self.coeffs.copy())

    def __add__(self, other):
        return FEFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return FEFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return FEFunction(self.space, a * self.coeffs)

    __rmul__ = __mul__


def zero_velocity(space):
    return FEFunction(space, np.zeros(space.n_dofs))


def rt_interpolate(space, fn, quad_order=20):
    """Interpolate a smooth vector field by its face normal moments.

    For divergence-free fields this coincides with the canonical
    H(div) interpolant and the result is pointwise divergence-free.
    ``fn`` maps points (..., 2) to vectors (..., 2).
    """
    mesh = space.mesh
    rule = edge_rule(quad_order)
    pts, wq = map_to_faces(rule, mesh.face_coords())
    vn = (np.asarray(fn(pts)) * mesh.face_normals[:, None, :]).sum(axis=-1)
    qv = EdgeScalarBasis(1).eval(rule.points[:, 0])  # (nq, 2)
    moments = np.einsum("fq,qs->fs", wq * vn, qv)
    return FEFunction(space, moments.ravel())


def stream_function_field(space, vertex_values, midpoint_values):
    """Exactly divergence-free field from a continuous quadratic potential.

    The potential is the C0-P2 function with the given vertex and face
    midpoint values; the returned field is its rotated gradient
    (d/dy, -d/dx), whose face moments have the closed forms used here.
    Zero values on the boundary give zero normal trace.
    """
    mesh = space.mesh
    a = vertex_values[mesh.faces[:, 0]]
    b = vertex_values[mesh.faces[:, 1]]
    m = np.asarray(midpoint_values)
    coeffs = np.empty(space.n_dofs)
    coeffs[0::2] = b - a
    coeffs[1::2] = (a - 2.0 * m + b) / 3.0
    return FEFunction(space, coeffs)


def _check_inside(mesh, elems, points, tol):
    coords = mesh.element_coords(elems)
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    rel = points - coords[:, None, 0, :]
    lam1 = (rel[..., 0] * d2[:, None, 1] - rel[..., 1] * d2[:, None, 0]) / det[:, None]
    lam2 = (d1[:, None, 0] * rel[..., 1] - d1[:, None, 1] * rel[..., 0]) / det[:, None]
    lam0 = 1.0 - lam1 - lam2
    lams = np.stack([lam0, lam1, lam2], axis=-1)
    if (lams < -tol).any():
        raise EvaluationError("point lies outside the requested element")


def evaluate(f, elems, points, gradient=False, divergence=False, tol=1e-10):
    """Pointwise values of a velocity field on given elements.

    ``points`` has shape (ne, nq, 2) with ne matching ``elems``.  Returns
    values (ne, nq, 2) and optionally gradients (ne, nq, 2, 2) and
    divergences (ne, nq); points outside their element raise.
    """
    space = f.space
    if not isinstance(space, VelocitySpace):
        raise TypeError("evaluate expects a velocity field")
    elems = np.atleast_1d(np.asarray(elems))
    points = np.asarray(points, dtype=float)
    _check_inside(space.mesh, elems, points, tol)

    dofs = space.element_dofs[elems]
    basis_vals = space.basis.eval(elems, points)
    vals = np.einsum("eqkc,ek->eqc", basis_vals, f.coeffs[dofs])
    out = [vals]
    if gradient:
        g = np.einsum("ekcb,ek->ecb", space.basis.grads[elems], f.coeffs[dofs])
        out.append(np.broadcast_to(g[:, None], points.shape[:2] + (2, 2)).copy())
    if divergence:
        d = np.einsum("ek,ek->e", space.basis.div[elems], f.coeffs[dofs])
        out.append(np.broadcast_to(d[:, None], points.shape[:2]).copy())
    return out[0] if len(out) == 1 else tuple(out)


def element_divergence(f):
    """The elementwise-constant divergence of a velocity field, shape (ne,)."""
    space = f.space
    return np.einsum("ek,ek->e", space.basis.div, f.coeffs[space.element_dofs])


def element_gradients(f):
    """Constant velocity gradients per element, shape (ne, 2, 2)."""
    space = f.space
    return np.einsum(
        "ekcb,ek->ecb", space.basis.grads, f.coeffs[space.element_dofs]
    )


def face_trace(f, face, quad_order=6):
    """Jump and average of a velocity field at the quadrature points of a face.

    On boundary faces both equal the one-sided trace.  Returns
    (jump, average), each (nq, 2).
    """
    space = f.space
    tab = space.face_tables(quad_order)
    mesh = space.mesh
    e0, e1 = mesh.face_elements[face]
    d0 = space.element_dofs[e0]
    v0 = np.einsum("qkc,k->qc", tab["trace0"][face], f.coeffs[d0])
    if e1 < 0:
        return v0.copy(), v0.copy()
    d1 = space.element_dofs[e1]
    v1 = np.einsum("qkc,k->qc", tab["trace1"][face], f.coeffs[d1])
    return v0 - v1, 0.5 * (v0 + v1)


def l2_norm(f, quad_order=6):
    """L2 norm of a velocity field over the domain."""
    tab = f.space.elem_tables(quad_order)
    vals = np.einsum(
        "eqkc,ek->eqc", tab["basis"], f.coeffs[f.space.element_dofs]
    )
    return float(np.sqrt((tab["weights"] * (vals**2).sum(axis=-1)).sum()))


def locate_points(mesh, points, tol=1e-10):
    """Element index containing each point (brute force, fine at desk scale)."""
    points = np.atleast_2d(points)
    coords = mesh.element_coords()
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    out = np.full(len(points), -1, dtype=int)
    for i, p in enumerate(points):
        rel = p - coords[:, 0]
        lam1 = (rel[:, 0] * d2[:, 1] - rel[:, 1] * d2[:, 0]) / det
        lam2 = (d1[:, 0] * rel[:, 1] - d1[:, 1] * rel[:, 0]) / det
        lam0 = 1.0 - lam1 - lam2
        ok = (lam0 >= -tol) & (lam1 >= -tol) & (lam2 >= -tol)
        hits = np.nonzero(ok)[0]
        if len(hits):
            out[i] = hits[0]
    return out
