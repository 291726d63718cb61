"""Polynomial bases on physical triangles and edges.

Scalar bases are centered, size-scaled monomials: on an element with
centroid c and diameter h the functions are ((x-c)/h)^a ((y-c)/h)^b for
a + b <= m; on an edge with parameter t in [0, 1] they are (t - 1/2)^i.

The velocity element is the full vector P1 space with the six face-moment
degrees of freedom: for each edge F of the triangle and each q in P1(F),
v -> integral over F of (v . n_F) q.  The moments are taken against the
globally fixed normal and parameterization of each face, so coefficients
shared by two elements produce a continuous normal trace (H(div)
conformity).  Basis functions are built per element as the dual basis of
these functionals.
"""

from __future__ import annotations

import numpy as np

from .quadrature import edge_rule, map_to_faces, triangle_rule


def scalar_exponents(degree):
    """Monomial exponent pairs for P^degree, graded order."""
    return [(a - b, b) for a in range(degree + 1) for b in range(a + 1)]


def scalar_dimension(degree):
    return (degree + 1) * (degree + 2) // 2


class TriangleScalarBasis:
    """All P^m basis functions on the physical elements of a mesh."""

    def __init__(self, mesh, degree):
        self.mesh = mesh
        self.degree = degree
        self.exponents = scalar_exponents(degree)
        self.centers = mesh.centroids()
        self.scales = mesh.h_elem

    @property
    def dim(self):
        return len(self.exponents)

    def _local(self, elems, points):
        c = self.centers[elems]
        h = self.scales[elems]
        return (points - c[:, None, :]) / h[:, None, None]

    def eval(self, elems, points):
        """Values, shape (ne, nq, dim); points are physical (ne, nq, 2)."""
        loc = self._local(elems, points)
        out = np.empty(points.shape[:2] + (self.dim,))
        for k, (a, b) in enumerate(self.exponents):
            out[..., k] = loc[..., 0] ** a * loc[..., 1] ** b
        return out

    def grad(self, elems, points):
        """Gradients, shape (ne, nq, dim, 2)."""
        loc = self._local(elems, points)
        h = self.scales[elems]
        out = np.zeros(points.shape[:2] + (self.dim, 2))
        for k, (a, b) in enumerate(self.exponents):
            if a > 0:
                out[..., k, 0] = a * loc[..., 0] ** (a - 1) * loc[..., 1] ** b
            if b > 0:
                out[..., k, 1] = b * loc[..., 0] ** a * loc[..., 1] ** (b - 1)
        return out / h[:, None, None, None]


class EdgeScalarBasis:
    """P^m basis on faces, in the face parameter t in [0, 1]."""

    def __init__(self, degree):
        self.degree = degree

    @property
    def dim(self):
        return self.degree + 1

    def eval(self, t):
        t = np.asarray(t)
        return np.stack([(t - 0.5) ** i for i in range(self.dim)], axis=-1)


def element_mass_matrices(mesh, basis, quad_order=None):
    """Per-element scalar mass matrices (ne, dim, dim) by exact quadrature."""
    from .quadrature import map_to_elements

    order = quad_order if quad_order is not None else 2 * basis.degree
    rule = triangle_rule(order)
    pts, wq = map_to_elements(rule, mesh.element_coords())
    vals = basis.eval(np.arange(mesh.n_elements), pts)
    return np.einsum("eq,eqi,eqj->eij", wq, vals, vals)


def l2_project_elements(mesh, basis, fn, quad_order=6):
    """Coefficients of the elementwise L2 projection of ``fn`` onto P^m.

    ``fn`` maps physical points (..., 2) to values (...,); returns
    coefficients (ne, dim).
    """
    from .quadrature import map_to_elements

    rule = triangle_rule(max(quad_order, 2 * basis.degree))
    pts, wq = map_to_elements(rule, mesh.element_coords())
    vals = basis.eval(np.arange(mesh.n_elements), pts)
    mass = np.einsum("eq,eqi,eqj->eij", wq, vals, vals)
    rhs = np.einsum("eq,eqi,eq->ei", wq, vals, fn(pts))
    return np.linalg.solve(mass, rhs[..., None])[..., 0]


def l2_project_faces(mesh, degree, fn, faces=None, quad_order=6):
    """Per-face L2 projection onto P^degree in the face parameter.

    Returns coefficients (nf, degree+1) in the :class:`EdgeScalarBasis`.
    """
    faces = np.arange(mesh.n_faces) if faces is None else np.asarray(faces)
    basis = EdgeScalarBasis(degree)
    rule = edge_rule(max(quad_order, 2 * degree))
    coords = mesh.face_coords(faces)
    pts, wq = map_to_faces(rule, coords)
    t = rule.points[:, 0]
    qv = basis.eval(t)  # (nq, dim)
    mass = np.einsum("fq,qi,qj->fij", wq, qv, qv)
    rhs = np.einsum("fq,qi,fq->fi", wq, qv, fn(pts))
    return np.linalg.solve(mass, rhs[..., None])[..., 0]


class BDMBasis:
    """Vector P1 basis per element, dual to the face normal moments.

    Attributes
    ----------
    coeffs : (ne, 2, 3, 6) array
        ``coeffs[e, c, i, k]`` is the weight of monomial ((x-c)/h)-power i
        in component c of local basis function k.  Local DOF k = 2*loc + s
        pairs local face slot ``loc`` with moment ``s``.
    div : (ne, 6) constant divergence of each basis function.
    grads : (ne, 6, 2, 2) constant gradients, ``grads[e,k,c,b]`` is
        d(phi_k)_c / d x_b.
    """

    n_dofs = 6

    def __init__(self, mesh, moment_quad_order=5):
        self.mesh = mesh
        self.scalar = TriangleScalarBasis(mesh, 1)
        self.edge_basis = EdgeScalarBasis(1)

        ne = mesh.n_elements
        rule = edge_rule(max(moment_quad_order, 5))
        t = rule.points[:, 0]
        qv = self.edge_basis.eval(t)  # (nq, 2)

        # DOF matrix D[e, 2*loc+s, j]: moment s on local face loc applied to
        # monomial j = c*3 + i.
        dof = np.empty((ne, 6, 6))
        elems = np.arange(ne)
        for loc in range(3):
            f = mesh.element_faces[:, loc]
            coords = mesh.face_coords(f)
            pts, wq = map_to_faces(rule, coords)
            mono = self.scalar.eval(elems, pts)  # (ne, nq, 3)
            normals = mesh.face_normals[f]  # (ne, 2)
            # (e_c * psi_i) . n = n_c psi_i
            mn = normals[:, :, None, None] * mono.transpose(0, 2, 1)[:, None, :, :]
            # mn[e, c, i, q]; integrate against q_s
            mom = np.einsum("eq,qs,eciq->esci", wq, qv, mn)
            dof[:, 2 * loc:2 * loc + 2, :] = mom.reshape(ne, 2, 6)

        self.dof_matrix = dof
        cof = np.linalg.solve(dof, np.broadcast_to(np.eye(6), (ne, 6, 6)))
        self.coeffs = cof.reshape(ne, 2, 3, 6)

        h = mesh.h_elem
        self.grads = np.zeros((ne, 6, 2, 2))
        self.grads[:, :, :, 0] = self.coeffs[:, :, 1, :].transpose(0, 2, 1) / h[:, None, None]
        self.grads[:, :, :, 1] = self.coeffs[:, :, 2, :].transpose(0, 2, 1) / h[:, None, None]
        self.div = self.grads[:, :, 0, 0] + self.grads[:, :, 1, 1]

    def eval(self, elems, points):
        """Basis values (ne, nq, 6, 2) at physical points (ne, nq, 2)."""
        mono = self.scalar.eval(elems, points)
        return np.einsum("eqi,ecik->eqkc", mono, self.coeffs[elems])
