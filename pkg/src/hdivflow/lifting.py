"""Face-jump liftings and the lifted (consistent) discrete gradient.

The local lifting of vector data w on a face F is the broken P1 tensor
field r_F(w), supported on the elements touching F, defined by

    integral_Omega r_F(w) : tau  =  integral_F w . ({tau} n_F)

for every broken P1 tensor tau, where {tau} is the two-sided average on
interior faces and the trace itself on boundary faces.  Summing the
liftings of the jumps of a field over the faces gives the global lifting
R_h; the discrete gradient is the broken gradient minus R_h.

Everything is materialized once per mesh as sparse operators acting on
velocity coefficient vectors:

    jump_op, avg_op : face-point traces, rows indexed by (face, point,
                      component)
    gradient_op     : velocity DOFs -> broken P1 tensor coefficients,
                      rows indexed by (element, row, col, monomial)

so that assembling the viscous form reduces to weighted products of these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis import TriangleScalarBasis, element_mass_matrices
from .quadrature import edge_rule, map_to_elements, map_to_faces, triangle_rule


@dataclass
class BrokenTensorField:
    """Per-element P1 tensor coefficients, shape (ne, 2, 2, 3)."""

    mesh: object
    coeffs: np.ndarray

    def values(self, psi):
        """Tensor values given scalar basis values psi (ne, nq, 3)."""
        return np.einsum("eabi,eqi->eqab", self.coeffs, psi)

    def __add__(self, other):
        return BrokenTensorField(self.mesh, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return BrokenTensorField(self.mesh, self.coeffs - other.coeffs)


class LiftingOperators:
    """Precomputed trace, lifting and discrete-gradient operators.

    ``face_mask`` selects the faces whose liftings (and trace penalties)
    participate in the viscous term; by default every face does.  Faces
    excluded here (e.g. natural outflow) contribute neither to R_h nor to
    the boundary penalty.
    """

    def __init__(self, space, quad_order=6, face_mask=None):
        mesh = space.mesh
        self.space = space
        self.mesh = mesh
        self.quad_order = quad_order
        nf, ne = mesh.n_faces, mesh.n_elements

        if face_mask is None:
            face_mask = np.ones(nf, dtype=bool)
        self.face_mask = np.asarray(face_mask, dtype=bool)

        self.scalar = TriangleScalarBasis(mesh, 1)
        rule = triangle_rule(quad_order)
        self.elem_points, self.elem_weights = map_to_elements(
            rule, mesh.element_coords()
        )
        elems = np.arange(ne)
        self.psi = self.scalar.eval(elems, self.elem_points)  # (ne, nq, 3)
        self.scalar_mass = element_mass_matrices(mesh, self.scalar)
        self.scalar_mass_inv = np.linalg.inv(self.scalar_mass)

        ftab = space.face_tables(quad_order)
        self.face_points = ftab["points"]
        self.face_weights = ftab["weights"]
        self.interior = ftab["interior"]
        nqf = self.face_points.shape[1]
        self.nqf = nqf

        e0 = mesh.face_elements[:, 0]
        e1 = np.where(self.interior, mesh.face_elements[:, 1], 0)
        self.psi_trace = np.zeros((nf, 2, nqf, 3))
        self.psi_trace[:, 0] = self.scalar.eval(e0, self.face_points)
        tr1 = self.scalar.eval(e1, self.face_points)
        self.psi_trace[self.interior, 1] = tr1[self.interior]

        # lift_mats[f, side, i, p]: P1 coefficients on the side element from
        # weighted face-point samples; includes the 1/2 averaging factor.
        factor = np.where(self.interior, 0.5, 1.0)
        minv = np.zeros((nf, 2, 3, 3))
        minv[:, 0] = self.scalar_mass_inv[e0]
        minv[self.interior, 1] = self.scalar_mass_inv[e1[self.interior]]
        rhs = self.psi_trace * self.face_weights[:, None, :, None]
        self.lift_mats = factor[:, None, None, None] * np.einsum(
            "fsij,fspj->fsip", minv, rhs.transpose(0, 1, 2, 3)
        )

        self._build_trace_ops(ftab)
        self._build_gradient_op(ftab)

    # -- sparse operator construction -------------------------------------

    def _build_trace_ops(self, ftab):
        mesh, space = self.mesh, self.space
        nf, nqf = mesh.n_faces, self.nqf
        nrows = nf * nqf * 2
        e0 = mesh.face_elements[:, 0]
        e1 = np.where(self.interior, mesh.face_elements[:, 1], 0)
        dofs = np.stack([space.element_dofs[e0], space.element_dofs[e1]], axis=1)

        rows_base = (
            np.arange(nf)[:, None, None] * (nqf * 2)
            + np.arange(nqf)[None, :, None] * 2
            + np.arange(2)[None, None, :]
        )  # (nf, nq, c)

        def assemble(sign1, w1_interior_only=False):
            data, rows, cols = [], [], []
            tr = (ftab["trace0"], ftab["trace1"])
            signs = (1.0, sign1)
            for side in range(2):
                vals = tr[side] * signs[side]  # (nf, nq, k, c)
                if side == 1:
                    vals = vals * self.interior[:, None, None, None]
                r = np.broadcast_to(rows_base[:, :, None, :], vals.shape)
                c = np.broadcast_to(
                    dofs[:, side][:, None, :, None], vals.shape
                )
                rows.append(r.ravel())
                cols.append(c.ravel())
                data.append(vals.ravel())
            mat = sp.coo_matrix(
                (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                shape=(nrows, space.n_dofs),
            )
            return mat.tocsr()

        self.jump_op = assemble(-1.0)
        # On boundary faces both jump and average equal the single trace.
        avg = assemble(1.0)
        half = np.where(self.interior, 0.5, 1.0)
        scale = np.repeat(half, nqf * 2)
        self.avg_op = sp.diags(scale) @ avg

    def _build_gradient_op(self, ftab):
        mesh, space = self.mesh, self.space
        ne, nf, nqf = mesh.n_elements, mesh.n_faces, self.nqf
        nrows = ne * 12

        # Broken gradient: constant tensors, only the monomial-0 coefficient.
        grads = space.basis.grads  # (ne, k, a, b)
        rows = (
            np.arange(ne)[:, None, None, None] * 12
            + np.arange(2)[None, None, :, None] * 6
            + np.arange(2)[None, None, None, :] * 3
        )  # (ne, 1, a, b) -> row of monomial 0
        rows = np.broadcast_to(rows, (ne, 6, 2, 2))
        cols = np.broadcast_to(space.element_dofs[:, :, None, None], rows.shape)
        vals = grads.transpose(0, 1, 2, 3)
        self.grad_op = sp.coo_matrix(
            (vals.ravel(), (rows.ravel(), cols.ravel())),
            shape=(nrows, space.n_dofs),
        ).tocsr()

        # Lifting of the jump: for each masked face, each support side s and
        # each data side d, the block  n_b * L[f,s,i,p] * (+/-) trace_d[f,p,k,a].
        e0 = mesh.face_elements[:, 0]
        e1 = np.where(self.interior, mesh.face_elements[:, 1], 0)
        supp = np.stack([e0, e1], axis=1)  # (nf, 2)
        dofs = np.stack(
            [space.element_dofs[e0], space.element_dofs[e1]], axis=1
        )  # (nf, 2, 6)
        traces = np.stack([ftab["trace0"], ftab["trace1"]], axis=1)  # (nf,2,q,k,c)
        normals = mesh.face_normals

        data, rows_l, cols_l = [], [], []
        for s in range(2):
            for d in range(2):
                sign = 1.0 if d == 0 else -1.0
                active = self.face_mask.copy()
                if s == 1 or d == 1:
                    active &= self.interior
                if not active.any():
                    continue
                f = np.nonzero(active)[0]
                # block[f, a, b, i, k]
                block = sign * np.einsum(
                    "fip,fpka,fb->fabik",
                    self.lift_mats[f, s],
                    traces[f, d],
                    normals[f],
                )
                e = supp[f, s]
                r = (
                    e[:, None, None, None, None] * 12
                    + np.arange(2)[None, :, None, None, None] * 6
                    + np.arange(2)[None, None, :, None, None] * 3
                    + np.arange(3)[None, None, None, :, None]
                )
                r = np.broadcast_to(r, block.shape)
                c = np.broadcast_to(
                    dofs[f, d][:, None, None, None, :], block.shape
                )
                data.append(block.ravel())
                rows_l.append(r.ravel())
                cols_l.append(c.ravel())

        self.lift_op = sp.coo_matrix(
            (np.concatenate(data), (np.concatenate(rows_l), np.concatenate(cols_l))),
            shape=(nrows, space.n_dofs),
        ).tocsr()
        self.gradient_op = (self.grad_op - self.lift_op).tocsr()

    # -- high-level operations ---------------------------------------------

    def lift_face(self, face, w_values):
        """Lifting of face data sampled at the face quadrature points.

        ``w_values``: (nq, 2) samples of w.  Returns the broken tensor field
        supported on the elements touching the face.
        """
        mesh = self.mesh
        coeffs = np.zeros((mesh.n_elements, 2, 2, 3))
        n = mesh.face_normals[face]
        sides = 2 if self.interior[face] else 1
        for s in range(sides):
            e = mesh.face_elements[face, s]
            q = np.einsum("ip,pa->ai", self.lift_mats[face, s], w_values)
            coeffs[e] += q[:, None, :] * n[None, :, None]
        return BrokenTensorField(mesh, coeffs)

    def jump_values(self, u):
        """Jumps of a velocity field at all face points, shape (nf, nq, 2)."""
        nf = self.mesh.n_faces
        return (self.jump_op @ u.coeffs).reshape(nf, self.nqf, 2)

    def average_values(self, u):
        nf = self.mesh.n_faces
        return (self.avg_op @ u.coeffs).reshape(nf, self.nqf, 2)

    def global_lifting(self, u):
        """R_h u as a broken tensor field (sum of masked face liftings)."""
        ne = self.mesh.n_elements
        coeffs = (self.lift_op @ u.coeffs).reshape(ne, 2, 2, 3)
        return BrokenTensorField(self.mesh, coeffs)

    def discrete_gradient(self, u):
        """G_h u = broken gradient minus the jump lifting."""
        ne = self.mesh.n_elements
        coeffs = (self.gradient_op @ u.coeffs).reshape(ne, 2, 2, 3)
        return BrokenTensorField(self.mesh, coeffs)

    def tensor_l2_norm_sq(self, field):
        """Squared L2 norm of a broken tensor field."""
        return float(
            np.einsum(
                "eabi,eij,eabj->", field.coeffs, self.scalar_mass, field.coeffs
            )
        )
