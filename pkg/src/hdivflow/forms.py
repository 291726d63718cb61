"""Power-law diffusive flux and the discrete forms of the scheme.

The flux is sigma(A) = nu m(|A|)^(r-2) A with the regularized modulus
m(s) = sqrt(s^2 + eps^2); it applies both to tensors (Frobenius norm) and
to vectors (Euclidean norm).  The viscous form is

    a(w, v) = integral sigma(G w) : G v
              + sum over faces of h_F^(1-r) integral_F sigma([w]) . [v]

with G the lifted discrete gradient, the penalty running over the interior
faces plus the non-natural boundary faces.  The convective form is the
upwind-free split

    c(z, w, v) = integral (z . grad) w . v
                 - sum over interior faces of integral_F (z.n) [w] . {v}

and the jump stabilization j(z; w, v) weighs interior-face jumps by
gamma_F(z) = max(sup_F |z.n|, C_F).

Picard linearization freezes the modulus in sigma (volume and face terms),
the advecting field in c, and the field inside gamma_F; each iterate is
then a linear saddle problem that reduces to the nonlinear forms at the
fixed point, and at r = 2 the viscous matrix is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class FluxParams:
    """Viscosity coefficient, power-law exponent, modulus regularization."""

    nu: float = 1.0
    r: float = 2.0
    eps_reg: float = 1e-10

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ValueError("nu must be positive")
        if self.r <= 1.0:
            raise ValueError("r must exceed 1")
        if self.eps_reg < 0.0:
            raise ValueError("eps_reg must be nonnegative")

    @property
    def r_prime(self):
        return self.r / (self.r - 1.0)

    @property
    def r_bar(self):
        return max(self.r, 2.0)

    @property
    def r_under(self):
        return min(self.r, 2.0)


def flux_coefficient(modulus_sq, params):
    """nu m^(r-2) from the squared modulus; safe at zero for any r > 1."""
    m2 = np.asarray(modulus_sq, dtype=float) + params.eps_reg**2
    if params.r == 2.0:
        return np.full_like(m2, params.nu)
    with np.errstate(divide="ignore"):
        coef = params.nu * m2 ** (0.5 * (params.r - 2.0))
    # eps_reg = 0 with r < 2: sigma(A) = nu |A|^(r-2) A -> 0 as A -> 0.
    return np.where(m2 > 0.0, coef, 0.0)


def power_law_flux(A, params):
    """sigma(A) for tensors (..., 2, 2) or vectors (..., 2)."""
    A = np.asarray(A, dtype=float)
    if A.ndim >= 2 and A.shape[-2:] == (2, 2):
        mod2 = (A**2).sum(axis=(-2, -1))
        return flux_coefficient(mod2, params)[..., None, None] * A
    if A.shape[-1] == 2:
        mod2 = (A**2).sum(axis=-1)
        return flux_coefficient(mod2, params)[..., None] * A
    raise ValueError(f"flux argument must be 2-vectors or 2x2 tensors, got {A.shape}")


def face_upwind_weight(z, face, c_f, quad_order=6):
    """gamma_F(z) = max(sup over F of |z . n_F|, C_F) for one face."""
    if c_f <= 0.0:
        raise ValueError("the safeguard C_F must be positive")
    space = z.space
    mesh = space.mesh
    ends = mesh.face_coords([face])  # (1, 2, 2)
    e0 = mesh.face_elements[face, 0]
    vals = space.basis.eval(np.array([e0]), ends)[0]  # (2, 6, 2)
    tr = np.einsum("qkc,k->qc", vals, z.coeffs[space.element_dofs[e0]])
    zn = tr @ mesh.face_normals[face]
    return max(float(np.abs(zn).max()), c_f)


@dataclass
class AssembledSystem:
    """One Picard iterate's saddle-point blocks and right-hand side."""

    K: sp.spmatrix          # velocity block  M/dt + A + C + J
    B: sp.spmatrix          # divergence block, b(v, q) = q^T B v
    rhs_u: np.ndarray
    rhs_p: np.ndarray
    mean_constraint: bool   # append the zero-mean pressure multiplier


class FormAssembler:
    """Assembles every discrete form on one mesh and parameter set."""

    def __init__(self, space, pressure, lifting, params, quad_order=6):
        self.space = space
        self.pressure = pressure
        self.lifting = lifting
        self.params = params
        self.quad_order = quad_order
        mesh = space.mesh
        self.mesh = mesh

        tab = space.elem_tables(quad_order)
        self.elem_points = tab["points"]
        self.elem_weights = tab["weights"]
        self.phi = tab["basis"]  # (ne, nq, 6, 2)

        self._gt = lifting.gradient_op.T.tocsr()
        self._g = lifting.gradient_op
        ne = mesh.n_elements
        base = np.arange(ne)[:, None, None, None] * 12 + np.arange(4)[None, :, None, None] * 3
        self._wrows = np.broadcast_to(
            base + np.arange(3)[None, None, :, None], (ne, 4, 3, 3)
        ).ravel()
        self._wcols = np.broadcast_to(
            base + np.arange(3)[None, None, None, :], (ne, 4, 3, 3)
        ).ravel()

        nf = mesh.n_faces
        hf = mesh.h_face
        self._pen_scale = np.where(lifting.face_mask, hf ** (1.0 - params.r), 0.0)
        self._int_mask = lifting.interior.astype(float)

        # endpoint traces for the sup of z . n on a face (z . n is linear)
        ends = mesh.face_coords()
        e0 = mesh.face_elements[:, 0]
        endvals = space.basis.eval(e0, ends)  # (nf, 2, 6, 2)
        self._end_zn = np.einsum("fqkc,fc->fqk", endvals, mesh.face_normals)
        self._end_dofs = space.element_dofs[e0]

        self._mass = None
        self._div = None

    # -- frozen-coefficient (Picard) matrices ------------------------------

    def _tensor_values(self, u_coeffs):
        ne = self.mesh.n_elements
        tc = (self._g @ u_coeffs).reshape(ne, 2, 2, 3)
        return np.einsum("eabi,eqi->eqab", tc, self.lifting.psi)

    @staticmethod
    def _symmetrize(A):
        # triple products of an analytically symmetric form pick up sparse
        # roundoff asymmetry (~1e-11 on scaled data); remove it exactly
        return 0.5 * (A + A.T)

    def _weighted_gradient_matrix(self, coef):
        """G^T W G with pointwise weight ``coef`` (ne, nq)."""
        blocks = np.einsum(
            "eq,eqi,eqj->eij", self.elem_weights * coef, self.lifting.psi,
            self.lifting.psi,
        )
        vals = np.broadcast_to(
            blocks[:, None, :, :], (len(blocks), 4, 3, 3)
        ).ravel()
        n = self.mesh.n_elements * 12
        W = sp.csr_matrix((vals, (self._wrows, self._wcols)), shape=(n, n))
        return self._symmetrize(self._gt @ (W @ self._g))

    def _penalty_matrix(self, coef):
        """Jump^T D Jump with per-(face, point) weight ``coef`` (nf, nq)."""
        w = (coef * self.lifting.face_weights * self._pen_scale[:, None])
        d = np.repeat(w.ravel(), 2)
        J = self.lifting.jump_op
        return self._symmetrize(J.T @ sp.diags(d) @ J)

    def picard_viscous_matrix(self, w_frozen):
        """Frozen-modulus viscous matrix; equals the exact matrix at r = 2."""
        params = self.params
        tv = self._tensor_values(w_frozen.coeffs)
        coef_vol = flux_coefficient((tv**2).sum(axis=(-2, -1)), params)
        jv = self.lifting.jump_values(w_frozen)
        coef_face = flux_coefficient((jv**2).sum(axis=-1), params)
        return self._weighted_gradient_matrix(coef_vol) + self._penalty_matrix(
            coef_face
        )

    def viscous_residual(self, w):
        """Vector rep of v -> a(w, v) including the nonlinear flux."""
        params = self.params
        tv = self._tensor_values(w.coeffs)
        sig = power_law_flux(tv, params)
        moments = np.einsum(
            "eq,eqab,eqi->eabi", self.elem_weights, sig, self.lifting.psi
        )
        res = self._gt @ moments.ravel()

        jv = self.lifting.jump_values(w)
        sigf = power_law_flux(jv, params)
        wface = (self.lifting.face_weights * self._pen_scale[:, None])[..., None]
        res += self.lifting.jump_op.T @ (sigf * wface).ravel()
        return res

    def form_a_residual(self, w, v):
        """The nonlinear viscous form a(w, v)."""
        return float(self.viscous_residual(w) @ v.coeffs)

    # -- linear forms -------------------------------------------------------

    def divergence_matrix(self):
        """B with q^T B v = -integral q div v (exact, div v is constant)."""
        if self._div is None:
            mesh = self.mesh
            vals = -(mesh.areas[:, None] * self.space.basis.div)
            rows = np.broadcast_to(
                np.arange(mesh.n_elements)[:, None], vals.shape
            )
            self._div = sp.csr_matrix(
                (vals.ravel(), (rows.ravel(), self.space.element_dofs.ravel())),
                shape=(self.pressure.n_dofs, self.space.n_dofs),
            )
        return self._div

    def mass_matrix(self):
        if self._mass is None:
            local = np.einsum(
                "eq,eqkc,eqlc->ekl", self.elem_weights, self.phi, self.phi
            )
            dofs = self.space.element_dofs
            rows = np.broadcast_to(dofs[:, :, None], local.shape)
            cols = np.broadcast_to(dofs[:, None, :], local.shape)
            n = self.space.n_dofs
            self._mass = sp.csr_matrix(
                (local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)
            )
        return self._mass

    def convection_matrix(self, z_frozen):
        """Advection by the frozen field with the upwind-free face split."""
        dofs = self.space.element_dofs
        zv = np.einsum("eqkc,ek->eqc", self.phi, z_frozen.coeffs[dofs])
        grads = self.space.basis.grads  # (ne, l, a, b) constant
        local = np.einsum(
            "eq,eqka,eqb,elab->ekl", self.elem_weights, self.phi, zv, grads
        )
        rows = np.broadcast_to(dofs[:, :, None], local.shape)
        cols = np.broadcast_to(dofs[:, None, :], local.shape)
        n = self.space.n_dofs
        vol = sp.csr_matrix(
            (local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)
        )

        lift = self.lifting
        zn = (lift.average_values(z_frozen) * self.mesh.face_normals[:, None, :]).sum(
            axis=-1
        )
        w = zn * lift.face_weights * self._int_mask[:, None]
        d = np.repeat(w.ravel(), 2)
        face = lift.avg_op.T @ sp.diags(d) @ lift.jump_op
        return vol - face

    def gamma_values(self, z_frozen, c_f):
        """gamma_F(z) on every face (endpoint sup; z . n is linear there)."""
        if c_f <= 0.0:
            raise ValueError("the safeguard C_F must be positive")
        zn = np.einsum("fqk,fk->fq", self._end_zn, z_frozen.coeffs[self._end_dofs])
        return np.maximum(np.abs(zn).max(axis=1), c_f)

    def upwind_matrix(self, z_frozen, c_f):
        """Interior-face jump penalty weighted by gamma_F(z)."""
        lift = self.lifting
        gam = self.gamma_values(z_frozen, c_f)
        w = gam[:, None] * lift.face_weights * self._int_mask[:, None]
        d = np.repeat(w.ravel(), 2)
        J = lift.jump_op
        return self._symmetrize(J.T @ sp.diags(d) @ J)

    def load_vector(self, fn, t):
        """Moments of the body force f(t, .) against the velocity basis."""
        fv = np.asarray(fn(t, self.elem_points), dtype=float)
        local = np.einsum("eq,eqc,eqkc->ek", self.elem_weights, fv, self.phi)
        out = np.zeros(self.space.n_dofs)
        np.add.at(out, self.space.element_dofs.ravel(), local.ravel())
        return out
