"""Local convection- versus diffusion-dominated classification.

For each element T the quantity K_T is the patch-wise sup of
|grad u|^(r-2) (with the regularized modulus), and T counts as
convection-dominated when

    nu K_T < sup_T |u| h_T.

Faces use K_F = max(sup_F |grad u|^(r-2),
h_F^(2-r) sup_F |[Pi u]|^(r-2)) with Pi the velocity interpolant, and the
test nu K_F < sup_F |u . n_F| h_F.  Sup norms are sampled at quadrature
points plus vertices/endpoints (exact for the piecewise-linear discrete
case, dense sampling otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spaces import element_gradients, rt_interpolate


@dataclass
class RegimeReport:
    """Per-element / per-face classification; True = convection-dominated."""

    k_elem: np.ndarray
    elem_convective: np.ndarray
    k_face: np.ndarray
    face_convective: np.ndarray

    @property
    def n_convective_elements(self):
        return int(self.elem_convective.sum())

    @property
    def n_diffusive_elements(self):
        return int((~self.elem_convective).sum())

    @property
    def n_convective_faces(self):
        return int(self.face_convective.sum())

    @property
    def n_diffusive_faces(self):
        return int((~self.face_convective).sum())


def _power(mod2, r, eps):
    return (mod2 + eps**2) ** (0.5 * (r - 2.0))


def regime_partition(sol_or_uh, params, assembler, t=None):
    """Classify every element and face at one time.

    ``sol_or_uh`` is either a manufactured solution evaluated at time ``t``
    (gradients analytic) or a discrete velocity field (lifted gradient).
    """
    lifting = assembler.lifting
    mesh = assembler.mesh
    space = assembler.space
    eps = params.eps_reg

    elems = np.arange(mesh.n_elements)
    sample_pts = np.concatenate(
        [lifting.elem_points, mesh.element_coords()], axis=1
    )  # quadrature points plus vertices

    discrete = hasattr(sol_or_uh, "coeffs")
    if discrete:
        u_h = sol_or_uh
        gt = lifting.discrete_gradient(u_h)
        psi = lifting.scalar.eval(elems, sample_pts)
        gvals = gt.values(psi)
        uvals = np.einsum(
            "eqkc,ek->eqc", space.basis.eval(elems, sample_pts),
            u_h.coeffs[space.element_dofs],
        )
        interp = u_h
    else:
        if t is None:
            raise ValueError("analytic classification needs the time t")
        gvals = sol_or_uh.velocity_gradient(t, sample_pts)
        uvals = sol_or_uh.velocity(t, sample_pts)
        interp = rt_interpolate(space, lambda p: sol_or_uh.velocity(t, p))

    gpow = _power((gvals**2).sum(axis=(-2, -1)), params.r, eps)  # (ne, ns)
    umax = np.sqrt((uvals**2).sum(axis=-1)).max(axis=1)  # (ne,)

    k_elem = np.empty(mesh.n_elements)
    elem_max = gpow.max(axis=1)
    for e in range(mesh.n_elements):
        k_elem[e] = max(elem_max[p] for p in mesh.element_patch(e))
    elem_conv = params.nu * k_elem < umax * mesh.h_elem

    # Faces: sample at quadrature points and endpoints.
    face_pts = np.concatenate([lifting.face_points, mesh.face_coords()], axis=1)
    e0 = mesh.face_elements[:, 0]
    if discrete:
        gt0 = gt.values(lifting.scalar.eval(e0, face_pts))
        gface = gt0
        uface = np.einsum(
            "fqkc,fk->fqc", space.basis.eval(e0, face_pts),
            u_h.coeffs[space.element_dofs[e0]],
        )
    else:
        gface = sol_or_uh.velocity_gradient(t, face_pts)
        uface = sol_or_uh.velocity(t, face_pts)

    gpow_f = _power((gface**2).sum(axis=(-2, -1)), params.r, eps).max(axis=1)
    jumps = lifting.jump_values(interp)
    jpow = _power((jumps**2).sum(axis=-1), params.r, eps).max(axis=1)
    k_face = np.maximum(gpow_f, mesh.h_face ** (2.0 - params.r) * jpow)
    un_max = np.abs(
        (uface * mesh.face_normals[:, None, :]).sum(axis=-1)
    ).max(axis=1)
    face_conv = params.nu * k_face < un_max * mesh.h_face

    return RegimeReport(
        k_elem=k_elem,
        elem_convective=elem_conv,
        k_face=k_face,
        face_convective=face_conv,
    )
