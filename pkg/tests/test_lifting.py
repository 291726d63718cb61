import numpy as np
import pytest

from hdivflow.lifting import LiftingOperators
from hdivflow.mesh import build_structured_mesh
from hdivflow.spaces import (
    FEFunction,
    VelocitySpace,
    element_divergence,
    rt_interpolate,
    zero_velocity,
)

from conftest import random_velocity


def lift_identity_residual(L, face, w_values):
    """Worst mismatch of the defining identity over a full tensor basis."""
    mesh = L.mesh
    lifted = L.lift_face(face, w_values)
    els = [e for e in mesh.face_elements[face] if e >= 0]
    factor = 0.5 if len(els) == 2 else 1.0
    worst = 0.0
    for e in els:
        side = 0 if mesh.face_elements[face, 0] == e else 1
        for a in range(2):
            for b in range(2):
                for i in range(3):
                    lhs = lifted.coeffs[e, a, b, :] @ L.scalar_mass[e][:, i]
                    rhs = (
                        factor
                        * mesh.face_normals[face][b]
                        * (
                            L.face_weights[face]
                            * w_values[:, a]
                            * L.psi_trace[face, side, :, i]
                        ).sum()
                    )
                    worst = max(worst, abs(lhs - rhs))
    return worst


def test_lift_zero_data_gives_zero(disc4):
    _, _, L = disc4
    lifted = L.lift_face(0, np.zeros((L.nqf, 2)))
    assert abs(lifted.coeffs).max() == 0.0


def test_defining_identity_all_faces(disc4):
    """The lifting satisfies its defining identity on every face to 1e-12."""
    _, _, L = disc4
    rng = np.random.default_rng(0)
    for face in range(L.mesh.n_faces):
        w = rng.standard_normal((L.nqf, 2))
        assert lift_identity_residual(L, face, w) < 1e-12


def test_two_triangle_identity_against_dense_solve(two_triangles):
    """Dense reconstruction of the two-element local system as oracle."""
    V = VelocitySpace(two_triangles)
    L = LiftingOperators(V, quad_order=6)
    mesh = two_triangles
    face = mesh.interior_faces[0]
    w = np.broadcast_to(np.array([1.0, 0.0]), (L.nqf, 2)).copy()
    lifted = L.lift_face(face, w)

    # oracle: solve  M c = rhs  with the full broken tensor mass matrix
    for e in mesh.face_elements[face]:
        side = 0 if mesh.face_elements[face, 0] == e else 1
        M = L.scalar_mass[e]
        for a in range(2):
            for b in range(2):
                rhs = (
                    0.5
                    * mesh.face_normals[face][b]
                    * np.einsum(
                        "q,q,qi->i",
                        L.face_weights[face],
                        w[:, a],
                        L.psi_trace[face, side],
                    )
                )
                oracle = np.linalg.solve(M, rhs)
                assert abs(oracle - lifted.coeffs[e, a, b]).max() < 1e-13


def test_boundary_face_has_no_half_factor(disc4):
    _, _, L = disc4
    mesh = L.mesh
    face = mesh.boundary_faces[0]
    rng = np.random.default_rng(3)
    w = rng.standard_normal((L.nqf, 2))
    assert lift_identity_residual(L, face, w) < 1e-12
    lifted = L.lift_face(face, w)
    outside = [e for e in range(mesh.n_elements)
               if e != mesh.face_elements[face, 0]]
    assert abs(lifted.coeffs[outside]).max() == 0.0


def test_global_lifting_is_sum_of_face_liftings(disc4):
    V, _, L = disc4
    rng = np.random.default_rng(1)
    u = random_velocity(V, rng)
    R = L.global_lifting(u)
    jumps = L.jump_values(u)
    acc = np.zeros_like(R.coeffs)
    for f in range(V.mesh.n_faces):
        acc += L.lift_face(f, jumps[f]).coeffs
    assert abs(acc - R.coeffs).max() < 1e-12


def test_single_face_jump_matches_global(two_triangles):
    V = VelocitySpace(two_triangles)
    L = LiftingOperators(V, quad_order=6)
    mesh = two_triangles
    face = mesh.interior_faces[0]
    n = mesh.face_normals[face]
    tang = np.array([-n[1], n[0]])
    mono = np.array([tang[0], 0.0, 0.0, tang[1], 0.0, 0.0])
    u = zero_velocity(V)
    e0 = mesh.face_elements[face, 0]
    u.coeffs[V.element_dofs[e0]] = V.basis.dof_matrix[e0] @ mono
    # boundary jumps contribute too; isolate the interior face by masking
    mask = np.zeros(mesh.n_faces, dtype=bool)
    mask[face] = True
    L1 = LiftingOperators(V, quad_order=6, face_mask=mask)
    R = L1.global_lifting(u)
    direct = L1.lift_face(face, L1.jump_values(u)[face])
    assert abs(R.coeffs - direct.coeffs).max() < 1e-13


def test_continuous_zero_trace_field_has_zero_lifting(disc4):
    """A continuous piecewise-linear field vanishing on the boundary has no
    jumps at all, so its lifting vanishes and G_h reduces to the broken
    gradient."""
    V, _, L = disc4
    mesh = V.mesh
    rng = np.random.default_rng(6)
    nodal = rng.standard_normal((mesh.n_vertices, 2))
    boundary_vertices = np.unique(mesh.faces[mesh.boundary_faces].ravel())
    nodal[boundary_vertices] = 0.0

    def hat_field(pts):
        # P1 interpolation of nodal values; evaluated per face via barycentric
        out = np.zeros(pts.shape[:-1] + (2,))
        from hdivflow.spaces import locate_points

        flat = pts.reshape(-1, 2)
        elems = locate_points(mesh, flat)
        coords = mesh.element_coords(elems)
        d1 = coords[:, 1] - coords[:, 0]
        d2 = coords[:, 2] - coords[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        rel = flat - coords[:, 0]
        l1 = (rel[:, 0] * d2[:, 1] - rel[:, 1] * d2[:, 0]) / det
        l2 = (d1[:, 0] * rel[:, 1] - d1[:, 1] * rel[:, 0]) / det
        lam = np.stack([1 - l1 - l2, l1, l2], axis=1)
        vals = np.einsum("pa,pac->pc", lam, nodal[mesh.elements[elems]])
        return vals.reshape(pts.shape)

    u = rt_interpolate(V, hat_field, quad_order=8)
    R = L.global_lifting(u)
    assert abs(R.coeffs).max() < 1e-10
    G = L.discrete_gradient(u)
    grad_only = (L.grad_op @ u.coeffs).reshape(G.coeffs.shape)
    assert abs(G.coeffs - grad_only).max() < 1e-10


def test_trace_of_gradient_integrates_to_divergence(disc4):
    V, _, L = disc4
    rng = np.random.default_rng(9)
    u = random_velocity(V, rng, zero_boundary=True)
    G = L.discrete_gradient(u)
    trace_coeffs = G.coeffs[:, 0, 0, :] + G.coeffs[:, 1, 1, :]
    int_tr = np.einsum("ei,ei->", trace_coeffs,
                       np.einsum("eij,j->ei", L.scalar_mass, np.array([1.0, 0, 0])))
    int_div = (element_divergence(u) * V.mesh.areas).sum()
    assert abs(int_tr - int_div) < 1e-12


def test_norm_equivalence_ratio_stable_under_refinement():
    """||R_h v||^2 against the scaled jump norm stays in a fixed bracket."""
    rng = np.random.default_rng(12)
    stats = []
    for n in (4, 8, 16):
        mesh = build_structured_mesh(n, jitter=0.2, seed=5)
        V = VelocitySpace(mesh)
        L = LiftingOperators(V, quad_order=6)
        ratios = []
        for _ in range(20):
            u = random_velocity(V, rng)
            R = L.global_lifting(u)
            lhs = L.tensor_l2_norm_sq(R)
            jumps = L.jump_values(u)
            rhs = float(
                (
                    (L.face_weights * (jumps**2).sum(-1)).sum(axis=1)
                    / mesh.h_face
                ).sum()
            )
            ratios.append(lhs / rhs)
        stats.append((min(ratios), max(ratios), np.mean(ratios)))
    # frozen bracket measured at first verified build: ratios fell in
    # [3.24, 4.29] with per-mesh means 3.78/3.86/3.82
    for lo, hi, mean in stats:
        assert 2.0 < lo <= hi < 6.0
    means = [s[2] for s in stats]
    for m in means[1:]:
        assert abs(m - means[0]) / means[0] < 0.20
