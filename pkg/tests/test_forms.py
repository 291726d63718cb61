import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdivflow.forms import (
    FluxParams,
    FormAssembler,
    face_upwind_weight,
    flux_coefficient,
    power_law_flux,
)
from hdivflow.lifting import LiftingOperators
from hdivflow.mesh import build_structured_mesh
from hdivflow.quadrature import edge_rule, map_to_elements, map_to_faces, triangle_rule
from hdivflow.spaces import (
    FEFunction,
    PressureSpace,
    VelocitySpace,
    rt_interpolate,
    zero_velocity,
)

from conftest import make_divergence_free, random_velocity


# -- flux ---------------------------------------------------------------------


def test_flux_params_validation():
    with pytest.raises(ValueError):
        FluxParams(nu=-1.0)
    with pytest.raises(ValueError):
        FluxParams(r=1.0)
    with pytest.raises(ValueError):
        FluxParams(eps_reg=-1e-3)
    p = FluxParams(nu=2.0, r=1.5)
    assert p.r_prime == pytest.approx(3.0)
    assert p.r_bar == 2.0
    assert p.r_under == 1.5


def test_newtonian_flux_is_linear():
    p = FluxParams(nu=3.0, r=2.0)
    A = np.array([[1.0, 2.0], [-0.5, 0.3]])
    assert np.allclose(power_law_flux(A, p), 3.0 * A)


def test_flux_hand_value_r3():
    p = FluxParams(nu=1.0, r=3.0, eps_reg=0.0)
    A = np.diag([2.0, 0.0])
    assert np.allclose(power_law_flux(A, p), 2.0 * A)


def test_flux_zero_argument_shear_thinning():
    p = FluxParams(nu=1.0, r=1.5, eps_reg=1e-10)
    assert np.allclose(power_law_flux(np.zeros((2, 2)), p), 0.0)
    p0 = FluxParams(nu=1.0, r=1.5, eps_reg=0.0)
    assert np.allclose(power_law_flux(np.zeros(2), p0), 0.0)
    assert np.isfinite(power_law_flux(np.zeros((4, 2)), p0)).all()


def test_flux_on_vectors_uses_euclidean_norm():
    p = FluxParams(nu=2.0, r=3.0, eps_reg=0.0)
    v = np.array([3.0, 4.0])
    assert np.allclose(power_law_flux(v, p), 2.0 * 5.0 * v)


@settings(max_examples=40, deadline=None)
@given(
    r=st.floats(1.1, 4.0),
    ax=st.floats(-3, 3),
    ay=st.floats(-3, 3),
    bx=st.floats(-3, 3),
    by=st.floats(-3, 3),
)
def test_flux_monotonicity_pointwise(r, ax, ay, bx, by):
    """(sigma(A) - sigma(B)) . (A - B) >= 0 for the regularized flux."""
    p = FluxParams(nu=1.0, r=r, eps_reg=1e-10)
    A, B = np.array([ax, ay]), np.array([bx, by])
    val = (power_law_flux(A, p) - power_law_flux(B, p)) @ (A - B)
    assert val >= -1e-12


# -- gamma_F ------------------------------------------------------------------


def test_gamma_zero_field_hits_safeguard(disc4):
    V, _, _ = disc4
    z = zero_velocity(V)
    assert face_upwind_weight(z, 0, 1e-4) == pytest.approx(1e-4)


def test_gamma_takes_endpoint_max(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    rng = np.random.default_rng(0)
    z = random_velocity(V, rng)
    mesh = V.mesh
    gam = asm.gamma_values(z, 1e-4)
    for f in range(0, mesh.n_faces, 7):
        # dense sampling along the face as oracle (z . n is linear in t)
        t = np.linspace(0, 1, 50)
        coords = mesh.face_coords([f])[0]
        pts = coords[0] * (1 - t)[:, None] + coords[1] * t[:, None]
        e0 = mesh.face_elements[f, 0]
        vals = V.basis.eval(np.array([e0]), pts[None])[0]
        zn = np.einsum("qkc,k->qc", vals, z.coeffs[V.element_dofs[e0]]) @ mesh.face_normals[f]
        assert gam[f] == pytest.approx(max(abs(zn).max(), 1e-4), rel=1e-10)


def test_gamma_safeguard_wins_for_small_fields(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    z = FEFunction(V, np.full(V.n_dofs, 1e-7))
    gam = asm.gamma_values(z, 1e-4)
    assert (gam == 1e-4).any()
    with pytest.raises(ValueError):
        asm.gamma_values(z, 0.0)


# -- viscous form -------------------------------------------------------------


def test_viscous_residual_zero_field(newtonian4):
    V = newtonian4.space
    z = zero_velocity(V)
    assert abs(newtonian4.viscous_residual(z)).max() == 0.0


def test_picard_matrix_symmetric_and_psd(disc4):
    V, Q, L = disc4
    rng = np.random.default_rng(3)
    for r in (1.5, 2.0, 2.5):
        asm = FormAssembler(V, Q, L, FluxParams(nu=1.0, r=r), quad_order=6)
        w = random_velocity(V, rng)
        A = asm.picard_viscous_matrix(w)
        assert abs(A - A.T).max() < 1e-11
        for _ in range(5):
            v = rng.standard_normal(V.n_dofs)
            assert v @ (A @ v) >= -1e-11


def test_picard_matrix_newtonian_matches_residual(newtonian4, disc4):
    V, _, _ = disc4
    rng = np.random.default_rng(5)
    w = random_velocity(V, rng)
    A = newtonian4.picard_viscous_matrix(w)
    # r = 2: the matrix is w-independent and exact
    z = random_velocity(V, rng)
    A2 = newtonian4.picard_viscous_matrix(z)
    assert abs(A - A2).max() < 1e-12
    assert abs(A @ w.coeffs - newtonian4.viscous_residual(w)).max() < 1e-11


def test_picard_consistency_error_shrinks_with_regularization(disc4):
    """Against the unregularized flux, the frozen-coefficient matrix applied
    to its own field differs by an amount that vanishes with eps_reg."""
    V, Q, L = disc4
    rng = np.random.default_rng(8)
    w = random_velocity(V, rng)
    exact = FormAssembler(
        V, Q, L, FluxParams(nu=1.0, r=1.5, eps_reg=0.0), quad_order=6
    ).viscous_residual(w)
    errs = []
    for eps in (1e-2, 1e-4, 1e-6):
        asm = FormAssembler(
            V, Q, L, FluxParams(nu=1.0, r=1.5, eps_reg=eps), quad_order=6
        )
        errs.append(abs(asm.picard_viscous_matrix(w) @ w.coeffs - exact).max())
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-7


def test_form_a_residual_matches_dense_oracle(two_triangles):
    """Newtonian viscous form against an independent dense assembly."""
    V = VelocitySpace(two_triangles)
    Q = PressureSpace(two_triangles)
    L = LiftingOperators(V, quad_order=6)
    params = FluxParams(nu=1.0, r=2.0)
    asm = FormAssembler(V, Q, L, params, quad_order=6)
    mesh = two_triangles
    rng = np.random.default_rng(2)
    w = random_velocity(V, rng)
    v = random_velocity(V, rng)

    # oracle: evaluate integral sigma(G w) : G v + penalty with dense
    # quadrature, building G values pointwise from the lifting definition
    Gw = L.discrete_gradient(w)
    Gv = L.discrete_gradient(v)
    psi = L.psi
    vol = float(
        (
            L.elem_weights
            * np.einsum("eqab,eqab->eq", Gw.values(psi), Gv.values(psi))
        ).sum()
    )
    jumps_w = L.jump_values(w)
    jumps_v = L.jump_values(v)
    pen = float(
        (
            mesh.h_face ** (1.0 - 2.0)
            * (L.face_weights * (jumps_w * jumps_v).sum(-1)).sum(axis=1)
        ).sum()
    )
    assert asm.form_a_residual(w, v) == pytest.approx(vol + pen, rel=1e-10)


def test_monotonicity_surrogate(disc4):
    V, Q, L = disc4
    rng = np.random.default_rng(17)
    for r in (1.5, 2.5):
        asm = FormAssembler(V, Q, L, FluxParams(nu=1.0, r=r), quad_order=6)
        for _ in range(20):
            w = random_velocity(V, rng)
            z = random_velocity(V, rng)
            e = w - z
            gap = asm.form_a_residual(w, e) - asm.form_a_residual(z, e)
            assert gap >= -1e-12


def test_coercivity_bracket(disc4):
    """a(v, v) stays within fixed constants of nu ||v||^r on random fields."""
    V, Q, L = disc4
    rng = np.random.default_rng(23)
    from hdivflow.errors import broken_norm_1rh

    for r in (1.5, 2.0, 2.5):
        asm = FormAssembler(V, Q, L, FluxParams(nu=1.0, r=r, eps_reg=0.0),
                            quad_order=6)
        ratios = []
        for _ in range(15):
            v = random_velocity(V, rng)
            a_vv = asm.form_a_residual(v, v)
            norm = broken_norm_1rh(v, r, L)
            ratios.append(a_vv / norm**r)
        assert 0.05 < min(ratios) and max(ratios) < 20.0
        assert max(ratios) / min(ratios) < 30.0


# -- divergence, convection, upwind, mass, load -------------------------------


def test_divergence_matrix_entries(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    B = asm.divergence_matrix()
    ux = rt_interpolate(V, lambda p: np.stack([p[..., 0], 0.0 * p[..., 1]], -1))
    assert abs(B @ ux.coeffs + V.mesh.areas).max() < 1e-12


def test_divergence_free_fields_in_b_kernel(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    B = asm.divergence_matrix()
    rng = np.random.default_rng(3)
    z = make_divergence_free(V, rng)
    assert abs(B @ z.coeffs).max() < 1e-13


def test_divergence_interior_column_sums_vanish(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    B = asm.divergence_matrix()
    colsums = np.asarray(B.sum(axis=0)).ravel()
    interior = np.setdiff1d(np.arange(V.n_dofs), V.boundary_dofs())
    assert abs(colsums[interior]).max() < 1e-12


def test_convection_skew_symmetry_on_divergence_free(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    rng = np.random.default_rng(19)
    z = make_divergence_free(V, rng)
    C = asm.convection_matrix(z)
    for _ in range(30):
        v = random_velocity(V, rng, zero_boundary=True)
        w = random_velocity(V, rng, zero_boundary=True)
        assert abs(v.coeffs @ (C @ v.coeffs)) < 1e-11
        assert abs(w.coeffs @ (C @ v.coeffs) + v.coeffs @ (C @ w.coeffs)) < 1e-11


def test_convection_zero_field(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    C = asm.convection_matrix(zero_velocity(V))
    assert abs(C).max() == 0.0


def test_upwind_matrix_properties(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    rng = np.random.default_rng(29)
    z = random_velocity(V, rng)
    J = asm.upwind_matrix(z, 1e-4)
    assert abs(J - J.T).max() < 1e-12
    for _ in range(100):
        v = rng.standard_normal(V.n_dofs)
        assert v @ (J @ v) >= -1e-12
    # continuous fields have no interior jumps
    u = rt_interpolate(V, lambda p: np.stack([p[..., 0], -p[..., 1]], -1))
    assert u.coeffs @ (J @ u.coeffs) < 1e-20


def test_upwind_zero_advection_is_scaled_jump_mass(disc4):
    V, Q, L = disc4
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    J1 = asm.upwind_matrix(zero_velocity(V), 1e-4)
    J2 = asm.upwind_matrix(zero_velocity(V), 2e-4)
    assert abs(J1 * 2.0 - J2).max() < 1e-15


def test_mass_matrix_spd_dense_oracle(two_triangles):
    V = VelocitySpace(two_triangles)
    Q = PressureSpace(two_triangles)
    L = LiftingOperators(V, quad_order=6)
    asm = FormAssembler(V, Q, L, FluxParams(), quad_order=6)
    M = asm.mass_matrix().toarray()
    assert np.allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0


def test_zero_load_vector(newtonian4):
    f = newtonian4.load_vector(lambda t, p: np.zeros(p.shape), 0.0)
    assert abs(f).max() == 0.0


def test_constant_load_matches_mass_times_interpolant(newtonian4):
    V = newtonian4.space
    load = newtonian4.load_vector(
        lambda t, p: np.broadcast_to(np.array([1.0, 0.0]), p.shape).copy(), 0.0
    )
    u = rt_interpolate(V, lambda p: np.broadcast_to(np.array([1.0, 0.0]), p.shape).copy())
    assert abs(load - newtonian4.mass_matrix() @ u.coeffs).max() < 1e-12
