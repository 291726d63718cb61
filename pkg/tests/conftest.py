import numpy as np
import pytest

from hdivflow.forms import FluxParams, FormAssembler
from hdivflow.lifting import LiftingOperators
from hdivflow.mesh import build_structured_mesh
from hdivflow.spaces import FEFunction, PressureSpace, VelocitySpace, stream_function_field


@pytest.fixture(scope="session")
def two_triangles():
    return build_structured_mesh(1)


@pytest.fixture(scope="session")
def jittered4():
    return build_structured_mesh(4, jitter=0.2, seed=3)


@pytest.fixture(scope="session")
def disc4(jittered4):
    """Spaces and lifting operators on the 32-element jittered mesh."""
    V = VelocitySpace(jittered4)
    Q = PressureSpace(jittered4)
    L = LiftingOperators(V, quad_order=6)
    return V, Q, L


@pytest.fixture(scope="session")
def newtonian4(disc4):
    V, Q, L = disc4
    return FormAssembler(V, Q, L, FluxParams(nu=1.0, r=2.0), quad_order=6)


def make_divergence_free(V, rng, unit_norm=True):
    """Random member of the discrete divergence-free subspace."""
    mesh = V.mesh
    psi_v = rng.standard_normal(mesh.n_vertices)
    psi_m = rng.standard_normal(mesh.n_faces)
    bnd_vertices = np.unique(mesh.faces[mesh.boundary_faces].ravel())
    psi_v[bnd_vertices] = 0.0
    psi_m[mesh.boundary_faces] = 0.0
    z = stream_function_field(V, psi_v, psi_m)
    if unit_norm:
        scale = np.abs(z.coeffs).max()
        if scale > 0:
            z = FEFunction(V, z.coeffs / scale)
    return z


def random_velocity(V, rng, zero_boundary=False, unit_norm=True):
    coeffs = rng.standard_normal(V.n_dofs)
    if zero_boundary:
        coeffs[V.boundary_dofs()] = 0.0
    if unit_norm:
        coeffs /= np.abs(coeffs).max()
    return FEFunction(V, coeffs)
