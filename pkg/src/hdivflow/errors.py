"""Broken norms and the space-time error measures of the benchmark runs.

The broken W^(1,r) norm raises the elementwise gradient and the scaled
face jumps to the r-th power,

    |||v|||^r = integral |grad_h v|^r
                + sum over all faces of h_F^(1-q) integral_F |[v]|^r,

with boundary faces contributing the full trace.  The accumulated velocity
error of a run is the final-time squared L2 error plus the time-summed
combination of the nu-weighted broken norm (to the power max(r, 2)) and
the squared upwind seminorm; the pressure error time-sums squared L^(r')
norms.  Error integrands are sampled with the same quadrature order as
assembly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spaces import element_gradients


def broken_norm_1rh(u, r, lifting):
    """|||u|||_{1,r,h} of a discrete velocity field (full face sum)."""
    mesh = u.space.mesh
    grads = element_gradients(u)
    grad_part = (mesh.areas * ((grads**2).sum(axis=(1, 2))) ** (r / 2.0)).sum()
    jumps = lifting.jump_values(u)
    jmod = np.sqrt((jumps**2).sum(axis=-1))
    jump_part = (
        mesh.h_face ** (1.0 - r) * (lifting.face_weights * jmod**r).sum(axis=1)
    ).sum()
    return float((grad_part + jump_part) ** (1.0 / r))


def upwind_seminorm(u, z, assembler, c_f=1e-4):
    """Seminorm induced by the jump stabilization, |u|_z."""
    J = assembler.upwind_matrix(z, c_f)
    return float(np.sqrt(max(u.coeffs @ (J @ u.coeffs), 0.0)))


def _error_jumps(u_h, exact_vel, t, lifting):
    """Face-point jumps of (exact - discrete): interior jumps of the exact
    field vanish; on boundary faces the exact trace enters."""
    jumps = -lifting.jump_values(u_h)
    bnd = ~lifting.interior
    if bnd.any():
        ex = exact_vel(t, lifting.face_points[bnd])
        jumps[bnd] += ex
    return jumps


def error_norm_1rh(u_h, exact_vel, exact_grad, t, r, lifting):
    """|||u(t) - u_h|||_{1,r,h} with pointwise-exact field traces."""
    mesh = u_h.space.mesh
    g_h = element_gradients(u_h)
    g_ex = exact_grad(t, lifting.elem_points)
    diff = g_ex - g_h[:, None, :, :]
    grad_part = (
        lifting.elem_weights * ((diff**2).sum(axis=(-2, -1))) ** (r / 2.0)
    ).sum()
    jumps = _error_jumps(u_h, exact_vel, t, lifting)
    jmod2 = (jumps**2).sum(axis=-1)
    jump_part = (
        mesh.h_face ** (1.0 - r)
        * (lifting.face_weights * jmod2 ** (r / 2.0)).sum(axis=1)
    ).sum()
    return float((grad_part + jump_part) ** (1.0 / r))


def error_l2(u_h, exact_vel, t, lifting):
    vals = np.einsum(
        "eqkc,ek->eqc",
        u_h.space.elem_tables(lifting.quad_order)["basis"],
        u_h.coeffs[u_h.space.element_dofs],
    )
    diff = exact_vel(t, lifting.elem_points) - vals
    return float(np.sqrt((lifting.elem_weights * (diff**2).sum(axis=-1)).sum()))


def error_upwind_seminorm(u_h, exact_vel, t, gamma, lifting):
    """|u(t) - u_h|_{u_h} from per-face gamma values (interior faces)."""
    jumps = _error_jumps(u_h, exact_vel, t, lifting)
    jmod2 = (jumps**2).sum(axis=-1)
    per_face = (lifting.face_weights * jmod2).sum(axis=1)
    return float(np.sqrt((gamma * per_face * lifting.interior).sum()))


def pressure_lr_norm(p_h, exact_pre, t, rp, lifting):
    """L^(r') norm of p(t) - p_h (piecewise-constant discrete pressure)."""
    diff = exact_pre(t, lifting.elem_points) - p_h.coeffs[:, None]
    return float(
        (lifting.elem_weights * np.abs(diff) ** rp).sum() ** (1.0 / rp)
    )


@dataclass
class ErrorReport:
    """Accumulated error measures of one run."""

    nu: float
    r: float
    h_mean: float
    h_max: float
    dt: float
    vel_err: float = 0.0
    pre_err: float = 0.0
    final_l2: float = 0.0
    steps: list = field(default_factory=list)  # per-step (norm, seminorm, pre)


def velocity_pressure_errors(trajectory, sol, params, assembler, c_f=1e-4):
    """velERR and preERR of a completed trajectory against the exact fields."""
    lifting = assembler.lifting
    mesh = assembler.mesh
    dt = trajectory[1][0] - trajectory[0][0]
    report = ErrorReport(
        nu=params.nu,
        r=params.r,
        h_mean=float(mesh.h_elem.mean()),
        h_max=float(mesh.h_elem.max()),
        dt=dt,
    )
    rbar = params.r_bar
    rp = params.r_prime
    acc_vel = 0.0
    acc_pre = 0.0
    for t, u_h, p_h in trajectory[1:]:
        norm = error_norm_1rh(
            u_h, sol.velocity, sol.velocity_gradient, t, params.r, lifting
        )
        gamma = assembler.gamma_values(u_h, c_f)
        semi = error_upwind_seminorm(u_h, sol.velocity, t, gamma, lifting)
        pre = pressure_lr_norm(p_h, sol.pressure, t, rp, lifting)
        acc_vel += dt * (params.nu * norm**rbar + semi**2)
        acc_pre += dt * pre**2
        report.steps.append((norm, semi, pre))
    t_final, u_final, _ = trajectory[-1]
    report.final_l2 = error_l2(u_final, sol.velocity, t_final, lifting)
    report.vel_err = report.final_l2**2 + acc_vel
    report.pre_err = acc_pre
    return report


def observed_orders(hs, errs):
    """log-ratio convergence orders between consecutive mesh levels."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    return list(np.log(errs[:-1] / errs[1:]) / np.log(hs[:-1] / hs[1:]))
