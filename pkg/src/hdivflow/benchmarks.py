"""Benchmark drivers: the manufactured convergence study and the bumped
channel, plus small shared helpers (mesh family, cutlines, fluxes).

The convergence study runs the manufactured problem over a family of
unstructured meshes whose mean diameters track {0.349, 0.149, 0.079,
0.033, 0.015}; the time step follows dt ~ 1.5 h, rounded so the final time
is hit exactly.  The channel benchmark drives a parabolic inlet against a
circular-arc obstruction, no-slip walls and a do-nothing outlet, and
extracts horizontal-velocity cutlines at fixed stations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import observed_orders, velocity_pressure_errors
from .forms import FluxParams, FormAssembler
from .lifting import LiftingOperators
from .manufactured import standard_solution
from .mesh import build_channel_mesh, build_unstructured_mesh
from .solver import (
    BoundaryConditions,
    ESSENTIAL,
    FlowSolver,
    NATURAL,
    PicardConfig,
    TimeConfig,
    run_simulation,
)
from .spaces import (
    FEFunction,
    PressureSpace,
    VelocitySpace,
    evaluate,
    locate_points,
    rt_interpolate,
    stream_function_field,
)

# Lattice sizes whose unstructured meshes land within 10% of the reference
# mean diameters 0.349, 0.149, 0.079, 0.033, 0.015.
FAMILY_SIZES = (4, 9, 18, 43, 94)
FAMILY_TARGET_H = (0.349, 0.149, 0.079, 0.033, 0.015)


def test1_mesh_family(levels=3, jitter=0.35, seed=7, grading=0.35):
    """The convergence-study meshes, coarsest first."""
    if not 1 <= levels <= len(FAMILY_SIZES):
        raise ValueError(f"levels must lie in [1, {len(FAMILY_SIZES)}]")
    return [
        build_unstructured_mesh(n, jitter=jitter, seed=seed, grading=grading)
        for n in FAMILY_SIZES[:levels]
    ]


@dataclass
class StudyConfig:
    nu_values: tuple = (1.0,)
    r_values: tuple = (2.0,)
    levels: int = 3
    t_final: float = 1.0
    dt_factor: float = 1.5
    c_f: float = 1e-4
    quad_order: int = 6
    eps_reg: float = 1e-10
    picard: PicardConfig = field(default_factory=PicardConfig)
    jitter: float = 0.35
    seed: int = 7
    grading: float = 0.35


def _run_manufactured(mesh, params, sol, cfg):
    V, Q = VelocitySpace(mesh), PressureSpace(mesh)
    lifting = LiftingOperators(V, quad_order=cfg.quad_order)
    asm = FormAssembler(V, Q, lifting, params, quad_order=cfg.quad_order)
    solver = FlowSolver(
        asm,
        BoundaryConditions.homogeneous(mesh),
        c_f=cfg.c_f,
        forcing=sol.forcing,
        picard=cfg.picard,
    )
    tc = TimeConfig.from_mesh_size(
        float(mesh.h_elem.mean()), t_final=cfg.t_final, factor=cfg.dt_factor
    )
    u0 = rt_interpolate(V, lambda p: sol.velocity(0.0, p))
    traj = run_simulation(solver, u0, tc)
    return velocity_pressure_errors(traj, sol, params, asm, c_f=cfg.c_f)


def _study_one_pair(args):
    nu, r, cfg, meshes = args
    params = FluxParams(nu=nu, r=r, eps_reg=cfg.eps_reg)
    sol = standard_solution(params)
    reports = [_run_manufactured(m, params, sol, cfg) for m in meshes]
    hs = [rep.h_mean for rep in reports]
    ov = [float("nan")] + observed_orders(hs, [rep.vel_err for rep in reports])
    op = [float("nan")] + observed_orders(hs, [rep.pre_err for rep in reports])
    rows = []
    for rep, o_v, o_p in zip(reports, ov, op):
        rows.append(
            [nu, r, rep.h_mean, rep.dt, rep.vel_err, rep.pre_err, o_v, o_p]
        )
    return rows


def convergence_study(cfg, jobs=1):
    """Error table over the mesh family for every (nu, r) pair.

    Returns (header, rows); rows are ordered by the (nu, r) sweep order,
    coarsest mesh first, independently of ``jobs``.
    """
    meshes = test1_mesh_family(
        cfg.levels, jitter=cfg.jitter, seed=cfg.seed, grading=cfg.grading
    )
    tasks = [(nu, r, cfg, meshes) for nu in cfg.nu_values for r in cfg.r_values]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(_study_one_pair, tasks))
    else:
        blocks = [_study_one_pair(t) for t in tasks]
    header = ["nu", "r", "h", "dt", "velERR", "preERR", "order_vel", "order_pre"]
    return header, [row for block in blocks for row in block]


def boundary_flux(u, faces, quad_order=6):
    """Integral of u . n over the given boundary faces."""
    tab = u.space.face_tables(quad_order)
    mesh = u.space.mesh
    faces = np.asarray(faces)
    e0 = mesh.face_elements[faces, 0]
    dofs = u.space.element_dofs[e0]
    vals = np.einsum("fqkc,fk->fqc", tab["trace0"][faces], u.coeffs[dofs])
    vn = (vals * mesh.face_normals[faces][:, None, :]).sum(axis=-1)
    return float((tab["weights"][faces] * vn).sum())


def cutline(u, station, n_samples=101, y_range=None, eps=1e-6):
    """Horizontal-velocity profile along the vertical line x = station.

    Returns (y, ux) arrays; sample points outside the domain are dropped.
    """
    mesh = u.space.mesh
    if y_range is None:
        y_range = (mesh.vertices[:, 1].min(), mesh.vertices[:, 1].max())
    ys = np.linspace(y_range[0] + eps, y_range[1] - eps, n_samples)
    pts = np.column_stack([np.full_like(ys, station), ys])
    elems = locate_points(mesh, pts)
    keep = elems >= 0
    vals = np.full(n_samples, np.nan)
    if keep.any():
        sub = evaluate(u, elems[keep], pts[keep][:, None, :])
        vals[keep] = sub[:, 0, 0]
    return ys[keep], vals[keep]


@dataclass
class ChannelConfig:
    nx: int = 48
    ny: int = 16
    length: float = 3.0
    height: float = 1.0
    bump_start: float = 1.0
    bump_end: float = 2.0
    bump_height: float = 0.5
    nu: float = 1e-2
    r: float = 2.0
    inlet_max: float = 0.3
    t_final: float = 10.0
    n_steps: int = 20
    c_f: float = 1e-4
    quad_order: int = 6
    eps_reg: float = 1e-10
    stations: tuple = (0.5, 1.0, 2.5)
    picard: PicardConfig = field(default_factory=PicardConfig)


@dataclass
class ChannelResult:
    mesh: object
    velocity: FEFunction
    pressure: FEFunction
    cutlines: dict  # station -> (y, ux)
    inlet_flux: float
    outlet_flux: float
    trajectory: list

    @property
    def mass_balance(self):
        return self.inlet_flux + self.outlet_flux

    @property
    def peak_velocities(self):
        return {x: float(np.nanmax(ux)) for x, (ys, ux) in self.cutlines.items()}


def channel_inlet_profile(cfg):
    """Parabolic horizontal inflow with the configured peak magnitude."""

    def g(t, pts):
        y = pts[..., 1]
        prof = 4.0 * cfg.inlet_max * y * (cfg.height - y) / cfg.height**2
        return np.stack([prof, np.zeros_like(prof)], axis=-1)

    return g


def channel_benchmark(cfg):
    """Run the bumped-channel flow and extract the cutline profiles."""
    mesh = build_channel_mesh(
        cfg.nx,
        cfg.ny,
        length=cfg.length,
        height=cfg.height,
        bump_start=cfg.bump_start,
        bump_end=cfg.bump_end,
        bump_height=cfg.bump_height,
    )
    V, Q = VelocitySpace(mesh), PressureSpace(mesh)
    bc = BoundaryConditions(
        {
            "inlet": (ESSENTIAL, channel_inlet_profile(cfg)),
            "wall": (ESSENTIAL, None),
            "outlet": (NATURAL, None),
        }
    )
    lifting = LiftingOperators(
        V, quad_order=cfg.quad_order, face_mask=bc.face_mask(mesh)
    )
    params = FluxParams(nu=cfg.nu, r=cfg.r, eps_reg=cfg.eps_reg)
    asm = FormAssembler(V, Q, lifting, params, quad_order=cfg.quad_order)
    solver = FlowSolver(asm, bc, c_f=cfg.c_f, picard=cfg.picard)
    tc = TimeConfig(dt=cfg.t_final / cfg.n_steps, t_final=cfg.t_final)
    traj = run_simulation(solver, FEFunction(V, np.zeros(V.n_dofs)), tc)
    _, u, p = traj[-1]
    cuts = {
        x: cutline(u, x, y_range=(0.0, cfg.height)) for x in cfg.stations
    }
    return ChannelResult(
        mesh=mesh,
        velocity=u,
        pressure=p,
        cutlines=cuts,
        inlet_flux=boundary_flux(u, mesh.faces_with_tag("inlet"), cfg.quad_order),
        outlet_flux=boundary_flux(u, mesh.faces_with_tag("outlet"), cfg.quad_order),
        trajectory=traj,
    )


def energy_decay_history(mesh, params, n_steps=20, dt=0.05, c_f=1e-4,
                         amplitude=1.0, picard=None, quad_order=6):
    """Free decay (no force, no-slip) of a divergence-free initial field.

    Returns the L2 norms ||u^n|| for n = 0..n_steps.
    """
    V, Q = VelocitySpace(mesh), PressureSpace(mesh)
    lifting = LiftingOperators(V, quad_order=quad_order)
    asm = FormAssembler(V, Q, lifting, params, quad_order=quad_order)
    picard = picard or PicardConfig(tol_rel=1e-12, max_iter=200)
    solver = FlowSolver(
        asm, BoundaryConditions.homogeneous(mesh), c_f=c_f, picard=picard
    )

    def initial(pts):
        x, y = pts[..., 0], pts[..., 1]
        sx, sy = np.sin(np.pi * x), np.sin(np.pi * y)
        cx, cy = np.cos(np.pi * x), np.cos(np.pi * y)
        # rotated gradient of amplitude * sin^2(pi x) sin^2(pi y)
        gy = 2.0 * np.pi * amplitude * sx**2 * sy * cy
        gx = 2.0 * np.pi * amplitude * sx * cx * sy**2
        return np.stack([gy, -gx], axis=-1)

    u0 = rt_interpolate(V, initial)
    mass = asm.mass_matrix()

    def l2(f):
        return float(np.sqrt(max(f.coeffs @ (mass @ f.coeffs), 0.0)))

    tc = TimeConfig(dt=dt, t_final=n_steps * dt)
    norms = [l2(u0)]
    traj = run_simulation(
        solver, u0, tc, callback=lambda n, t, u, p: norms.append(l2(u))
    )
    return norms, traj
