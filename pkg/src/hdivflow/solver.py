"""Implicit Euler time loop with a Picard solve of each nonlinear step.

Each time step solves the nonlinear saddle problem

    M (u - u_prev)/dt + A(u)u + C(u)u + J(u)u + B^T p = F,   B u = 0

by freezing the flux modulus, the advecting field and the upwind weight at
the previous iterate, which yields a linear Oseen-type system per iterate.
The initial iterate is the previous time-step solution.  Stopping is on
the relative L2 increment; an optional adaptive relaxation halves the
update whenever the increment grows (useful in strongly
convection-dominated steps) and is inactive otherwise.

Essential boundary conditions prescribe the two normal moments of every
tagged face (row/column elimination with a right-hand-side lift);
tangential data is enforced weakly through the boundary part of the
viscous penalty.  Natural (do-nothing) faces keep their DOFs free and are
excluded from all boundary face sums.  With no natural faces the pressure
zero-mean is enforced by a single appended multiplier row/column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .basis import EdgeScalarBasis
from .quadrature import edge_rule, map_to_faces
from .spaces import FEFunction, rt_interpolate


class SolverError(Exception):
    pass


class PicardNonconvergence(SolverError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class TimeConfig:
    """Uniform time grid: n_steps * dt must equal t_final."""

    dt: float
    t_final: float

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_final <= 0.0:
            raise ValueError("dt and t_final must be positive")
        n = round(self.t_final / self.dt)
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-12 * self.t_final:
            raise ValueError(
                f"dt = {self.dt} does not divide t_final = {self.t_final}"
            )

    @property
    def n_steps(self):
        return round(self.t_final / self.dt)

    def times(self):
        return self.dt * np.arange(1, self.n_steps + 1)

    @staticmethod
    def from_mesh_size(h, t_final=1.0, factor=1.5):
        """dt close to factor*h, rounded so the step count is an integer."""
        n = max(1, int(np.ceil(t_final / (factor * h))))
        return TimeConfig(dt=t_final / n, t_final=t_final)


@dataclass(frozen=True)
class PicardConfig:
    tol_rel: float = 1e-8
    max_iter: int = 50
    adaptive_relaxation: bool = True
    abs_floor: float = 1e-14

    def __post_init__(self):
        if self.tol_rel <= 0.0:
            raise ValueError("tol_rel must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


ESSENTIAL = "essential"
NATURAL = "natural"


@dataclass
class BoundaryConditions:
    """Per-tag condition: ('essential', g) with g(t, pts)->vectors, or
    ('natural', None).  Every tagged boundary face must be covered."""

    conditions: dict

    @staticmethod
    def homogeneous(mesh):
        return BoundaryConditions(
            {t: (ESSENTIAL, None) for t in mesh.tag_names}
        )

    def validate(self, mesh):
        for tag in mesh.tag_names:
            if len(mesh.faces_with_tag(tag)) and tag not in self.conditions:
                raise SolverError(f"boundary tag {tag!r} has no condition")
        for tag, (kind, _) in self.conditions.items():
            if kind not in (ESSENTIAL, NATURAL):
                raise SolverError(f"unknown condition kind {kind!r} for {tag!r}")

    def essential_tags(self):
        return [t for t, (k, _) in self.conditions.items() if k == ESSENTIAL]

    def natural_tags(self):
        return [t for t, (k, _) in self.conditions.items() if k == NATURAL]

    def face_mask(self, mesh):
        """Faces taking part in the viscous sums: all but natural ones."""
        mask = np.ones(mesh.n_faces, dtype=bool)
        for tag in self.natural_tags():
            mask[mesh.faces_with_tag(tag)] = False
        return mask

    def has_natural(self, mesh):
        return any(len(mesh.faces_with_tag(t)) for t in self.natural_tags())

    def constrained_dofs(self, space, t):
        """(dof ids, values): normal moments of the essential data at time t."""
        mesh = space.mesh
        ids, vals = [], []
        rule = edge_rule(10)
        qv = EdgeScalarBasis(1).eval(rule.points[:, 0])
        for tag in self.essential_tags():
            faces = mesh.faces_with_tag(tag)
            if not len(faces):
                continue
            dofs = space.face_dofs(faces)
            g = self.conditions[tag][1]
            if g is None:
                vals.append(np.zeros(len(dofs)))
            else:
                pts, wq = map_to_faces(rule, mesh.face_coords(faces))
                gn = (np.asarray(g(t, pts)) * mesh.face_normals[faces][:, None, :]).sum(
                    axis=-1
                )
                vals.append(np.einsum("fq,qs->fs", wq * gn, qv).ravel())
            ids.append(dofs)
        if not ids:
            return np.array([], dtype=int), np.array([])
        return np.concatenate(ids), np.concatenate(vals)


def solve_saddle_point(K, B, rhs_u, rhs_p, fixed_dofs, fixed_vals,
                       mean_constraint, areas):
    """Direct solve of the constrained saddle system; returns (u, p).

    The continuity rows are scaled by the inverse element areas (so the
    constraint reads div u = 0 directly) and the factored solve is polished
    with one step of iterative refinement; together these keep the
    elementwise divergence at solver roundoff.
    """
    n_u = K.shape[0]
    free = np.setdiff1d(np.arange(n_u), fixed_dofs, assume_unique=False)
    u = np.zeros(n_u)
    u[fixed_dofs] = fixed_vals

    scale = sp.diags(1.0 / areas)
    Bs = scale @ B
    Kff = K[free][:, free]
    Bf = Bs[:, free]
    ru = rhs_u[free] - K[free][:, fixed_dofs] @ fixed_vals
    rp = scale @ rhs_p - Bs[:, fixed_dofs] @ fixed_vals

    if mean_constraint:
        e = sp.csr_matrix(np.ones((B.shape[0], 1)))
        Z = sp.csr_matrix((len(free), 1))
        S = sp.bmat(
            [[Kff, Bf.T, Z], [Bf, None, e], [Z.T, e.T, None]], format="csc"
        )
        rhs = np.concatenate([ru, rp, [0.0]])
    else:
        S = sp.bmat([[Kff, Bf.T], [Bf, None]], format="csc")
        rhs = np.concatenate([ru, rp])

    try:
        lu = spla.splu(S)
        sol = lu.solve(rhs)
        sol += lu.solve(rhs - S @ sol)
    except RuntimeError as exc:
        raise SolverError(
            f"saddle-point factorization failed ({exc}); the velocity or "
            "pressure block is singular on the constrained space"
        ) from exc
    if not np.isfinite(sol).all():
        raise SolverError("saddle-point solve produced non-finite values")

    u[free] = sol[: len(free)]
    p_scaled = sol[len(free): len(free) + B.shape[0]]
    return u, p_scaled / areas


class FlowSolver:
    """Binds assembler, boundary conditions and configs; runs time steps."""

    def __init__(self, assembler, bc, c_f=1e-4, forcing=None,
                 picard=PicardConfig()):
        bc.validate(assembler.mesh)
        self.assembler = assembler
        self.bc = bc
        self.c_f = c_f
        self.forcing = forcing
        self.picard = picard
        self.mass = assembler.mass_matrix()
        self.div_mat = assembler.divergence_matrix()
        self.mean_constraint = not bc.has_natural(assembler.mesh)
        self._newtonian_matrix = None

    def _l2(self, coeffs):
        return float(np.sqrt(max(coeffs @ (self.mass @ coeffs), 0.0)))

    def _viscous(self, w):
        if self.assembler.params.r == 2.0:
            if self._newtonian_matrix is None:
                self._newtonian_matrix = self.assembler.picard_viscous_matrix(w)
            return self._newtonian_matrix
        return self.assembler.picard_viscous_matrix(w)

    def picard_step(self, u_prev, t, dt):
        """One implicit Euler step; returns (u, p, n_iters, increments)."""
        asm = self.assembler
        space = asm.space
        fixed, gvals = self.bc.constrained_dofs(space, t)

        load = (
            asm.load_vector(self.forcing, t)
            if self.forcing is not None
            else np.zeros(space.n_dofs)
        )
        rhs_u_base = self.mass @ u_prev.coeffs / dt + load
        rhs_p = np.zeros(asm.pressure.n_dofs)

        w = u_prev.copy()
        w.coeffs[fixed] = gvals
        relax = 1.0
        increments = []
        for it in range(self.picard.max_iter):
            K = self.mass / dt + self._viscous(w)
            K = K + asm.convection_matrix(w) + asm.upwind_matrix(w, self.c_f)
            ucoef, p = solve_saddle_point(
                K, self.div_mat, rhs_u_base, rhs_p, fixed, gvals,
                self.mean_constraint, asm.pressure.element_areas,
            )
            inc = self._l2(ucoef - w.coeffs)
            scale = max(self._l2(ucoef), self.picard.abs_floor)
            increments.append(inc)
            if self.picard.adaptive_relaxation and it >= 1:
                if inc > increments[-2]:
                    relax = max(0.25 * relax, 0.1)
                elif relax < 1.0:
                    relax = min(2.0 * relax, 1.0)
            if relax < 1.0 and inc > self.picard.tol_rel * scale:
                ucoef = relax * ucoef + (1.0 - relax) * w.coeffs
            w = FEFunction(space, ucoef)
            if inc <= self.picard.tol_rel * scale or inc <= self.picard.abs_floor:
                return w, p, it + 1, increments
        raise PicardNonconvergence(
            f"Picard did not reach tol {self.picard.tol_rel:g} in "
            f"{self.picard.max_iter} iterations at t = {t:g} "
            f"(last increment {increments[-1]:.3e})",
            increments,
        )

    def nonlinear_residual(self, u, p, u_prev, t, dt):
        """Momentum residual of the nonlinear system on the free DOFs."""
        asm = self.assembler
        fixed, _ = self.bc.constrained_dofs(asm.space, t)
        load = (
            asm.load_vector(self.forcing, t)
            if self.forcing is not None
            else np.zeros(asm.space.n_dofs)
        )
        res = (
            self.mass @ (u.coeffs - u_prev.coeffs) / dt
            + asm.viscous_residual(u)
            + asm.convection_matrix(u) @ u.coeffs
            + asm.upwind_matrix(u, self.c_f) @ u.coeffs
            + self.div_mat.T @ p
            - load
        )
        free = np.setdiff1d(np.arange(asm.space.n_dofs), fixed)
        return res[free], load[free]


def run_simulation(solver, u0, time_cfg, callback=None):
    """Advance the flow from u0 over the time grid.

    ``u0`` is an FEFunction or a callable interpolated into the velocity
    space.  Returns the trajectory [(t, u, p)] including the initial state
    (with p = None at t = 0).  ``callback(step, t, u, p)`` runs after each
    accepted step.
    """
    space = solver.assembler.space
    if callable(u0):
        u = rt_interpolate(space, u0)
    else:
        u = u0.copy()
    trajectory = [(0.0, u, None)]
    for n, t in enumerate(time_cfg.times(), start=1):
        try:
            u, p, _, _ = solver.picard_step(u, float(t), time_cfg.dt)
        except SolverError as exc:
            raise SolverError(f"step {n} (t = {t:g}) failed: {exc}") from exc
        p = FEFunction(solver.assembler.pressure, p)
        trajectory.append((float(t), u, p))
        if callback is not None:
            callback(n, float(t), u, p)
    return trajectory
