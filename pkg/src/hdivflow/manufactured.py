"""Manufactured velocity/pressure pairs and the matching body force.

Fields are given as sympy expressions in (t, x, y); every derivative the
force needs is derived symbolically and lambdified once.  The body force
completes the momentum balance

    f = du/dt - div sigma(grad u) + (u . grad) u + grad p,

where the flux divergence is expanded by the chain rule,

    (div sigma)_i = nu m^(r-2) lap(u_i)
                    + nu (r-2) m^(r-4) sum_j (grad u : d_j grad u) d_j u_i,

with the regularized modulus m = sqrt(|grad u|^2 + eps^2) protecting the
r < 2 case at isolated critical points of |grad u|.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

_T, _X, _Y = sp.symbols("t x y")


def _lambdify(expr):
    fn = sp.lambdify((_T, _X, _Y), expr, modules="numpy")

    def wrapped(t, x, y):
        out = fn(t, x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.shape(x)).copy()

    return wrapped


class ManufacturedSolution:
    """Divergence-free exact solution with symbolic derivatives."""

    def __init__(self, u_exprs, p_expr, params):
        self.params = params
        u1, u2 = sp.sympify(u_exprs[0]), sp.sympify(u_exprs[1])
        p = sp.sympify(p_expr)
        xs = (_X, _Y)

        self._u = [_lambdify(u1), _lambdify(u2)]
        self._p = _lambdify(p)
        self._dtu = [_lambdify(sp.diff(c, _T)) for c in (u1, u2)]
        self._gradu = [
            [_lambdify(sp.diff(c, v)) for v in xs] for c in (u1, u2)
        ]
        self._d2u = [
            [[_lambdify(sp.diff(c, a, b)) for b in xs] for a in xs]
            for c in (u1, u2)
        ]
        self._gradp = [_lambdify(sp.diff(p, v)) for v in xs]
        self._div_expr = sp.simplify(sp.diff(u1, _X) + sp.diff(u2, _Y))

    # -- pointwise evaluation (pts has shape (..., 2)) ----------------------

    def velocity(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([f(t, x, y) for f in self._u], axis=-1)

    def pressure(self, t, pts):
        return self._p(t, pts[..., 0], pts[..., 1])

    def velocity_gradient(self, t, pts):
        """grad u with entries (i, j) = d u_i / d x_j, shape (..., 2, 2)."""
        x, y = pts[..., 0], pts[..., 1]
        rows = [np.stack([g(t, x, y) for g in row], axis=-1) for row in self._gradu]
        return np.stack(rows, axis=-2)

    def time_derivative(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([f(t, x, y) for f in self._dtu], axis=-1)

    def pressure_gradient(self, t, pts):
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([f(t, x, y) for f in self._gradp], axis=-1)

    def second_derivatives(self, t, pts):
        """d^2 u_i / (d x_a d x_b), shape (..., 2, 2, 2) indexed [i, a, b]."""
        x, y = pts[..., 0], pts[..., 1]
        return np.stack(
            [
                np.stack(
                    [np.stack([f(t, x, y) for f in row], axis=-1) for row in comp],
                    axis=-2,
                )
                for comp in self._d2u
            ],
            axis=-3,
        )

    def flux_of_gradient(self, t, pts):
        """sigma(grad u) with the regularized modulus, shape (..., 2, 2)."""
        from .forms import power_law_flux

        return power_law_flux(self.velocity_gradient(t, pts), self.params)

    def flux_divergence(self, t, pts):
        """div sigma(grad u) by the chain rule, shape (..., 2)."""
        params = self.params
        g = self.velocity_gradient(t, pts)  # (..., i, j) = d u_i / d x_j
        d2 = self.second_derivatives(t, pts)  # (..., i, a, b)
        m2 = (g**2).sum(axis=(-2, -1)) + params.eps_reg**2
        lap = d2[..., 0, 0] + d2[..., 1, 1]  # (..., i)
        out = params.nu * m2[..., None] ** (0.5 * (params.r - 2.0)) * lap
        if params.r != 2.0:
            # c_j = grad u : d_j grad u = sum_{a,b} (d_b u_a)(d_j d_b u_a)
            c = np.einsum("...ab,...abj->...j", g, d2)
            out = out + params.nu * (params.r - 2.0) * m2[..., None] ** (
                0.5 * (params.r - 4.0)
            ) * np.einsum("...ij,...j->...i", g, c)
        return out

    def forcing(self, t, pts):
        """f = du/dt - div sigma(grad u) + (u . grad) u + grad p."""
        u = self.velocity(t, pts)
        g = self.velocity_gradient(t, pts)
        conv = np.einsum("...j,...ij->...i", u, g)
        return (
            self.time_derivative(t, pts)
            - self.flux_divergence(t, pts)
            + conv
            + self.pressure_gradient(t, pts)
        )

    def check_divergence_free(self, n_points=50, seed=0, tol=1e-10):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0.05, 0.95, size=(n_points, 2))
        ts = rng.uniform(0.0, 1.0, size=n_points)
        vals = [
            float(self._gradu[0][0](t, p[0], p[1]) + self._gradu[1][1](t, p[0], p[1]))
            for t, p in zip(ts, pts)
        ]
        return max(abs(v) for v in vals) <= tol


def standard_solution(params):
    """The smooth unit-square benchmark fields (slowly growing in time)."""
    u1 = "exp(t/10) * 16 * y * (1 - y) * (1 - 2*y) * sin(pi*x)**2"
    u2 = "-exp(t/10) * 8 * pi * y**2 * (1 - y)**2 * sin(2*pi*x)"
    p = "exp(t/10) * sin(pi*x) * cos(pi*y)"
    return ManufacturedSolution((u1, u2), p, params)
