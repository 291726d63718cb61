"""Quadrature rules on the reference triangle and the unit segment.

Triangle rules are exact for a requested total polynomial degree.  Low
orders use the classical centroid / 3-point rules; higher orders come from
a Duffy (collapsed tensor Gauss) construction, which keeps all weights
positive at any order.  Edge rules are Gauss-Legendre on [0, 1].

Reference triangle: vertices (0,0), (1,0), (0,1), area 1/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_ORDER = 20


@dataclass(frozen=True)
class QuadRule:
    """Points (n, dim) on the reference domain and matching weights (n,)."""

    points: np.ndarray
    weights: np.ndarray
    order: int
    domain: str  # "triangle" | "edge"

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, float)))
        object.__setattr__(self, "weights", np.asarray(self.weights, float))


def edge_rule(order):
    """Gauss-Legendre rule on [0, 1], exact for degree <= order."""
    if order < 0 or order > 2 * MAX_ORDER:
        raise ValueError(f"unsupported edge rule order {order}")
    npts = max(1, (order + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(npts)
    return QuadRule(0.5 * (x[:, None] + 1.0), 0.5 * w, order, "edge")


def triangle_rule(order):
    """Rule on the reference triangle exact for total degree <= order."""
    if order < 0 or order > MAX_ORDER:
        raise ValueError(f"unsupported triangle rule order {order} (max {MAX_ORDER})")
    if order <= 1:
        return QuadRule(np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1, "triangle")
    if order == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return QuadRule(pts, np.full(3, 1 / 6), 2, "triangle")

    # Duffy: x = s (1 - t), y = t with the extra (1 - t) Jacobian factor.
    ns = (order + 2) // 2
    nt = (order + 3) // 2
    xs, ws = np.polynomial.legendre.leggauss(ns)
    xt, wt = np.polynomial.legendre.leggauss(nt)
    s = 0.5 * (xs + 1.0)
    t = 0.5 * (xt + 1.0)
    ss, tt = np.meshgrid(s, t, indexing="ij")
    wgt = 0.25 * np.outer(ws, wt) * (1.0 - tt)
    pts = np.column_stack([(ss * (1.0 - tt)).ravel(), tt.ravel()])
    return QuadRule(pts, wgt.ravel(), order, "triangle")


def reference_monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    from math import factorial

    return factorial(a) * factorial(b) / factorial(a + b + 2)


def map_to_elements(rule, coords):
    """Push a reference-triangle rule to physical elements.

    coords: (ne, 3, 2) vertex coordinates.  Returns points (ne, nq, 2) and
    weights (ne, nq) that include the affine Jacobian.
    """
    lam = rule.points
    shape = np.column_stack([1.0 - lam[:, 0] - lam[:, 1], lam[:, 0], lam[:, 1]])
    pts = np.einsum("qa,eai->eqi", shape, coords)
    d1 = coords[:, 1] - coords[:, 0]
    d2 = coords[:, 2] - coords[:, 0]
    detj = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    wq = np.abs(detj)[:, None] * rule.weights[None, :]
    return pts, wq


def map_to_faces(rule, coords):
    """Push an edge rule to physical segments.

    coords: (nf, 2, 2) endpoint coordinates.  Returns points (nf, nq, 2)
    and weights (nf, nq) scaled by the segment length.
    """
    t = rule.points[:, 0]
    pts = coords[:, None, 0, :] * (1.0 - t)[None, :, None] + coords[
        :, None, 1, :
    ] * t[None, :, None]
    length = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    return pts, length[:, None] * rule.weights[None, :]
