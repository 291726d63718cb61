"""Result export: legacy ASCII VTK unstructured grids, CSV tables,
coefficient checkpoints.

VTK files carry the pressure as cell data and the velocity as point data
(elementwise values averaged over the elements incident to each vertex).
CSV floats are written with 17 significant digits so a reload reproduces
them bit for bit.
"""

from __future__ import annotations

import csv

import numpy as np


def vertex_averaged_velocity(u):
    """Velocity at mesh vertices, averaged over incident elements."""
    space = u.space
    mesh = space.mesh
    corners = space.basis.eval(
        np.arange(mesh.n_elements), mesh.element_coords()
    )  # (ne, 3, 6, 2)
    vals = np.einsum("eqkc,ek->eqc", corners, u.coeffs[space.element_dofs])
    acc = np.zeros((mesh.n_vertices, 2))
    cnt = np.zeros(mesh.n_vertices)
    np.add.at(acc, mesh.elements.ravel(), vals.reshape(-1, 2))
    np.add.at(cnt, mesh.elements.ravel(), 1.0)
    return acc / cnt[:, None]


def export_vtk(path, mesh, cell_data=None, point_data=None, title="hdivflow"):
    """Write a legacy ASCII VTK unstructured grid of triangles.

    ``cell_data``: name -> (ne,) scalars.  ``point_data``: name -> (nv,)
    scalars or (nv, 2) vectors (padded to 3D).
    """
    ne, nv = mesh.n_elements, mesh.n_vertices
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 4.2\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {nv} double\n")
        for x, y in mesh.vertices:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {ne} {4 * ne}\n")
        for tri in mesh.elements:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
        fh.write(f"CELL_TYPES {ne}\n")
        fh.write("5\n" * ne)
        if cell_data:
            fh.write(f"CELL_DATA {ne}\n")
            for name, vals in cell_data.items():
                fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
                for v in np.asarray(vals):
                    fh.write(f"{v:.17g}\n")
        if point_data:
            fh.write(f"POINT_DATA {nv}\n")
            for name, vals in point_data.items():
                vals = np.asarray(vals)
                if vals.ndim == 2:
                    fh.write(f"VECTORS {name} double\n")
                    for row in vals:
                        fh.write(f"{row[0]:.17g} {row[1]:.17g} 0\n")
                else:
                    fh.write(f"SCALARS {name} double\nLOOKUP_TABLE default\n")
                    for v in vals:
                        fh.write(f"{v:.17g}\n")


def export_csv(path, header, rows):
    """CSV with a header row; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [f"{v:.17g}" if isinstance(v, float) else v for v in row]
            )


def read_csv(path):
    """Header and float-parsed rows (non-numeric cells kept as strings)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = []
            for cell in raw:
                try:
                    row.append(float(cell))
                except ValueError:
                    row.append(cell)
            rows.append(row)
    return header, rows


def save_checkpoint(path, step, t, u, p=None):
    """Plain-text dump of the coefficient vectors with a shape header."""
    with open(path, "w") as fh:
        n_p = 0 if p is None else len(p.coeffs)
        fh.write(f"step {step} t {t:.17g} n_u {len(u.coeffs)} n_p {n_p}\n")
        for v in u.coeffs:
            fh.write(f"{v:.17g}\n")
        if p is not None:
            for v in p.coeffs:
                fh.write(f"{v:.17g}\n")


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns (step, t, u_coeffs, p_coeffs)."""
    with open(path) as fh:
        head = fh.readline().split()
        step, t = int(head[1]), float(head[3])
        n_u, n_p = int(head[5]), int(head[7])
        vals = np.array([float(fh.readline()) for _ in range(n_u + n_p)])
    return step, t, vals[:n_u], vals[n_u:] if n_p else None
