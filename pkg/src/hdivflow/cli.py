"""Command-line driver.

Subcommands: ``convergence`` (manufactured-solution error study over the
mesh family), ``channel`` (bumped-channel benchmark with cutline export),
``single-run`` (one manufactured run on a chosen mesh, with VTK and
checkpoint output).  Options come from flags, from a JSON config file
mirroring the flag names, or both (flags win).  Identical configurations
produce bit-identical CSV output.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "convergence"
    nu: tuple = (1.0,)
    r: tuple = (2.0,)
    cf: float = 1e-4
    dt: float = None
    tf: float = None
    mesh: str = None
    meshes: int = 3
    out: str = "out"
    jobs: int = 1
    quad_order: int = 6
    eps_reg: float = 1e-10
    picard_tol: float = 1e-8
    picard_max: int = 50
    full: bool = False
    seed: int = 7
    jitter: float = 0.35
    grading: float = 0.35

    def __post_init__(self):
        self.nu = tuple(float(v) for v in np.atleast_1d(self.nu))
        self.r = tuple(float(v) for v in np.atleast_1d(self.r))
        for v in self.nu:
            if v <= 0.0:
                raise ConfigError(f"nu must be positive, got {v}")
        for v in self.r:
            if v <= 1.0:
                raise ConfigError(f"r must exceed 1, got {v}")
        if self.cf <= 0.0:
            raise ConfigError(f"cf must be positive, got {self.cf}")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.tf is not None and self.tf <= 0.0:
            raise ConfigError(f"tf must be positive, got {self.tf}")
        if not 1 <= self.meshes <= 5:
            raise ConfigError(f"meshes must lie in [1, 5], got {self.meshes}")
        if not 1 <= self.quad_order <= 20:
            raise ConfigError(
                f"quad-order must lie in [1, 20], got {self.quad_order}"
            )
        if self.eps_reg < 0.0:
            raise ConfigError(f"eps-reg must be nonnegative, got {self.eps_reg}")
        if self.picard_tol <= 0.0:
            raise ConfigError(f"picard-tol must be positive, got {self.picard_tol}")
        if self.picard_max < 1:
            raise ConfigError(f"picard-max must be at least 1, got {self.picard_max}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")


def _parse_values(text):
    return tuple(float(v) for v in str(text).split(","))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hdivflow",
        description="H(div)-conforming power-law incompressible flow solver",
    )
    parser.add_argument("command", choices=["convergence", "channel", "single-run"])
    parser.add_argument("--config", help="JSON file mirroring the flags")
    parser.add_argument("--nu", type=_parse_values, help="comma-separated values")
    parser.add_argument("--r", type=_parse_values, help="comma-separated values")
    parser.add_argument("--cf", type=float, help="upwind safeguard C_F")
    parser.add_argument("--dt", type=float)
    parser.add_argument("--tf", type=float)
    parser.add_argument("--mesh", help="mesh file for single-run")
    parser.add_argument("--meshes", type=int, help="number of family levels")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int)
    parser.add_argument("--quad-order", dest="quad_order", type=int)
    parser.add_argument("--eps-reg", dest="eps_reg", type=float)
    parser.add_argument("--picard-tol", dest="picard_tol", type=float)
    parser.add_argument("--picard-max", dest="picard_max", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--jitter", type=float)
    parser.add_argument("--grading", type=float)
    parser.add_argument(
        "--full", action="store_true", default=None,
        help="use all five mesh levels in the convergence study",
    )
    return parser


def parse_config(argv=None, file_dict=None):
    """RunConfig from CLI flags and/or a config dictionary."""
    known = {f.name for f in fields(RunConfig)}
    merged = {}
    if argv is not None:
        ns = build_parser().parse_args(argv)
        if ns.config:
            path = Path(ns.config)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            file_dict = json.loads(path.read_text())
        cli = {
            k: v for k, v in vars(ns).items() if k != "config" and v is not None
        }
    else:
        cli = {}
    if file_dict:
        for key in file_dict:
            norm = key.replace("-", "_")
            if norm not in known:
                raise ConfigError(
                    f"unknown config key {key!r}; valid keys: "
                    + ", ".join(sorted(known))
                )
            merged[norm] = file_dict[key]
    merged.update(cli)
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_convergence(cfg):
    from .benchmarks import StudyConfig, convergence_study
    from .export import export_csv
    from .solver import PicardConfig

    levels = 5 if cfg.full else cfg.meshes
    study = StudyConfig(
        nu_values=cfg.nu,
        r_values=cfg.r,
        levels=levels,
        t_final=cfg.tf or 1.0,
        c_f=cfg.cf,
        quad_order=cfg.quad_order,
        eps_reg=cfg.eps_reg,
        picard=PicardConfig(tol_rel=cfg.picard_tol, max_iter=cfg.picard_max),
        jitter=cfg.jitter,
        seed=cfg.seed,
        grading=cfg.grading,
    )
    header, rows = convergence_study(study, jobs=cfg.jobs)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "convergence.csv"
    export_csv(path, header, rows)
    for row in rows:
        print(
            f"nu={row[0]:g} r={row[1]:g} h={row[2]:.4f} velERR={row[4]:.6e} "
            f"preERR={row[5]:.6e} order_vel={row[6]:.3f} order_pre={row[7]:.3f}"
        )
    print(f"wrote {path}")
    return 0


def _cmd_channel(cfg):
    from .benchmarks import ChannelConfig, channel_benchmark
    from .export import export_csv, export_vtk, vertex_averaged_velocity
    from .solver import PicardConfig

    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for nu in cfg.nu:
        for r in cfg.r:
            chan = ChannelConfig(
                nu=nu,
                r=r,
                t_final=cfg.tf or 10.0,
                c_f=cfg.cf,
                quad_order=cfg.quad_order,
                eps_reg=cfg.eps_reg,
                picard=PicardConfig(
                    tol_rel=cfg.picard_tol, max_iter=cfg.picard_max
                ),
            )
            result = channel_benchmark(chan)
            tag = f"r{r:g}_nu{nu:g}".replace(".", "_")
            vtk = outdir / f"channel_{tag}.vtk"
            export_vtk(
                vtk,
                result.mesh,
                cell_data={"pressure": result.pressure.coeffs},
                point_data={
                    "velocity": vertex_averaged_velocity(result.velocity)
                },
            )
            for x, (ys, ux) in result.cutlines.items():
                station = f"x{x:g}".replace(".", "_")
                csv_path = outdir / f"cutline_{station}_{tag}.csv"
                export_csv(
                    csv_path,
                    ["x_station", "y", "ux"],
                    [[float(x), float(y), float(v)] for y, v in zip(ys, ux)],
                )
            print(
                f"r={r:g} nu={nu:g}: mass balance {result.mass_balance:.3e}, "
                f"peaks {result.peak_velocities}, wrote {vtk}"
            )
    return 0


def _cmd_single_run(cfg):
    from .errors import velocity_pressure_errors
    from .export import export_vtk, save_checkpoint, vertex_averaged_velocity
    from .forms import FluxParams, FormAssembler
    from .lifting import LiftingOperators
    from .manufactured import standard_solution
    from .mesh import build_unstructured_mesh, load_mesh
    from .solver import (
        BoundaryConditions,
        FlowSolver,
        PicardConfig,
        TimeConfig,
        run_simulation,
    )
    from .spaces import PressureSpace, VelocitySpace, rt_interpolate

    if cfg.mesh:
        path = Path(cfg.mesh)
        if not path.exists():
            raise ConfigError(f"mesh file not found: {path}")
        mesh = load_mesh(path)
    else:
        from .benchmarks import FAMILY_SIZES

        mesh = build_unstructured_mesh(
            FAMILY_SIZES[cfg.meshes - 1], jitter=cfg.jitter, seed=cfg.seed
        )
    params = FluxParams(nu=cfg.nu[0], r=cfg.r[0], eps_reg=cfg.eps_reg)
    sol = standard_solution(params)
    V, Q = VelocitySpace(mesh), PressureSpace(mesh)
    lifting = LiftingOperators(V, quad_order=cfg.quad_order)
    asm = FormAssembler(V, Q, lifting, params, quad_order=cfg.quad_order)
    solver = FlowSolver(
        asm,
        BoundaryConditions.homogeneous(mesh),
        c_f=cfg.cf,
        forcing=sol.forcing,
        picard=PicardConfig(tol_rel=cfg.picard_tol, max_iter=cfg.picard_max),
    )
    t_final = cfg.tf or 1.0
    tc = (
        TimeConfig(dt=cfg.dt, t_final=t_final)
        if cfg.dt
        else TimeConfig.from_mesh_size(float(mesh.h_elem.mean()), t_final)
    )
    u0 = rt_interpolate(V, lambda p: sol.velocity(0.0, p))
    traj = run_simulation(solver, u0, tc)
    rep = velocity_pressure_errors(traj, sol, params, asm, c_f=cfg.cf)
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    t, u, p = traj[-1]
    export_vtk(
        outdir / "final.vtk",
        mesh,
        cell_data={"pressure": p.coeffs},
        point_data={"velocity": vertex_averaged_velocity(u)},
    )
    save_checkpoint(outdir / f"checkpoint_{tc.n_steps:04d}.txt", tc.n_steps, t, u, p)
    print(
        f"h={rep.h_mean:.4f} dt={rep.dt:.4f} velERR={rep.vel_err:.6e} "
        f"preERR={rep.pre_err:.6e}"
    )
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
        if cfg.command == "convergence":
            return _cmd_convergence(cfg)
        if cfg.command == "channel":
            return _cmd_channel(cfg)
        return _cmd_single_run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # propagate solver failures with context
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
