"""Command-line driver: ``vemspectra {mesh gen, solve, adapt, report}``."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiments as ex
from . import mesh as meshes
from .eig import solve_smallest
from .report import emit_report, fmt
from .vem import STABILIZATIONS, Material, assemble, dump_matrices

_REFINEMENT = {"vem": "adaptive-vem", "fem": "adaptive-fem", "uniform": "uniform"}


def _material_args(p: argparse.ArgumentParser, rho: float, young: float, poisson: float) -> None:
    p.add_argument("--rho", type=float, default=rho, help="density")
    p.add_argument("--young", type=float, default=young, help="Young modulus")
    p.add_argument("--poisson", type=float, default=poisson, help="Poisson ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vemspectra", description="Elastic vibration modes with lowest-order virtual elements."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mesh_p = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = mesh_p.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_sub.add_parser("gen", help="generate a mesh file")
    gen.add_argument("--family", choices=("trapezoid", "hexagon", "triangle", "vessel"), required=True)
    gen.add_argument("--n", type=int, default=4, help="elements per side (ignored for vessel)")
    gen.add_argument("--dirichlet", choices=("bottom", "outer"), default="bottom", help="vessel fixed part")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output JSON mesh file")

    solve = sub.add_parser("solve", help="lowest vibration frequencies of one mesh")
    src = solve.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="JSON mesh file")
    src.add_argument("--family", choices=("trapezoid", "hexagon", "triangle", "vessel"))
    solve.add_argument("--n", type=int, default=16)
    solve.add_argument("--num-modes", type=int, default=6)
    solve.add_argument("--eig-tol", type=float, default=1e-9)
    solve.add_argument("--stabilization", choices=STABILIZATIONS, default="mean")
    solve.add_argument("--dump-matrices", metavar="DIR", help="write stiffness/mass as 'row col value'")
    solve.add_argument("--json", action="store_true", help="print a JSON record instead of text")
    _material_args(solve, 7.7e3, 1.44e11, 0.35)

    adapt = sub.add_parser("adapt", help="adaptive refinement loop on the vessel")
    adapt.add_argument("--domain", choices=("vessel",), default="vessel")
    adapt.add_argument("--strategy", choices=tuple(_REFINEMENT), default="vem")
    adapt.add_argument("--max-dofs", type=int, default=25_000)
    adapt.add_argument("--mark-fraction", type=float, default=0.5)
    adapt.add_argument("--omega-ref", type=float, default=0.1538)
    adapt.add_argument("--dirichlet", choices=("bottom", "outer"), default="bottom")
    adapt.add_argument("--stabilization", choices=STABILIZATIONS, default="mean")
    adapt.add_argument("--eig-tol", type=float, default=1e-7)
    adapt.add_argument("--out", required=True, help="output directory")
    _material_args(adapt, 1.0, 1.0, 0.35)

    rep = sub.add_parser("report", help="run a configured study and write tables and figures")
    which = rep.add_mutually_exclusive_group(required=True)
    which.add_argument("--config", help="JSON experiment configuration")
    which.add_argument("--preset", choices=ex.PRESETS)
    rep.add_argument("--out", help="output directory (overrides the config)")
    rep.add_argument("--format", action="append", choices=("csv", "json", "svg"), help="repeatable")
    rep.add_argument("--sizes", type=int, nargs="+", help="override mesh sizes")
    rep.add_argument("--max-dofs", type=int, help="override the DOF cap")
    return parser


def _cmd_mesh_gen(args) -> int:
    if args.family == "vessel":
        mesh = meshes.generate_vessel_mesh(args.dirichlet)
    else:
        mesh = ex.build_mesh(args.family, args.n, seed=args.seed)
    mesh.validate()
    mesh.save(args.out)
    print(f"{args.family}: {mesh.num_vertices} vertices, {mesh.num_elements} elements -> {args.out}")
    return 0


def _cmd_solve(args) -> int:
    if args.mesh:
        mesh = meshes.PolyMesh.load(args.mesh)
    elif args.family == "vessel":
        mesh = meshes.generate_vessel_mesh()
    else:
        mesh = ex.build_mesh(args.family, args.n)
    material = Material(args.rho, args.young, args.poisson)
    system = assemble(mesh, material, args.stabilization)
    if args.dump_matrices:
        dump_matrices(system, args.dump_matrices)
    if system.num_free == 0:
        print("no free degrees of freedom")
        return 0
    m = min(args.num_modes, system.num_free)
    sol = solve_smallest(system.stiffness, system.mass, m, tol=args.eig_tol, scale=material.rho)
    if args.json:
        rec = {
            "num_dofs": system.num_free,
            "eigenvalues": [float(v) for v in sol.eigenvalues],
            "frequencies": [float(v) for v in sol.frequencies],
            "residuals": [float(v) for v in sol.residuals],
        }
        print(json.dumps(rec, indent=2))
    else:
        print(f"N = {system.num_free}")
        print("mode,omega,lambda,residual")
        for i, (w, lam, r) in enumerate(zip(sol.frequencies, sol.eigenvalues, sol.residuals), 1):
            print(f"{i},{fmt(w)},{fmt(lam)},{r:.2e}")
    return 0


def _cmd_adapt(args) -> int:
    cfg = ex.ExperimentConfig(
        name=f"vessel_{args.strategy}",
        domain=args.domain,
        family="triangle",
        refinement=[_REFINEMENT[args.strategy]],
        rho=args.rho,
        young=args.young,
        poisson=args.poisson,
        num_modes=1,
        sizes=[],
        max_dofs=args.max_dofs,
        mark_fraction=args.mark_fraction,
        omega_ref=[args.omega_ref],
        output_dir=args.out,
        stabilization=args.stabilization,
        dirichlet=args.dirichlet,
        eig_tol=args.eig_tol,
    )
    print(",".join(("step", "N", "omega_h1", "eta2", "effectivity")))

    def progress(step):
        r = step.report
        print(f"{step.step},{step.num_dofs},{fmt(step.omega)},{fmt(r.eta2)},{fmt(r.effectivity)}", flush=True)

    run = ex.run_adaptive(cfg, cfg.refinement[0], callback=progress)
    result = ex.Test2Result(cfg, [run])
    files = emit_report(result, args.out)
    if run.slope is not None:
        print(f"error ~ N^{run.slope:.3f}")
    for f in files:
        print(f"wrote {f}")
    return 0


def _cmd_report(args) -> int:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.preset(args.preset)
    if args.sizes:
        cfg.sizes = list(args.sizes)
    if args.max_dofs:
        cfg.max_dofs = args.max_dofs
    if args.out:
        cfg.output_dir = args.out
    cfg.validate()
    result = ex.run(cfg)
    formats = tuple(args.format) if args.format else ("csv", "json", "svg")
    files = emit_report(result, cfg.output_dir, formats)
    if isinstance(result, ex.Test2Result):
        for run in result.runs:
            slope = "n/a" if run.slope is None else f"{run.slope:.3f}"
            print(f"{run.refinement}: {len(run.steps)} steps, final N = {run.steps[-1].num_dofs}, slope {slope}")
    else:
        for i, fit in enumerate(result.fits, 1):
            if fit is not None:
                print(f"mode {i}: order {fit.order:.3f}, extrapolated {fit.limit:.6g}")
    for f in files:
        print(f"wrote {f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"mesh": _cmd_mesh_gen, "solve": _cmd_solve, "adapt": _cmd_adapt, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # every failure becomes a diagnostic and a nonzero exit
        print(f"vemspectra {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
