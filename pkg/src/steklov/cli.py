"""Command line front end: ``steklov <command> [options]``.

Every run writes its artifacts plus ``manifest.json`` into ``--out``.
Exit status is 0 on success, 2 on invalid input (bad shape files, non
diffeomorphic maps, clusters that are not clusters) and 3 on numerical
failure; in the error cases a JSON object describing the error is printed on
stderr.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager, nullcontext

import numpy as np

from . import __version__
from ._validation import check_cluster, check_h, check_level, check_perturbation, check_shape
from .exceptions import SteklovNumericalError, SteklovValidationError
from .fem import assemble, build_disk_mesh, dump_mesh
from .geometry import DiffeoMap
from .oracle import disk_dilation_derivative, disk_eigenvalue
from .shapegrad import (
    Constraint,
    boundary_density,
    constrained_flow,
    criticality_report,
    fd_derivative,
    hadamard_derivative,
)
from .spectrum import Normalization, detect_cluster, renormalize, solve_pencil, sym_functions

logger = logging.getLogger("steklov")

COMMANDS = ("spectrum", "symfun", "shape-grad", "fd-check", "criticality", "flow", "disk-oracle")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
CLI_LEVELS = (2, 7)


def _fmt(x):
    return f"{float(x):.17g}"


class _Run:
    """Collects outputs and stage timings for the manifest."""

    def __init__(self, args):
        self.args = args
        self.out = args.out
        self.files = []
        self.timings = {}
        self.mesh_stats = None
        os.makedirs(self.out, exist_ok=True)

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        yield
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.out, name)

    def write_csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])

    def write_json(self, name, data):
        with open(self.path(name), "w") as fh:
            json.dump(data, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def manifest(self):
        outputs = []
        for name in self.files:
            with open(os.path.join(self.out, name), "rb") as fh:
                outputs.append({"file": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        config = {k: v for k, v in vars(self.args).items() if k != "func"}
        return {
            "config": config,
            "version": __version__,
            "mesh": self.mesh_stats,
            "timings_s": self.timings,
            "outputs": outputs,
        }


def _setup(run, args):
    """Shape, map, mesh and pencil shared by most commands."""
    with run.stage("setup"):
        shape = check_shape(args.shape) if args.shape else check_shape({"rho0": 1.0})
        level = check_level(args.level, *CLI_LEVELS)
        mesh = build_disk_mesh(level)
        run.mesh_stats = mesh.stats()
        if args.dump_mesh:
            dump_mesh(mesh, run.path("mesh.txt"))
        phi = DiffeoMap(shape)
    with run.stage("assemble"):
        pencil = assemble(mesh, phi)
    return shape, mesh, phi, pencil


def _cluster_args(args):
    F = check_cluster(args.cluster)
    h = check_h(args.h, F)
    k = max(args.k, F[-1] + 1)
    return F, h, k


def _solve_cluster(run, args, pencil):
    F, h, k = _cluster_args(args)
    with run.stage("solve"):
        result = solve_pencil(pencil, k)
        cl = detect_cluster(result, F, args.cluster_tol, args.sep_tol)
    return cl, result, F, h


def _pert(args):
    if not args.pert:
        raise SteklovValidationError("this command requires --pert")
    return check_perturbation(args.pert)


def cmd_spectrum(run, args):
    _, _, _, pencil = _setup(run, args)
    with run.stage("solve"):
        result = solve_pencil(pencil, args.k)
    run.write_csv("spectrum.csv", ["index", "lambda"], ((i + 1, lam) for i, lam in enumerate(result.eigenvalues)))


def cmd_symfun(run, args):
    _, _, _, pencil = _setup(run, args)
    cl, _, _, _ = _solve_cluster(run, args, pencil)
    run.write_csv("symfun.csv", ["h", "Lambda"], ((h + 1, v) for h, v in enumerate(sym_functions(cl))))


def _write_density(run, dens):
    run.write_csv("density.csv", ["t", "H", "w", "v2_sum", "gradT2_sum", "g"], dens.rows())


def cmd_shape_grad(run, args):
    _, _, _, pencil = _setup(run, args)
    pert = _pert(args)
    cl, _, F, h = _solve_cluster(run, args, pencil)
    norm = Normalization.parse(args.normalization)
    with run.stage("derivative"):
        value = hadamard_derivative(cl, h, pert, norm)
        dens = boundary_density(renormalize(cl, norm), expected=norm)
    run.write_json(
        "shape_grad.json",
        {
            "cluster": list(F),
            "h": h,
            "normalization": norm.value,
            "lambda_F": cl.lam,
            "Lambda": float(sym_functions(cl)[h - 1]),
            "derivative": value,
        },
    )
    _write_density(run, dens)


def cmd_fd_check(run, args):
    shape, mesh, _, pencil = _setup(run, args)
    pert = _pert(args)
    cl, _, F, h = _solve_cluster(run, args, pencil)
    norm = Normalization.parse(args.normalization)
    with run.stage("derivative"):
        had = hadamard_derivative(cl, h, pert, norm)
    rows = []
    with run.stage("finite-differences"):
        for i in range(args.fd_levels):
            eps = args.eps / 2**i
            fd = fd_derivative(shape, F, h, pert, eps, mesh, sep_tol=args.sep_tol)
            gap = abs(fd - had) / abs(fd) if fd != 0 else float("inf")
            rows.append((eps, fd, had, gap))
    run.write_csv("fd_check.csv", ["eps", "fd", "hadamard", "rel_gap"], rows)


def cmd_criticality(run, args):
    _, _, _, pencil = _setup(run, args)
    cl, _, _, h = _solve_cluster(run, args, pencil)
    with run.stage("criticality"):
        dens = boundary_density(cl)
        rep = criticality_report(cl, args.constraint, h=h, density=dens)
    data = rep.to_dict()
    data.update(lambda_F=cl.lam, bc_residual=dens.bc_residual())
    run.write_json("criticality.json", data)
    _write_density(run, dens)


def cmd_flow(run, args):
    shape, mesh, _, _ = _setup(run, args)
    F, h, _ = _cluster_args(args)
    with run.stage("flow"):
        records = constrained_flow(
            shape,
            mesh,
            F=F,
            h=h,
            constraint=Constraint.parse(args.constraint),
            steps=args.steps,
            step_size=args.step_size,
            n_modes=args.n_modes,
            gtol=args.gtol,
        )
    run.write_csv(
        "flow.csv",
        ["step", "Lambda", "residual", "volume", "perimeter", "mode_energy"],
        (r.row() for r in records),
    )
    run.write_json("final_shape.json", records[-1].shape.to_dict())


def cmd_disk_oracle(run, args):
    R = check_shape(args.shape).rho0 if args.shape else 1.0
    with run.stage("oracle"):
        rows = [
            (n, 1 if n == 0 else 2, disk_eigenvalue(n, R), disk_dilation_derivative(n, R))
            for n in range(args.k)
        ]
    run.write_csv("disk_oracle.csv", ["n", "multiplicity", "lambda", "dlambda_dR"], rows)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "symfun": cmd_symfun,
    "shape-grad": cmd_shape_grad,
    "fd-check": cmd_fd_check,
    "criticality": cmd_criticality,
    "flow": cmd_flow,
    "disk-oracle": cmd_disk_oracle,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--shape", help="shape JSON file (default: unit disk)")
    common.add_argument("--pert", help="perturbation JSON file")
    common.add_argument("--level", type=int, default=5, help="mesh refinement level, 2..7")
    common.add_argument("--k", type=int, default=6, help="number of eigenvalues")
    common.add_argument("--cluster", default="1", help="1-based cluster indices, e.g. 2,3")
    common.add_argument("--h", type=int, default=1, help="order of the symmetric function")
    common.add_argument("--normalization", default="sobolev", choices=[n.value for n in Normalization])
    common.add_argument("--constraint", default="volume", choices=[c.value for c in Constraint])
    common.add_argument("--steps", type=int, default=200)
    common.add_argument("--step-size", type=float, default=1.0)
    common.add_argument("--n-modes", type=int, default=None, help="Fourier modes used by the flow")
    common.add_argument("--gtol", type=float, default=1e-6)
    common.add_argument("--eps", type=float, default=1e-3, help="largest finite-difference step")
    common.add_argument("--fd-levels", type=int, default=4, help="number of halvings of --eps")
    common.add_argument("--cluster-tol", type=float, default=1e-4)
    common.add_argument("--sep-tol", type=float, default=1e-2)
    common.add_argument("--seed", type=int, default=0, help="recorded in the manifest")
    common.add_argument("--dump-mesh", action="store_true", help="also write mesh.txt")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="steklov", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _thread_limit():
    n = os.environ.get("STEKLOV_THREADS")
    if not n:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(n))


def _error_json(exc):
    info = {"error": type(exc).__name__, "message": str(exc)}
    if getattr(exc, "field", None) is not None:
        info["field"] = exc.field
    if getattr(exc, "eigenvalues", None):
        info["eigenvalues"] = [float(v) for v in exc.eigenvalues]
    return json.dumps(info)


def run(args):
    """Execute a parsed command; returns the exit status."""
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        with _thread_limit():
            r = _Run(args)
            HANDLERS[args.command](r, args)
            r.write_json("manifest.json", r.manifest())
    except SteklovValidationError as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except SteklovNumericalError as exc:
        print(_error_json(exc), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
