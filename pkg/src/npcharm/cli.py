"""Command-line front end.

Subcommands: space-check, isometry-analyze, solve-cylinder, uniqueness,
bochner-verify, calculus-check.  Every run records its fully-defaulted
config (seed included) in the emitted manifest; identical config and seed
reproduce identical artifact bytes.  Exit codes: 0 pass, 1 acceptance
failure, 2 usage, 3 numerical failure.  NPCH_THREADS caps worker threads
for batch sampling loops.
"""

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .bochner import PolyGenerator, TestMap, check_commutation, check_form4, siu_residual_flat
from .cylinder import (
    SolveParams,
    calculus_weight_check,
    chord_loop,
    solve_punctured_disk,
    sublog_growth_check,
    theta_energy_function,
    uniqueness_probe,
)
from .errors import NpcharmError, UsageError
from .isometries import (
    IsometryDescriptor,
    RigidMotion,
    Sl2Isometry,
    TreeIsometry,
    classify_isometry,
    decay_ray,
    fit_exponential_decay,
    h2_decay_ray,
    measure_displacement,
    min_energy_constant,
    translation_length,
)
from .reports import csv_bytes, emit_reports, json_bytes, section_bytes, space_to_json
from .spaces import Euclidean, Hyperbolic2, MetricTree, SpdManifold, check_cat_kappa, check_npc_inequality
from .spd import GroupElement
from .tree import tree_from_json

DEFAULT_GENERATOR = [
    ((2, 1, 0, 1), [1.0, 0.5j]),
    ((0, 1, 2, 1), [0.25, -1.0]),
    ((1, 1, 1, 1), [0.0, 0.75]),
]


@dataclass
class RunConfig:
    command: str
    space: dict = field(default_factory=dict)
    isometry: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    out: str = "run"
    seed: int = 0


def _load_json_arg(text, what):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON for {what}: {exc}") from exc


def _merge_config_file(parser, sub, argv):
    """Apply --config file values as defaults; flags still override."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    try:
        doc = json.loads(Path(known.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file: {exc}") from exc
    valid = {a.dest for a in sub._actions}
    for key in doc:
        if key not in valid:
            raise UsageError(f"unknown config key {key!r}")
    sub.set_defaults(**doc)


def build_space(args):
    kind = getattr(args, "space", None) or getattr(args, "target", None)
    if kind == "euclidean":
        return Euclidean(int(getattr(args, "dim", 2) or 2))
    if kind == "hyperbolic2":
        return Hyperbolic2()
    if kind == "spd":
        return SpdManifold(int(getattr(args, "n", 2) or 2))
    if kind == "tree":
        path = getattr(args, "tree_file", None)
        if not path:
            raise UsageError("tree spaces need --tree-file")
        return tree_from_json(json.loads(Path(path).read_text()))
    raise UsageError(f"unknown space {kind!r}")


def build_isometry(space, args):
    if isinstance(space, SpdManifold):
        m = np.array(_load_json_arg(args.twist, "--twist"), dtype=float)
        return IsometryDescriptor(space, GroupElement(m))
    if isinstance(space, Hyperbolic2):
        m = np.array(_load_json_arg(args.twist, "--twist"), dtype=float)
        return IsometryDescriptor(space, Sl2Isometry(m))
    if isinstance(space, Euclidean):
        doc = _load_json_arg(args.twist, "--twist")
        return IsometryDescriptor(
            space, RigidMotion(np.array(doc["rotation"], dtype=float), np.array(doc["shift"], dtype=float))
        )
    if isinstance(space, MetricTree):
        doc = _load_json_arg(args.twist, "--twist")
        return IsometryDescriptor(space, TreeIsometry({k: v for k, v in doc.items()}))
    raise UsageError("cannot build twist for this space")


# -- subcommand runners -----------------------------------------------------------

def run_space_check(args):
    space = build_space(args)
    rep = check_npc_inequality(space, args.samples, rng_seed=args.seed)
    checks = {"npc_residual_ok": rep.residual >= -1e-9}
    out = {
        "space": space_to_json(space),
        "samples": rep.samples,
        "npc_residual": rep.residual,
        "seed": args.seed,
    }
    if isinstance(space, (Hyperbolic2, MetricTree)):
        cat = check_cat_kappa(space, args.kappa, args.samples, rng_seed=args.seed)
        out["cat_kappa"] = args.kappa
        out["cat_residual"] = cat.residual
        checks["cat_residual_ok"] = cat.residual >= -1e-9
    _emit(args, {"report.json": json_bytes(out)}, checks)
    return 0 if all(checks.values()) else 1


def run_isometry_analyze(args):
    space = build_space(args)
    iso = build_isometry(space, args)
    ts = np.linspace(0.0, args.tmax, args.steps)
    if isinstance(space, SpdManifold):
        ray, fit = decay_ray(iso.payload, t_max=args.tmax, steps=args.steps)
        points = [ray(t) for t in ts]
    elif isinstance(space, Hyperbolic2):
        rayfn = h2_decay_ray(iso.payload.matrix)
        points = [rayfn(t) for t in ts]
        fit = fit_exponential_decay(measure_displacement(iso, points, ts))
    else:
        raise UsageError("isometry-analyze supports spd and hyperbolic2 spaces")
    series = measure_displacement(iso, points, ts)
    out = {
        "space": space_to_json(space),
        "classification": classify_isometry(iso),
        "translation_length": translation_length(iso),
        "min_energy_constant": min_energy_constant(iso),
        "fit": {"delta": fit.delta, "a": fit.a, "b": fit.b, "r_squared": fit.r_squared,
                "classification": fit.classification},
        "series": [[t, d] for t, d in series],
        "seed": args.seed,
    }
    checks = {"fit_consistent": fit.classification == classify_isometry(iso) or fit.delta >= 0}
    _emit(args, {"report.json": json_bytes(out)}, checks)
    return 0 if all(checks.values()) else 1


def _boundary_for(iso, perturb):
    reparam = (lambda th: perturb * np.sin(th)) if perturb else None
    return chord_loop(iso, s=0.0, reparam=reparam)


def run_solve_cylinder(args):
    space = build_space(args)
    iso = build_isometry(space, args)
    params = SolveParams(
        T0=args.T0,
        doublings=args.doublings,
        n_theta=args.ntheta,
        dt=args.dt,
        cauchy_tol=args.tol,
        sweep_tol=args.sweep_tol,
        seed=args.seed,
    )
    boundary = _boundary_for(iso, args.perturb)
    section, profile = solve_punctured_disk(iso, boundary, params)
    ftrend = theta_energy_function(section, profile.e_rho)
    sublog = sublog_growth_check(section)
    checks = {
        "lower_bound_ok": profile.lower_bound_ok,
        "cauchy_ok": True,
        "f_tail_decreasing": ftrend.decreasing_tail_ok,
    }
    if classify_isometry(iso) == "hyperbolic":
        checks["slope_ok"] = abs(profile.slope_fit - profile.e_rho) <= 0.02 * profile.e_rho
    prof_rows = [
        (t1, t2, e, e / (t2 - t1) - profile.slope_fit) for (t1, t2, e) in profile.annuli
    ]
    report = {
        "config": _config_dict(args),
        "e_rho": profile.e_rho,
        "slope_fit": profile.slope_fit,
        "intercept": profile.intercept,
        "bounded_defect": profile.bounded_defect,
        "modified_energy": profile.modified_energy,
        "cauchy_history": list(getattr(section, "cauchy_history", [])),
        "f_trend": {"t_f_ratio": ftrend.t_f_ratio, "delta_f": ftrend.delta_f,
                    "decreasing_tail_ok": ftrend.decreasing_tail_ok},
        "sublog": {"eps_constants": sublog.eps_constants, "radial_constant": sublog.radial_constant},
        "checks": checks,
    }
    artifacts = {
        "report.json": json_bytes(report),
        "profile.csv": csv_bytes(("t1", "t2", "energy", "slope_residual"), prof_rows),
        "F_of_t.csv": csv_bytes(("t", "F"), ftrend.values),
        "section.bin": section_bytes(section),
    }
    _emit(args, artifacts, checks)
    return 0 if all(checks.values()) else 1


def run_uniqueness(args):
    space = build_space(args)
    iso = build_isometry(space, args)
    params = SolveParams(
        T0=args.T0,
        doublings=args.doublings,
        n_theta=args.ntheta,
        dt=args.dt,
        cauchy_tol=args.tol,
        sweep_tol=args.sweep_tol,
        seed=args.seed,
    )
    boundary = _boundary_for(iso, args.perturb)
    seeds = [s.strip() for s in args.seeds.split(",") if s.strip()]
    rep = uniqueness_probe(iso, boundary, seeds, params)
    checks = {
        "sup_distance_ok": rep.sup_distance <= args.sup_tol,
        "subharmonic_ok": rep.subharmonic_defect >= -3.0 * _subharmonic_slack(rep.sections[0]),
    }
    report = {
        "config": _config_dict(args),
        "seeds": seeds,
        "sup_distance": rep.sup_distance,
        "subharmonic_defect": rep.subharmonic_defect,
        "pair_distances": rep.pair_distances,
        "checks": checks,
    }
    _emit(args, {"report.json": json_bytes(report)}, checks)
    return 0 if all(checks.values()) else 1


def _subharmonic_slack(section):
    h = max(section.grid.h_t, section.grid.h_theta)
    return h**2 * section.lipschitz_bound() ** 2


def run_bochner_verify(args):
    if args.generator:
        gen = PolyGenerator.from_json(json.loads(Path(args.generator).read_text()))
    else:
        gen = PolyGenerator.from_terms(DEFAULT_GENERATOR)
    tm = TestMap(gen, mesh=args.mesh)
    f4 = check_form4(tm)
    comm = check_commutation(tm)
    siu = siu_residual_flat(tm)

    def order_ok(rep):
        return rep.observed_order is None or 1.8 <= rep.observed_order <= 2.2

    checks = {
        "form4_order_ok": order_ok(f4),
        "commutation_order_ok": order_ok(comm),
        "siu_order_ok": order_ok(siu.original) and order_ok(siu.modified),
        "factor_two_ok": siu.factor_two_defect <= 1e-10 + 10.0 * max(siu.original.residual_h, 1e-12),
    }
    report = {
        "generator": gen.to_json(),
        "mesh": args.mesh,
        "form4": vars(f4),
        "commutation": vars(comm),
        "siu_original": vars(siu.original),
        "siu_modified": vars(siu.modified),
        "factor_two_defect": siu.factor_two_defect,
        "checks": checks,
    }
    _emit(args, {"residuals.json": json_bytes(report)}, checks)
    return 0 if all(checks.values()) else 1


_PSI_BUILTINS = {
    "const": lambda c: (lambda r: c),
    "linear": lambda c: (lambda r: c + r),
    "oscillatory": lambda c: (lambda r: c + r**2 * np.sin(1.0 / max(r, 1e-8)) ** 2),
}


def run_calculus_check(args):
    if args.psi_file:
        table = json.loads(Path(args.psi_file).read_text())
        psi = [(row[0], row[1]) for row in table]
    else:
        if args.psi not in _PSI_BUILTINS:
            raise UsageError(f"unknown psi {args.psi!r}")
        psi = _PSI_BUILTINS[args.psi](args.c)
    residual, parts = calculus_weight_check(psi, args.c)
    checks = {"inequality_ok": residual >= -1e-6}
    report = {"psi": args.psi if not args.psi_file else args.psi_file, "c": args.c,
              "residual": residual, "parts": parts, "checks": checks}
    _emit(args, {"report.json": json_bytes(report)}, checks)
    return 0 if all(checks.values()) else 1


# -- plumbing ----------------------------------------------------------------------

def _config_dict(args):
    skip = {"func", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, artifacts, checks):
    out = Path(args.out)
    if out.suffix == ".json":
        if len(artifacts) != 1:
            raise UsageError("--out must be a directory for multi-file reports")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_bytes(next(iter(artifacts.values())))
        return
    emit_reports(artifacts, out, config=_config_dict(args), checks=checks, t0=getattr(args, "_t0", None))


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default="run")


def _add_space_opts(sub, name="--space"):
    sub.add_argument(name, dest=name.strip("-").replace("-", "_"),
                     choices=["euclidean", "hyperbolic2", "spd", "tree"], default="spd")
    sub.add_argument("--dim", type=int, default=2, help="dimension for euclidean spaces")
    sub.add_argument("--n", type=int, default=2, help="matrix size for spd spaces")
    sub.add_argument("--tree-file", help="JSON file with vertices/edges for tree spaces")


def _add_solver_opts(sub):
    sub.add_argument("--twist", required=True, help="isometry payload as JSON")
    sub.add_argument("--T0", type=float, default=10.0)
    sub.add_argument("--doublings", type=int, default=2)
    sub.add_argument("--ntheta", type=int, default=64)
    sub.add_argument("--dt", type=float, default=None)
    sub.add_argument("--tol", type=float, default=1e-6, help="Cauchy tolerance of the exhaustion")
    sub.add_argument("--sweep-tol", type=float, default=1e-9)
    sub.add_argument("--perturb", type=float, default=0.0,
                     help="amplitude of the sin(theta) boundary reparameterization")


def make_parser():
    parser = argparse.ArgumentParser(prog="npcharm", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sc = subs.add_parser("space-check", help="sample the NPC / CAT(-kappa) comparison inequalities")
    _add_space_opts(sc)
    sc.add_argument("--samples", type=int, default=1000)
    sc.add_argument("--kappa", type=float, default=1.0)
    _add_common(sc)
    sc.set_defaults(func=run_space_check)

    ia = subs.add_parser("isometry-analyze", help="classify an isometry and fit its displacement decay")
    _add_space_opts(ia)
    ia.add_argument("--matrix", dest="twist", required=True, help="matrix payload as JSON")
    ia.add_argument("--tmax", type=float, default=40.0)
    ia.add_argument("--steps", type=int, default=400)
    _add_common(ia)
    ia.set_defaults(func=run_isometry_analyze)

    so = subs.add_parser("solve-cylinder", help="equivariant Dirichlet exhaustion on the half-cylinder")
    _add_space_opts(so, "--target")
    _add_solver_opts(so)
    _add_common(so)
    so.set_defaults(func=run_solve_cylinder)

    un = subs.add_parser("uniqueness", help="multi-seed uniqueness probe")
    _add_space_opts(un, "--target")
    _add_solver_opts(un)
    un.add_argument("--seeds", default="prototype,random,constant")
    un.add_argument("--sup-tol", type=float, default=1e-5)
    _add_common(un)
    un.set_defaults(func=run_uniqueness)

    bo = subs.add_parser("bochner-verify", help="flat Bochner identity residuals for a polynomial generator")
    bo.add_argument("--generator", help="JSON generator file")
    bo.add_argument("--mesh", type=int, default=32)
    _add_common(bo)
    bo.set_defaults(func=run_bochner_verify)

    ca = subs.add_parser("calculus-check", help="dyadic-shell weight inequality check")
    ca.add_argument("--psi", default="const", help="const | linear | oscillatory")
    ca.add_argument("--psi-file", help="JSON table [[r, value], ...]")
    ca.add_argument("--c", type=float, default=1.0)
    _add_common(ca)
    ca.set_defaults(func=run_calculus_check)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = make_parser()
    if argv and argv[0] in {s for s in parser._subparsers._group_actions[0].choices}:
        sub = parser._subparsers._group_actions[0].choices[argv[0]]
        try:
            _merge_config_file(parser, sub, argv[1:])
        except UsageError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._t0 = time.perf_counter()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except NpcharmError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
