"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
The number of BLAS threads can be capped with ``CAVITY_THREADS``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import load_config
from .errors import CavityError, ConfigError, OracleNotApplicable, SingularSystem
from .forward import assemble_dtn, perturb_measurements, write_matrix_csv
from .geometry import Scene
from .moments import read_moments_csv, write_moments_csv
from .oracles import (
    LaurentMap,
    build_two_disk_series,
    conformal_moments,
    scene_oracle_kind,
    two_disk_measure,
    write_series_csv,
)
from .pipeline import compute_moments, reconstruct, run_pipeline
from .prony import DiskSet, read_atoms_csv, write_atoms_csv
from .svg import render_svg

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
THREADS_ENV = "CAVITY_THREADS"
ORACLE_TOL = 1e-4


def _override(cfg, args):
    """Apply command-line overrides to a parsed config."""
    changes = {}
    if getattr(args, "n", None):
        changes["n_atoms"] = tuple(args.n)
    if getattr(args, "nodes", None):
        if args.nodes % 2:
            raise ConfigError("--nodes must be even")
        changes["nodes_per_curve"] = args.nodes
    if getattr(args, "noise_level", None) is not None:
        changes["noise_level"] = args.noise_level
    if getattr(args, "seed", None) is not None:
        changes["noise_seed"] = args.seed
    if getattr(args, "rank_tol", None) is not None:
        changes["rank_tol"] = args.rank_tol
    if getattr(args, "weight_floor", None) is not None:
        changes["weight_floor"] = args.weight_floor
    if getattr(args, "mass_convention", None):
        changes["mass_convention"] = args.mass_convention
    if getattr(args, "extra", None) is not None:
        changes["extra"] = args.extra
    cfg = replace(cfg, **changes)
    if 2 * max(cfg.n_atoms) + cfg.extra > cfg.max_order:
        raise ConfigError("requested moment count exceeds max_order")
    return cfg


def _out_dir(cfg, args) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_pipeline(args) -> int:
    cfg = _override(load_config(args.config), args)
    out = _out_dir(cfg, args)
    report = run_pipeline(cfg, out)
    for r in report.reconstructions:
        frac = "-" if r.inside_fraction is None else f"{r.inside_fraction:.3f}"
        print(f"n={r.n_atoms:3d} rank={r.rank:3d} atoms={len(r.atoms):3d} "
              f"held-out residual={r.held_out_residual:.3e} inside={frac}")
    print(f"suggested n: {report.suggested_rank}")
    print(f"report: {out / cfg.output['report']}")
    return EXIT_OK


def cmd_forward(args) -> int:
    cfg = _override(load_config(args.config), args)
    out = _out_dir(cfg, args)
    scene = cfg.scene()
    dtn = assemble_dtn(scene, nodes_per_curve=cfg.nodes_per_curve)
    if cfg.noise_level > 0:
        dtn = perturb_measurements(dtn, cfg.noise_level, cfg.noise_seed)
    meta = {"nodes": cfg.nodes_per_curve, "rescale_scale": repr(scene.rescale.scale),
            "rescale_shift": f"{scene.rescale.shift.real!r},{scene.rescale.shift.imag!r}",
            "noise_level": repr(cfg.noise_level), "noise_seed": cfg.noise_seed}
    for name, op in (("lambda_gamma", dtn.lambda_gamma), ("lambda_0", dtn.lambda_0), ("R", dtn.R)):
        write_matrix_csv(out / f"{name}.csv", np.real(op.matrix), meta)
    nodes = dtn.outer_grid.points
    write_matrix_csv(out / "outer_nodes.csv", np.column_stack([nodes.real, nodes.imag]), meta)
    print(f"wrote lambda_gamma.csv, lambda_0.csv, R.csv, outer_nodes.csv to {out}")
    return EXIT_OK


def cmd_moments(args) -> int:
    cfg = _override(load_config(args.config), args)
    out = _out_dir(cfg, args)
    moments, _ = compute_moments(cfg)
    path = out / cfg.output["moments_csv"]
    write_moments_csv(path, moments)
    print(f"wrote {len(moments)} moments to {path}")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    moments = read_moments_csv(args.moments)
    n = args.n[0] if args.n else len(moments) // 2
    if len(moments) < 2 * n:
        raise ConfigError(f"{args.moments} holds {len(moments)} moments, n={n} needs {2 * n}")
    measure, disks, info = reconstruct(moments, n, rank_tol=args.rank_tol or 1e-10,
                                       mass_convention=args.mass_convention or "4pi",
                                       weight_floor=args.weight_floor)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    write_atoms_csv(out / "atoms.csv", measure, disks)
    if args.config:
        cfg = load_config(args.config)
        render_svg(Scene(cfg.outer, cfg.cavities), disks, out / "reconstruction.svg",
                   title=f"{cfg.name}, n = {n}")
    print(f"rank {info.rank}, {len(info.atoms)} atoms; held-out residual {info.held_out_residual:.3e}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = _override(load_config(args.config), args)
    out = _out_dir(cfg, args)
    scene = cfg.scene()
    kind = scene_oracle_kind(scene)
    count = args.m_max + 1
    if kind == "conformal":
        ref = conformal_moments(LaurentMap.from_curve(scene.cavities[0]), args.m_max).values
        atoms = None
    else:
        c1, c2 = scene.cavities
        series = build_two_disk_series(c1.center, c1.radius, c2.center, c2.radius)
        measure = two_disk_measure(series)
        ref = measure.moments(count)
        write_series_csv(out / "two_disk_series.csv", series)
        atoms = [{"z": [z.real, z.imag], "c": [c.real, c.imag]}
                 for z, c in zip(measure.locations, measure.weights)]
    cfg_n = replace(cfg, n_atoms=((count + 1) // 2,), extra=count % 2)
    pipe, _ = compute_moments(cfg_n, scene)
    pipe = pipe.values[:count]
    rel = np.abs(pipe - ref) / np.maximum(np.abs(ref), 1e-300)
    lines = ["m,re_oracle,im_oracle,re_pipeline,im_pipeline,rel_diff"]
    for m in range(count):
        lines.append(f"{m},{ref[m].real:.17g},{ref[m].imag:.17g},"
                     f"{pipe[m].real:.17g},{pipe[m].imag:.17g},{rel[m]:.3e}")
    (out / "oracle_comparison.csv").write_text("\n".join(lines) + "\n")
    verdict = "PASS" if rel.max() < ORACLE_TOL else "FAIL"
    summary = {"oracle": kind, "max_rel_diff": float(rel.max()), "tolerance": ORACLE_TOL,
               "verdict": verdict, "frame": "rescaled", "oracle_atoms": atoms}
    (out / "oracle_report.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(f"{kind} oracle: max relative difference {rel.max():.3e} -> {verdict}")
    return EXIT_OK


def cmd_render(args) -> int:
    cfg = load_config(args.config)
    if args.atoms:
        _, disks = read_atoms_csv(args.atoms)
    else:
        disks = DiskSet(np.zeros(0), np.zeros(0))
    path = render_svg(Scene(cfg.outer, cfg.cavities), disks, args.svg, title=cfg.name)
    print(f"wrote {path}")
    return EXIT_OK


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="output directory (default: config output.dir)")
    p.add_argument("--n", type=int, nargs="+", help="number(s) of atoms")
    p.add_argument("--nodes", type=int, help="nodes per curve (even)")
    p.add_argument("--noise-level", type=float, help="multiplicative noise on R")
    p.add_argument("--seed", type=int, help="noise seed")
    p.add_argument("--extra", type=int, help="held-out moments beyond 2n")
    p.add_argument("--rank-tol", type=float, help="relative SVD cut of the Hankel matrix")
    p.add_argument("--weight-floor", type=float, help="|c| below which an atom has zero radius")
    p.add_argument("--mass-convention", choices=["2pi", "4pi"], help="mass per unit disk area")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavities",
                                     description="Reconstruct conducting cavities from DtN data.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, func, helptext in (
            ("pipeline", cmd_pipeline, "full reconstruction from a scene config"),
            ("forward", cmd_forward, "dump Lambda_gamma, Lambda_0 and R"),
            ("moments", cmd_moments, "write the moment sequence"),
            ("oracle", cmd_oracle, "compare pipeline moments with a closed-form reference")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        _add_overrides(p)
        if name == "oracle":
            p.add_argument("--m-max", type=int, default=8)
        p.set_defaults(func=func)

    p = sub.add_parser("reconstruct", help="atoms from a moment CSV")
    p.add_argument("moments")
    p.add_argument("--config", help="scene config, only used to draw the SVG")
    p.add_argument("--out")
    p.add_argument("--n", type=int, nargs=1)
    p.add_argument("--rank-tol", type=float)
    p.add_argument("--weight-floor", type=float)
    p.add_argument("--mass-convention", choices=["2pi", "4pi"])
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("render", help="draw a scene and optional atoms CSV")
    p.add_argument("config")
    p.add_argument("--atoms")
    p.add_argument("--svg", required=True)
    p.set_defaults(func=cmd_render)
    return parser


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning ({category.__name__}): {message}", file=sys.stderr)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    warnings.showwarning = _show_warning
    threads = os.environ.get(THREADS_ENV)
    limit = threadpool_limits(int(threads)) if threads else nullcontext()
    try:
        with limit:
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OracleNotApplicable as exc:
        print(f"oracle not applicable: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularSystem, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CavityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
