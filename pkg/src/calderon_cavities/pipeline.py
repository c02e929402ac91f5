"""End-to-end reconstruction: scene -> DtN data -> moments -> atoms -> disks."""
from __future__ import annotations

import json
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from shapely.geometry import Point, Polygon
from shapely.ops import unary_union

from .config import SceneConfig
from .forward import DtnPair, assemble_dtn, perturb_measurements
from .geometry import Scene
from .moments import MomentSequence, extract_moments, write_moments_csv
from .prony import (
    AtomicMeasure,
    DiskSet,
    atoms_to_disks,
    inverse_rescale,
    inverse_rescale_measure,
    kappa_from_convention,
    solve_prony,
    suggest_rank,
    write_atoms_csv,
)
from .svg import render_svg


def _c(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


@dataclass
class Reconstruction:
    n_atoms: int
    rank: int
    atoms: list
    disks: list
    residuals: list[float]
    held_out_residual: float
    inside_fraction: float | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class RunReport:
    name: str
    conventions: dict
    moments: list
    suggested_rank: int
    reconstructions: list[Reconstruction]
    timings: dict

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def _shape(curve, samples=512) -> Polygon:
    z = curve.polygon(samples)
    return Polygon(np.column_stack([z.real, z.imag]))


def inside_fraction(disks: DiskSet, cavities) -> float | None:
    """Share of the total disk area that lies inside the true cavities."""
    if not len(disks) or not np.any(disks.radii > 0):
        return None
    target = unary_union([_shape(c) for c in cavities]) if cavities else Polygon()
    total = inside = 0.0
    for center, radius in zip(disks.centers, disks.radii):
        if radius <= 0:
            continue
        disk = Point(center.real, center.imag).buffer(radius, 128)
        total += disk.area
        inside += disk.intersection(target).area
    return inside / total if total > 0 else None


def reconstruct(moments: MomentSequence, n: int, *, rank_tol: float = 1e-10,
                mass_convention="4pi", weight_floor: float | None = None,
                cavities=None) -> tuple[AtomicMeasure, DiskSet, Reconstruction]:
    """Prony solve on the first ``2n`` moments and disks in original coordinates."""
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        measure = solve_prony(moments.values, n, rank_tol=rank_tol)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    tau0 = float(abs(moments.values[0]))
    disks = atoms_to_disks(measure, kappa_from_convention(mass_convention),
                           weight_floor=weight_floor, tau0=tau0)
    rescale = moments.rescale
    measure_orig = inverse_rescale_measure(measure, rescale)
    disks_orig = inverse_rescale(disks, rescale)
    res = measure.residuals
    held_out = float(res[2 * n:].max()) if len(res) > 2 * n else 0.0
    info = Reconstruction(
        n_atoms=n,
        rank=measure.rank,
        atoms=[{"z": _c(z), "c": _c(c)} for z, c in zip(measure_orig.locations, measure_orig.weights)],
        disks=[{"center": _c(z), "radius": float(r)} for z, r in zip(disks_orig.centers, disks_orig.radii)],
        residuals=[float(r) for r in res],
        held_out_residual=held_out,
        inside_fraction=inside_fraction(disks_orig, cavities) if cavities is not None else None,
        warnings=[str(w.message) for w in caught],
    )
    return measure_orig, disks_orig, info


def _suffix(path: str, n: int, many: bool) -> str:
    if not many:
        return path
    p = Path(path)
    return str(p.with_name(f"{p.stem}_n{n}{p.suffix}"))


def compute_moments(cfg: SceneConfig, scene: Scene | None = None,
                    dtn: DtnPair | None = None) -> tuple[MomentSequence, dict]:
    timings = {}
    scene = scene or cfg.scene()
    t0 = time.perf_counter()
    if dtn is None:
        dtn = assemble_dtn(scene, nodes_per_curve=cfg.nodes_per_curve)
    timings["forward_s"] = time.perf_counter() - t0
    if cfg.noise_level > 0:
        dtn = perturb_measurements(dtn, cfg.noise_level, cfg.noise_seed)
    t0 = time.perf_counter()
    moments = extract_moments(dtn, max(cfg.n_atoms), extra=cfg.extra, max_order=cfg.max_order)
    timings["moments_s"] = time.perf_counter() - t0
    return moments, timings


def run_pipeline(cfg: SceneConfig, out_dir: str | Path | None = None, *,
                 write_files: bool = True) -> RunReport:
    out = Path(out_dir if out_dir is not None else cfg.output["dir"])
    scene = cfg.scene()
    original = Scene(cfg.outer, cfg.cavities)
    moments, timings = compute_moments(cfg, scene)
    many = len(cfg.n_atoms) > 1
    recons = []
    t0 = time.perf_counter()
    if write_files:
        out.mkdir(parents=True, exist_ok=True)
        write_moments_csv(out / cfg.output["moments_csv"], moments)
    for n in cfg.n_atoms:
        measure, disks, info = reconstruct(
            MomentSequence(moments.values[: 2 * n + cfg.extra], moments.metadata), n,
            rank_tol=cfg.rank_tol, mass_convention=cfg.mass_convention,
            weight_floor=cfg.weight_floor, cavities=cfg.cavities)
        recons.append(info)
        if write_files:
            write_atoms_csv(out / _suffix(cfg.output["atoms_csv"], n, many), measure, disks)
            render_svg(original, disks, out / _suffix(cfg.output["svg"], n, many),
                       title=f"{cfg.name}, n = {n}")
    timings["prony_s"] = time.perf_counter() - t0
    report = RunReport(
        name=cfg.name,
        conventions={
            "mass_convention": cfg.mass_convention,
            "kappa_mass": kappa_from_convention(cfg.mass_convention),
            "moment_frame": "rescaled",
            "rescale_scale": moments.rescale.scale,
            "rescale_shift": _c(moments.rescale.shift),
            "pairing": "hermitian, conjugate-linear in the second slot",
            "nodes_per_curve": cfg.nodes_per_curve,
            "noise_level": cfg.noise_level,
            "noise_seed": cfg.noise_seed,
        },
        moments=[_c(t) for t in moments.values],
        suggested_rank=suggest_rank(moments.values[: 2 * (len(moments.values) // 2)], cfg.rank_tol),
        reconstructions=recons,
        timings={k: round(v, 6) for k, v in timings.items()},
    )
    if write_files:
        report.write(out / cfg.output["report"])
    return report


def mass_total(report: RunReport, index: int = 0) -> float:
    """Sum of |c| over the atoms of one reconstruction."""
    return float(sum(math.hypot(*a["c"]) for a in report.reconstructions[index].atoms))
