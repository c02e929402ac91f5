"""Harmonic moments of the cavity measure from boundary measurements.

``tau_m = <Q^{m+1}, (Id + R)^{-1} R Q^1>_{1/2} / (m + 1)`` on the outer
curve, where ``Q^m`` is the projected trace of ``z^m``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .forward import DtnPair, measured_interaction
from .geometry import RescaleMap
from .traces import TraceSpace

MAX_ORDER = 64


@dataclass(frozen=True, eq=False)
class MomentSequence:
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError("moments must be a finite 1-D sequence")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, m):
        return self.values[m]

    @property
    def rescale(self) -> RescaleMap:
        return self.metadata.get("rescale", RescaleMap())


def build_Q(space: TraceSpace, m: int) -> np.ndarray:
    """Projected trace of ``z^m`` on the grid of ``space``."""
    if m < 1:
        raise ValueError("harmonic polynomial degree must be >= 1")
    return space.trace0(space.grid.points ** m)


def extract_moments(dtn: DtnPair, n_atoms: int, *, extra: int = 0,
                    max_order: int = MAX_ORDER) -> MomentSequence:
    """Moments ``tau_0 .. tau_{2 n_atoms + extra - 1}`` in the scene's (rescaled) frame.

    ``extra`` hold-out moments are used only to score the atomic fit.
    """
    count = 2 * n_atoms + extra
    if n_atoms < 1 or extra < 0:
        raise ValueError("n_atoms must be >= 1 and extra >= 0")
    if count > max_order:
        raise ValueError(f"{count} moments requested, max order is {max_order}")
    space = dtn.outer_space
    g = measured_interaction(dtn) @ build_Q(space, 1)
    # <Q, g> = sum_j w_j (S^{-1} Q)_j conj(g_j); projecting g first keeps the
    # pairing inside the trace space even with noisy R.
    g = space.project_trace(g)
    wg = np.conj(g) * space.grid.weights
    tau = np.empty(count, dtype=complex)
    for m in range(count):
        q = build_Q(space, m + 1)
        tau[m] = np.sum(space.apply_inverse(q) * wg) / (m + 1)
    meta = {
        "nodes": space.grid.size,
        "noise_level": dtn.noise_level,
        "noise_seed": dtn.noise_seed,
        "rescale": dtn.scene.rescale,
        "extra": extra,
    }
    return MomentSequence(tau, meta)


def write_moments_csv(path: str | Path, moments: MomentSequence) -> None:
    rescale = moments.rescale
    lines = [
        f"# nodes: {moments.metadata.get('nodes', '')}",
        f"# noise_level: {moments.metadata.get('noise_level', 0.0)!r}",
        f"# noise_seed: {moments.metadata.get('noise_seed', '')}",
        f"# rescale_scale: {rescale.scale!r}",
        f"# rescale_shift: {rescale.shift.real!r},{rescale.shift.imag!r}",
        "m,re,im",
    ]
    lines += [f"{m},{t.real:.17g},{t.imag:.17g}" for m, t in enumerate(moments.values)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_moments_csv(path: str | Path) -> MomentSequence:
    meta: dict = {}
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip() and not line.startswith("m,"):
            m, re, im = line.split(",")
            rows.append((int(m), float(re), float(im)))
    rows.sort()
    if [r[0] for r in rows] != list(range(len(rows))):
        raise ValueError(f"{path}: moment orders must be 0..n-1 without gaps")
    scale = float(meta.get("rescale_scale", 1.0))
    sx, _, sy = meta.get("rescale_shift", "0,0").partition(",")
    out = {"rescale": RescaleMap(scale, complex(float(sx), float(sy or 0.0)))}
    if meta.get("noise_level"):
        out["noise_level"] = float(meta["noise_level"])
    return MomentSequence(np.array([complex(r[1], r[2]) for r in rows]), out)
