"""Pseudo surface plasmon resonant fields and boundary-defect sensing.

A Herglotz wave approximating a transmission eigenfunction ``v`` illuminates a
medium with ``n < 1``.  The field ``w_hat`` equal to the total field inside the
scatterer and to the scattered field outside then inherits the surface
localization of the interior eigenfunction ``w``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import farfield as ff
from . import forward as fw
from . import radial as rd

KERNEL_NODES = 256
EIGEN_RTOL = 1e-3
OUTER_FACTOR = 1.5


class PsprError(ValueError):
    """Invalid PSPR or defect-experiment input."""


def kernel_for_disk_mode(m: int, k: float, nodes: int = KERNEL_NODES) -> ff.HerglotzKernel:
    """Kernel ``e^{i m theta} / (2 pi i^m)`` whose Herglotz wave is ``J_m(k r) e^{i m phi}``."""
    if not k > 0:
        raise PsprError("wavenumber must be positive")
    dirs = ff.DirectionSet(nodes)
    return ff.HerglotzKernel(k, dirs, np.exp(1j * m * dirs.angles) / (2 * math.pi * 1j**m))


def check_near_eigenvalue(k: float, k_eig: float, rtol: float = EIGEN_RTOL) -> None:
    if abs(k - k_eig) > rtol * k_eig:
        raise PsprError(f"k = {k} is not within {rtol:g} k_eig of the eigenvalue {k_eig}")


def disk_sle_eigenpair(n: float, m: int, r0: float = 1.0, k_max: float = 20.0) -> rd.RadialEigenpair:
    """Smallest order-``m`` eigenpair of a disk with ``0 < n < 1``, located through the dual index."""
    dual = rd.dual_small_n(rd.RadialMedium(n, r0))
    pairs = [p for p in rd.find_radial_eigs(dual.dual, 1e-3, n * k_max, m + 1) if p.m == m]
    if not pairs:
        raise PsprError(f"no order-{m} eigenvalue below {k_max}")
    return rd.eigenpair_at(dual.original, m, dual.to_original(pairs[0].k))


@dataclass(frozen=True, eq=False)
class PsprField:
    """``w_hat`` on the solver grid with the inside / outer-annulus partition."""

    grid: fw.SamplingGrid
    w_hat: np.ndarray
    inside: np.ndarray
    annulus: np.ndarray
    norm_inside: float
    norm_annulus: float
    localization: rd.LocalizationReport
    k: float
    residual: float

    def __post_init__(self):
        if np.any(self.inside & self.annulus):
            raise PsprError("inside and annulus masks overlap")
        if self.norm_inside < 0 or self.norm_annulus < 0:
            raise PsprError("norms must be nonnegative")

    @property
    def region(self) -> np.ndarray:
        return self.inside | self.annulus


def _l2(values: np.ndarray, mask: np.ndarray, h: float) -> float:
    return float(h * np.linalg.norm(values[mask]))


def outer_region(grid: fw.SamplingGrid, inside: np.ndarray, radius: float | None = None) -> np.ndarray:
    """Cells outside the support within ``radius`` of its centroid (default 1.5x circumradius)."""
    pts = grid.points()
    sup = pts[inside.ravel()]
    c = sup.mean(axis=0)
    if radius is None:
        radius = OUTER_FACTOR * (float(np.max(np.linalg.norm(sup - c, axis=1))) + grid.h / math.sqrt(2))
    near = (np.linalg.norm(pts - c, axis=1) <= radius).reshape(grid.shape)
    return near & ~inside


def generate_pspr(
    medium: fw.RefractiveField,
    kernel: ff.HerglotzKernel,
    k: float,
    eps0: float = 0.1,
    outer_radius: float | None = None,
    tol: float = fw.DEFAULT_TOL,
    support: np.ndarray | None = None,
) -> PsprField:
    """Solve with Herglotz incidence and assemble ``w_hat = u`` inside, ``u - u^i`` outside.

    ``support`` marks the cells of the scatterer (default: the nonzero-contrast cells);
    passing it explicitly allows a background control with ``n^2 = 1``.
    """
    inside = medium.mask if support is None else np.asarray(support, dtype=bool)
    if inside.shape != medium.grid.shape or not inside.any():
        raise PsprError("support must be a nonempty mask on the medium grid")
    tot = fw.solve_forward(medium, fw.IncidentField.herglotz(k, kernel), tol)
    w_hat = np.where(inside, tot.u, tot.u_scattered)
    annulus = outer_region(medium.grid, inside, outer_radius)
    h = medium.grid.h
    # distance of interior cell centres to the support edge
    dist = ndimage.distance_transform_edt(inside) * h - 0.5 * h
    report = rd.localization_ratio(w_hat[inside], eps0, "w", dist=dist[inside])
    return PsprField(medium.grid, w_hat, inside, annulus, _l2(w_hat, inside, h), _l2(w_hat, annulus, h), report, k, tot.residual)


@dataclass(frozen=True)
class DefectSpec:
    """Disk of radius ``r0`` with an outward radial bump."""

    r0: float
    bump: fw.RadialBump
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.r0 > 0:
            raise PsprError("radius must be positive")
        # a radial graph r0 + profile(phi) > 0 is always a simple curve

    @property
    def diameter(self) -> float:
        return 2 * self.r0

    def boundary(self, count: int = 1024) -> np.ndarray:
        return fw.bump_disk_boundary(self.r0, self.bump, self.center, count)


@dataclass(frozen=True, eq=False)
class DefectResult:
    delta_field: np.ndarray
    sensitivity: float
    amplitude: float
    k: float
    base: PsprField
    perturbed: PsprField
    meta: dict = field(default_factory=dict)


def defect_grid(defect: DefectSpec, h: float, outer_factor: float = OUTER_FACTOR) -> fw.SamplingGrid:
    R = outer_factor * (defect.r0 + defect.bump.amplitude)
    cx, cy = defect.center
    return fw.SamplingGrid.covering(cx - R, cx + R, cy - R, cy + R, h, margin=0)


def defect_experiment(
    n: float,
    defect: DefectSpec,
    kernel: ff.HerglotzKernel,
    k: float,
    grid: fw.SamplingGrid,
    base: PsprField | None = None,
    tol: float = fw.DEFAULT_TOL,
) -> DefectResult:
    """Compare ``w_hat`` of the staircased disk with and without the bump.

    ``sensitivity = (||w_tilde - w_hat|| / ||w_hat||) / (amplitude / diameter)`` with norms
    over the union of the interior and the outer annulus of the unperturbed disk.
    """
    amp = defect.bump.amplitude
    if 0 < amp < 2 * grid.h:
        raise PsprError(f"bump amplitude {amp} is below two grid cells ({2 * grid.h})")
    x0, x1, y0, y1 = grid.bounds()
    cx, cy = defect.center
    R = defect.r0 + amp
    if cx - R < x0 or cx + R > x1 or cy - R < y0 or cy + R > y1:
        raise PsprError("perturbed scatterer leaves the grid")
    flat = fw.RadialBump(defect.bump.center_angle, defect.bump.width, 0.0)
    outer = OUTER_FACTOR * (defect.r0 + grid.h / math.sqrt(2))
    if base is None:
        base = generate_pspr(fw.bump_disk_medium(n, defect.r0, flat, grid.h, defect.center, grid), kernel, k, outer_radius=outer, tol=tol)
    if amp == 0:
        pert = base
    else:
        pert = generate_pspr(fw.bump_disk_medium(n, defect.r0, defect.bump, grid.h, defect.center, grid), kernel, k, outer_radius=outer, tol=tol)
    delta = pert.w_hat - base.w_hat
    region = base.region
    ref = _l2(base.w_hat, region, grid.h)
    if ref == 0:
        raise PsprError("unperturbed field vanishes")
    rel = _l2(delta, region, grid.h) / ref
    sens = rel / (amp / defect.diameter) if amp > 0 else 0.0
    return DefectResult(delta, sens, amp, k, base, pert, meta={"relative_change": rel, "residuals": [base.residual, pert.residual]})


def write_pspr_csv(path, pspr: PsprField) -> Path:
    """``x, y, abs_w_hat`` per cell of the evaluation region."""
    path = Path(path)
    pts = pspr.grid.points()
    keep = pspr.region.ravel()
    table = np.c_[pts[keep], np.abs(pspr.w_hat.ravel()[keep])]
    np.savetxt(path, table, delimiter=",", header="x,y,abs_w_hat", comments="", fmt="%.12g")
    return path


def write_defect_json(path, results) -> Path:
    path = Path(path)
    rows = [{"amplitude": r.amplitude, "sensitivity": r.sensitivity, "k": r.k, **r.meta} for r in results]
    path.write_text(json.dumps(rows, indent=1))
    return path
