"""Imaging functionals: interior resonant modes, a direct-sampling baseline and metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import farfield as ff
from . import forward as fw
from .recover import RecoveredMode

LOG_CLIP = 700.0
DEFAULT_PIXELS = 128
KINDS = ("res_indicator", "dsm_indicator", "hybrid")


class ImagingError(ValueError):
    """Invalid imaging input or an undefined metric."""


@dataclass(frozen=True, eq=False)
class ImageField:
    """Real image on a sampling grid, with the wavenumbers it was built from."""

    grid: fw.SamplingGrid
    values: np.ndarray
    kind: str
    k_set: tuple[float, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ImagingError("image values must match the grid shape")
        if not np.all(np.isfinite(v)):
            raise ImagingError("image values must be finite")
        if self.kind not in KINDS:
            raise ImagingError(f"unknown image kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "k_set", tuple(float(k) for k in self.k_set))


def image_grid(ball, pixels: int = DEFAULT_PIXELS) -> fw.SamplingGrid:
    """``pixels x pixels`` grid over the bounding square of a ball."""
    cx, cy = ball.center
    R = ball.radius
    h = 2 * R / pixels
    return fw.SamplingGrid((cx - R, cy - R), h, pixels, pixels)


def indicator_res(modes: Sequence[RecoveredMode], grid: fw.SamplingGrid) -> ImageField:
    """``I(z) = -ln sum_k |v_{g0,k}(z)|`` with values clipped to ``[-700, 700]``."""
    if len(modes) == 0:
        raise ImagingError("at least one recovered mode is required")
    pts = grid.points()
    total = np.zeros(len(pts))
    for mode in modes:
        total += np.abs(fw.herglotz_eval(mode.g0, mode.k, pts))
    with np.errstate(divide="ignore"):
        vals = -np.log(total)
    vals = np.clip(vals, -LOG_CLIP, LOG_CLIP).reshape(grid.shape)
    return ImageField(grid, vals, "res_indicator", tuple(m.k for m in modes))


def indicator_dsm(matrices: Sequence[ff.FarFieldMatrix], grid: fw.SamplingGrid) -> ImageField:
    """Multi-frequency direct sampling ``sum_k |sum_ij F_k[i,j] e^{i k (x_i - d_j) . z}|``.

    The phase matches the far-field convention ``u_inf ~ int e^{-i k x . y}`` so the
    image peaks inside the scatterer.  The result is divided by its maximum so the
    brightest pixel is 1 (zero data give 0).
    """
    if len(matrices) == 0:
        raise ImagingError("at least one far-field matrix is required")
    obs, inc = matrices[0].obs, matrices[0].inc
    if any(F.obs != obs or F.inc != inc for F in matrices):
        raise ImagingError("far-field matrices must share their direction sets")
    pts = grid.points()
    X, D = obs.vectors(), inc.vectors()
    total = np.zeros(len(pts))
    for F in matrices:
        eo = np.exp(1j * F.k * (pts @ X.T))
        ei = np.exp(-1j * F.k * (pts @ D.T))
        total += np.abs(np.einsum("pi,ij,pj->p", eo, F.entries, ei))
    peak = total.max()
    if peak > 0:
        total = total / peak
    return ImageField(grid, total.reshape(grid.shape), "dsm_indicator", tuple(F.k for F in matrices))


def hybrid(a: ImageField, b: ImageField) -> ImageField:
    """Pixelwise sum of the two min-max normalised images."""
    if a.grid != b.grid:
        raise ImagingError("images live on different grids")

    def unit(v):
        span = v.max() - v.min()
        return np.zeros_like(v) if span == 0 else (v - v.min()) / span

    return ImageField(a.grid, unit(a.values) + unit(b.values), "hybrid", a.k_set + b.k_set)


def distance_to_polyline(points: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    """Euclidean distance from each point to a closed polyline."""
    P = np.asarray(boundary, dtype=float)
    if not np.allclose(P[0], P[-1]):
        P = np.vstack([P, P[:1]])
    a, b = P[:-1], P[1:]
    ab = b - a
    L2 = np.einsum("ij,ij->i", ab, ab)
    L2 = np.where(L2 > 0, L2, 1.0)
    pts = np.asarray(points, dtype=float)
    best = np.full(len(pts), np.inf)
    # chunk over segments to bound memory
    for s in range(0, len(a), 256):
        sa, sab, sl = a[s:s + 256], ab[s:s + 256], L2[s:s + 256]
        rel = pts[:, None, :] - sa[None, :, :]
        t = np.clip(np.einsum("psi,si->ps", rel, sab) / sl, 0.0, 1.0)
        d = rel - t[..., None] * sab[None, :, :]
        best = np.minimum(best, np.sqrt(np.min(np.einsum("psi,psi->ps", d, d), axis=1)))
    return best


def concentration_metric(image: ImageField, boundary: np.ndarray, q: float = 0.05, dist: float = 0.1) -> float:
    """Fraction of the darkest ``q`` quantile of pixels within ``dist`` of ``boundary``."""
    if not 0 < q < 1:
        raise ImagingError("quantile must lie in (0, 1)")
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim != 2 or boundary.shape[0] < 3:
        raise ImagingError("boundary must be a closed polyline of at least three vertices")
    v = image.values.ravel()
    if np.ptp(v) == 0:
        raise ImagingError("metric undefined for a constant image")
    dark = v <= np.quantile(v, q)
    d = distance_to_polyline(image.grid.points()[dark], boundary)
    return float(np.mean(d <= dist))


def write_image_csv(path, image: ImageField) -> Path:
    """``x, y, value`` per pixel."""
    path = Path(path)
    table = np.c_[image.grid.points(), image.values.ravel()]
    np.savetxt(path, table, delimiter=",", header="x,y,value", comments="", fmt="%.12g")
    return path


def write_metric_json(path, image: ImageField, metric: float, q: float, dist: float) -> Path:
    path = Path(path)
    data = {"kind": image.kind, "k_set": list(image.k_set), "quantile": q, "dist": dist,
            "concentration": metric, "pixels": [image.grid.nx, image.grid.ny]}
    path.write_text(json.dumps(data, indent=1))
    return path
