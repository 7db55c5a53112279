"""Two-dimensional forward scattering by a penetrable inhomogeneity.

The total field solves the Lippmann-Schwinger equation

    u(x) - k^2 int G_k(x - y) q(y) u(y) dy = u^i(x),    q = n^2 - 1,

with ``G_k = (i/4) H_0^(1)(k|.|)``. Cells of a uniform grid carry piecewise
constant ``q`` and ``u``; the discrete convolution is applied with FFTs on a
zero-padded (circulant-embedded) grid, so it is exact for the chosen cell
integrals and no kernel truncation is needed. The self cell uses the integral
of ``G_k`` over the disk of equal area, neighbouring cells a tensor Gauss rule,
and far cells the midpoint value.

Far fields follow the convention

    u^s(x) = e^{i pi/4} / sqrt(8 k pi) * e^{ikr} / sqrt(r) * u_inf(x^) + O(r^{-3/2}),

so that ``u_inf(x^) = FAR_FIELD_CONST * k^2 int e^{-ik x^.y} q(y) u(y) dy``.
"""

from __future__ import annotations

import csv
import hashlib
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.fft as sfft
from scipy import special
from scipy.sparse.linalg import LinearOperator, gmres

# one global constant relating the volume integral to u_inf
FAR_FIELD_CONST = 1.0

GMRES_RESTART = 50
GMRES_BUDGET = 2000
GMRES_STAGE1_CYCLES = 6
DEFAULT_TOL = 1e-8
POINTS_PER_WAVELENGTH = 8
NEAR_CELLS = 2
NEAR_GAUSS = 8


class ForwardError(ValueError):
    """Invalid medium, grid or incident field."""


class PreconditionError(ForwardError):
    """Grid too coarse for the interior wavelength."""


class SolverFailure(RuntimeError):
    """Krylov iteration did not reach the requested residual."""

    def __init__(self, msg: str, residual: float, iterations: int):
        super().__init__(f"{msg} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


# ---------------------------------------------------------------------------
# grids and media
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SamplingGrid:
    """``nx * ny`` square cells of side ``h``; ``origin`` is the lower-left corner.

    Arrays on the grid have shape ``(ny, nx)``; entry ``[j, i]`` belongs to the
    cell centred at ``origin + ((i + 1/2) h, (j + 1/2) h)``.
    """

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ForwardError("grid spacing must be positive")
        if self.nx < 1 or self.ny < 1:
            raise ForwardError("grid needs at least one cell")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @classmethod
    def covering(cls, xmin: float, xmax: float, ymin: float, ymax: float, h: float, margin: int = 2) -> "SamplingGrid":
        """Smallest grid with spacing ``h`` covering the box plus ``margin`` cells, centred on it."""
        nx = int(math.ceil((xmax - xmin) / h - 1e-9)) + 2 * margin
        ny = int(math.ceil((ymax - ymin) / h - 1e-9)) + 2 * margin
        cx, cy = 0.5 * (xmin + xmax), 0.5 * (ymin + ymax)
        return cls((cx - 0.5 * nx * h, cy - 0.5 * ny * h), h, nx, ny)

    @property
    def shape(self) -> tuple[int, int]:
        return self.ny, self.nx

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        y = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        return x, y

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        x, y = self.axes()
        return np.meshgrid(x, y)

    def points(self) -> np.ndarray:
        X, Y = self.centers()
        return np.c_[X.ravel(), Y.ravel()]

    def bounds(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return x0, x0 + self.nx * self.h, y0, y0 + self.ny * self.h


@dataclass(frozen=True, eq=False)
class RefractiveField:
    """Cellwise ``n^2`` on a grid; ``mask`` marks the cells carrying contrast.

    ``delta0`` is the smallest ``|n^2 - 1|`` on the mask (0 when the mask is
    empty). Boundary cells hold area-weighted contrast, so ``delta0`` can be
    much smaller than the bulk contrast.
    """

    grid: SamplingGrid
    n2: np.ndarray
    mask: np.ndarray
    delta0: float = field(init=False)

    def __post_init__(self):
        n2 = np.asarray(self.n2, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if n2.shape != self.grid.shape or mask.shape != self.grid.shape:
            raise ForwardError(f"arrays must have grid shape {self.grid.shape}")
        if not np.all(np.isfinite(n2)) or np.any(n2 <= 0):
            raise ForwardError("n^2 must be finite and positive")
        if np.any(n2[~mask] != 1.0):
            raise ForwardError("n^2 must equal 1 outside the mask")
        contrast = np.abs(n2[mask] - 1.0)
        if contrast.size and np.min(contrast) <= 0:
            raise ForwardError("mask cells must carry nonzero contrast")
        n2.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "n2", n2)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "delta0", float(np.min(contrast)) if contrast.size else 0.0)

    @classmethod
    def from_n2(cls, grid: SamplingGrid, n2: np.ndarray) -> "RefractiveField":
        n2 = np.asarray(n2, dtype=float)
        return cls(grid, n2, n2 != 1.0)

    @property
    def contrast(self) -> np.ndarray:
        return self.n2 - 1.0

    @property
    def max_index(self) -> float:
        return float(math.sqrt(max(1.0, float(np.max(self.n2)))))

    def digest(self) -> str:
        """Stable hash of grid and values, used as a cache key."""
        hsh = hashlib.sha256()
        g = self.grid
        hsh.update(np.array([*g.origin, g.h, g.nx, g.ny], dtype=float).tobytes())
        hsh.update(np.ascontiguousarray(self.n2).tobytes())
        return hsh.hexdigest()[:16]

    def translated(self, t: tuple[float, float]) -> "RefractiveField":
        g = self.grid
        return RefractiveField(SamplingGrid((g.origin[0] + t[0], g.origin[1] + t[1]), g.h, g.nx, g.ny), self.n2, self.mask)


def _area_fraction(grid: SamplingGrid, inside: Callable[[np.ndarray, np.ndarray], np.ndarray], supersample: int) -> np.ndarray:
    if supersample < 1:
        raise ForwardError("supersample must be >= 1")
    X, Y = grid.centers()
    offs = ((np.arange(supersample) + 0.5) / supersample - 0.5) * grid.h
    frac = np.zeros(grid.shape)
    for dy in offs:
        for dx in offs:
            frac += inside(X + dx, Y + dy)
    return frac / supersample**2


def medium_from_indicator(
    grid: SamplingGrid, inside: Callable, n_value: float, supersample: int = 8
) -> RefractiveField:
    """Constant index ``n_value`` on a region; cut cells get area-weighted ``n^2``."""
    frac = _area_fraction(grid, inside, supersample)
    n2 = 1.0 + frac * (n_value**2 - 1.0)
    n2[frac == 0] = 1.0
    return RefractiveField.from_n2(grid, n2)


def polygon_contains(poly: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Even-odd point-in-polygon test for a closed polyline (last vertex may repeat the first)."""
    poly = np.asarray(poly, dtype=float)
    if np.allclose(poly[0], poly[-1]):
        poly = poly[:-1]
    xa, ya = poly[:, 0], poly[:, 1]
    xb, yb = np.roll(xa, -1), np.roll(ya, -1)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
    for x1, y1, x2, y2 in zip(xa, ya, xb, yb):
        crosses = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (x < xint)
    return inside


def disk_boundary(r0: float = 1.0, center=(0.0, 0.0), count: int = 512) -> np.ndarray:
    t = np.linspace(0, 2 * np.pi, count + 1)
    return np.c_[center[0] + r0 * np.cos(t), center[1] + r0 * np.sin(t)]


def square_boundary(side: float = 2.0, center=(0.0, 0.0), per_side: int = 128) -> np.ndarray:
    a = side / 2
    s = np.linspace(-a, a, per_side, endpoint=False)
    edges = [np.c_[s, -a + 0 * s], np.c_[a + 0 * s, s], np.c_[-s, a + 0 * s], np.c_[-a + 0 * s, -s]]
    pts = np.vstack(edges + [[[-a, -a]]])
    return pts + np.asarray(center)


def kite_boundary(scale: float = 1.0, center=(0.0, 0.0), count: int = 512) -> np.ndarray:
    """Kite ``(cos t + 0.65 cos 2t - 0.65, 1.5 sin t)`` scaled about the origin."""
    t = np.linspace(0, 2 * np.pi, count + 1)
    pts = np.c_[np.cos(t) + 0.65 * np.cos(2 * t) - 0.65, 1.5 * np.sin(t)] * scale
    return pts + np.asarray(center)


@dataclass(frozen=True)
class RadialBump:
    """Outward bump ``amplitude * cos^2(pi (phi - center_angle) / (2 width))`` for ``|phi - center_angle| < width``."""

    center_angle: float
    width: float
    amplitude: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ForwardError("bump amplitude must be nonnegative")
        if not 0 < self.width <= math.pi:
            raise ForwardError("bump width must lie in (0, pi]")

    def profile(self, phi):
        dphi = np.angle(np.exp(1j * (np.asarray(phi) - self.center_angle)))
        return np.where(np.abs(dphi) < self.width, self.amplitude * np.cos(0.5 * np.pi * dphi / self.width) ** 2, 0.0)


def bump_disk_boundary(r0: float, bump: RadialBump, center=(0.0, 0.0), count: int = 1024) -> np.ndarray:
    t = np.linspace(0, 2 * np.pi, count + 1)
    r = r0 + bump.profile(t)
    return np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)]


def disk_medium(n: float, r0: float, h: float, center=(0.0, 0.0), grid: SamplingGrid | None = None, supersample: int = 8):
    if grid is None:
        grid = SamplingGrid.covering(center[0] - r0, center[0] + r0, center[1] - r0, center[1] + r0, h)
    cx, cy = center
    return medium_from_indicator(grid, lambda x, y: (x - cx) ** 2 + (y - cy) ** 2 < r0 * r0, n, supersample)


def square_medium(n: float, side: float, h: float, center=(0.0, 0.0), grid: SamplingGrid | None = None, supersample: int = 8):
    a = side / 2
    cx, cy = center
    if grid is None:
        grid = SamplingGrid.covering(cx - a, cx + a, cy - a, cy + a, h)
    return medium_from_indicator(grid, lambda x, y: (np.abs(x - cx) < a) & (np.abs(y - cy) < a), n, supersample)


def kite_medium(n: float, h: float, scale: float = 1.0, center=(0.0, 0.0), grid: SamplingGrid | None = None, supersample: int = 8):
    poly = kite_boundary(scale, center)
    if grid is None:
        grid = SamplingGrid.covering(poly[:, 0].min(), poly[:, 0].max(), poly[:, 1].min(), poly[:, 1].max(), h)
    return medium_from_indicator(grid, lambda x, y: polygon_contains(poly, x, y), n, supersample)


def bump_disk_medium(
    n: float, r0: float, bump: RadialBump, h: float, center=(0.0, 0.0), grid: SamplingGrid | None = None, supersample: int = 1
):
    """Disk with a radial bump, staircased on the grid by default."""
    if grid is None:
        R = r0 + bump.amplitude
        grid = SamplingGrid.covering(center[0] - R, center[0] + R, center[1] - R, center[1] + R, h)
    cx, cy = center

    def inside(x, y):
        r = np.hypot(x - cx, y - cy)
        return r < r0 + bump.profile(np.arctan2(y - cy, x - cx))

    return medium_from_indicator(grid, inside, n, supersample)


def write_medium_csv(path, medium: RefractiveField) -> Path:
    path = Path(path)
    g = medium.grid
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["origin_x", "origin_y", "h", "nx", "ny"])
        wr.writerow([repr(g.origin[0]), repr(g.origin[1]), repr(g.h), g.nx, g.ny])
        for row in medium.n2:
            wr.writerow([repr(float(v)) for v in row])
    return path


def read_medium_csv(path) -> RefractiveField:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"medium file not found: {path}")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    ox, oy, h = (float(v) for v in rows[1][:3])
    nx, ny = int(rows[1][3]), int(rows[1][4])
    n2 = np.array([[float(v) for v in r] for r in rows[2 : 2 + ny]])
    return RefractiveField.from_n2(SamplingGrid((ox, oy), h, nx, ny), n2)


# ---------------------------------------------------------------------------
# incident fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IncidentField:
    """Plane wave, Herglotz wave or point source at wavenumber ``k``.

    Build with :meth:`plane`, :meth:`herglotz` or :meth:`point_source`.
    ``amplitude`` multiplies the whole field.
    """

    kind: str
    k: float
    direction: tuple[float, float] | None = None
    kernel: object | None = None
    z: tuple[float, float] | None = None
    amplitude: complex = 1.0

    def __post_init__(self):
        if not self.k > 0:
            raise ForwardError("wavenumber must be positive")
        if self.kind == "plane":
            d = np.asarray(self.direction, dtype=float)
            if d.shape != (2,) or abs(np.hypot(*d) - 1.0) > 1e-12:
                raise ForwardError("plane-wave direction must be a unit vector")
        elif self.kind == "herglotz":
            if self.kernel is None:
                raise ForwardError("Herglotz incidence needs a kernel")
        elif self.kind == "point_source":
            if self.z is None:
                raise ForwardError("point source needs a location")
        else:
            raise ForwardError(f"unknown incident kind {self.kind!r}")

    @classmethod
    def plane(cls, k: float, angle: float, amplitude: complex = 1.0) -> "IncidentField":
        return cls("plane", k, direction=(math.cos(angle), math.sin(angle)), amplitude=amplitude)

    @classmethod
    def herglotz(cls, k: float, kernel, amplitude: complex = 1.0) -> "IncidentField":
        return cls("herglotz", k, kernel=kernel, amplitude=amplitude)

    @classmethod
    def point_source(cls, k: float, z, amplitude: complex = 1.0) -> "IncidentField":
        return cls("point_source", k, z=(float(z[0]), float(z[1])), amplitude=amplitude)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.kind == "plane":
            val = np.exp(1j * self.k * (pts @ np.asarray(self.direction)))
        elif self.kind == "herglotz":
            val = herglotz_eval(self.kernel, self.k, pts)
        else:
            r = np.hypot(pts[:, 0] - self.z[0], pts[:, 1] - self.z[1])
            with np.errstate(invalid="ignore"):
                val = 0.25j * special.hankel1(0, self.k * r)
            val = np.where(r > 0, val, np.nan)
        return self.amplitude * val


def herglotz_eval(kernel, k: float, points) -> np.ndarray:
    """``v(x) = sum_j w_j g_j exp(i k x . theta_j)`` for a kernel on a direction set."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    dirs = kernel.dirs
    theta = np.c_[np.cos(dirs.angles), np.sin(dirs.angles)]
    phase = np.exp(1j * k * (pts @ theta.T))
    return phase @ (dirs.weights * np.asarray(kernel.coefficients))


# ---------------------------------------------------------------------------
# Lippmann-Schwinger solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TotalField:
    """Solution of the volume integral equation on the medium's grid."""

    u: np.ndarray
    k: float
    medium: RefractiveField
    incident: IncidentField
    residual: float
    iterations: int = 0

    @property
    def u_incident(self) -> np.ndarray:
        return self.incident.evaluate(self.medium.grid.points()).reshape(self.medium.grid.shape)

    @property
    def u_scattered(self) -> np.ndarray:
        return self.u - self.u_incident


def _self_cell(k: float, h: float) -> complex:
    a = h / math.sqrt(math.pi)
    return 0.25j * 2 * math.pi * (a * special.hankel1(1, k * a) / k + 2j / (math.pi * k * k))


def kernel_table(k: float, grid: SamplingGrid) -> np.ndarray:
    """Cell integrals of ``G_k`` for every offset, laid out for circulant embedding."""
    h = grid.h
    ny, nx = grid.shape
    dj = np.fft.fftfreq(2 * ny, 1.0 / (2 * ny))
    di = np.fft.fftfreq(2 * nx, 1.0 / (2 * nx))
    DI, DJ = np.meshgrid(di, dj)
    r = h * np.hypot(DI, DJ)
    with np.errstate(invalid="ignore"):
        K = 0.25j * special.hankel1(0, k * r) * h * h
    # offsets of exactly n cells never couple two grid cells; keep them finite
    gx, gw = np.polynomial.legendre.leggauss(NEAR_GAUSS)
    gx = 0.5 * h * gx
    gw = 0.5 * h * gw
    GX, GY = np.meshgrid(gx, gx)
    GW = np.outer(gw, gw)
    for a in range(-NEAR_CELLS, NEAR_CELLS + 1):
        for b in range(-NEAR_CELLS, NEAR_CELLS + 1):
            if a == 0 and b == 0:
                continue
            rr = np.hypot(a * h + GX, b * h + GY)
            K[b % (2 * ny), a % (2 * nx)] = np.sum(GW * 0.25j * special.hankel1(0, k * rr))
    K[0, 0] = _self_cell(k, h)
    return K


class LSOperator:
    """``u -> u - k^2 (K * (q u))`` restricted to the cells carrying contrast.

    Off the support the total field follows explicitly from the support values,
    so the Krylov iteration only sees the support unknowns.
    """

    def __init__(self, medium: RefractiveField, k: float):
        self.medium = medium
        self.k = k
        self.q = medium.contrast
        self.shape = medium.grid.shape
        self.support = medium.mask
        self.size = int(self.support.sum())
        ny, nx = self.shape
        self._pad = (2 * ny, 2 * nx)
        self.kernel_hat = sfft.fft2(kernel_table(k, medium.grid))

    def convolve(self, f: np.ndarray) -> np.ndarray:
        ny, nx = self.shape
        pad = np.zeros(self._pad, dtype=complex)
        pad[:ny, :nx] = f
        return sfft.ifft2(sfft.fft2(pad) * self.kernel_hat)[:ny, :nx]

    def volume_potential(self, u: np.ndarray) -> np.ndarray:
        return self.k**2 * self.convolve(self.q * u)

    def expand(self, x: np.ndarray) -> np.ndarray:
        u = np.zeros(self.shape, dtype=complex)
        u[self.support] = x
        return u

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return x - self.volume_potential(self.expand(x))[self.support]

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.size, self.size), matvec=self.matvec, dtype=complex)


def check_resolution(medium: RefractiveField, k: float) -> None:
    hmax = 2 * math.pi / (k * medium.max_index) / POINTS_PER_WAVELENGTH
    if medium.grid.h > hmax * (1 + 1e-12):
        raise PreconditionError(f"grid spacing {medium.grid.h:.4g} exceeds {hmax:.4g} (8 cells per interior wavelength)")


def _gmres(op: LinearOperator, b: np.ndarray, tol: float) -> tuple[np.ndarray, int]:
    """Restarted GMRES, escalating to unrestarted GMRES on stagnation.

    High contrast makes GMRES(50) stall; the second stage keeps the full
    Krylov basis for the rest of the iteration budget, warm-started.
    """
    counter = [0]

    def _count(_):
        counter[0] += 1

    restart = max(1, min(GMRES_RESTART, GMRES_BUDGET))
    cycles = max(1, min(GMRES_STAGE1_CYCLES * restart, GMRES_BUDGET) // restart)
    x, info = gmres(
        op, b, rtol=0.5 * tol, atol=0.0, restart=restart, maxiter=cycles,
        callback=_count, callback_type="pr_norm",
    )
    remaining = GMRES_BUDGET - counter[0]
    if info != 0 and remaining > 0:
        x, info = gmres(
            op, b, x0=x, rtol=0.5 * tol, atol=0.0, restart=remaining, maxiter=1,
            callback=_count, callback_type="pr_norm",
        )
    return x, counter[0]


def solve_forward(
    medium: RefractiveField,
    inc: IncidentField,
    tol: float = DEFAULT_TOL,
    operator: LSOperator | None = None,
) -> TotalField:
    """Solve the volume integral equation with GMRES.

    ``operator`` may be shared between solves at the same ``k``.
    """
    k = inc.k
    check_resolution(medium, k)
    # solve for the unit-amplitude field so amplitude scaling is exact
    unit = replace(inc, amplitude=1.0)
    ui = unit.evaluate(medium.grid.points()).reshape(medium.grid.shape)
    amp = inc.amplitude
    if not medium.mask.any():
        return TotalField(amp * ui, k, medium, inc, 0.0, 0)
    if operator is None:
        operator = LSOperator(medium, k)
    elif operator.medium is not medium or operator.k != k:
        raise ForwardError("operator was built for a different medium or wavenumber")
    b = ui[operator.support]
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return TotalField(amp * ui, k, medium, inc, 0.0, 0)
    x, its = _gmres(operator.as_linear_operator(), b, tol)
    res = float(np.linalg.norm(b - operator.matvec(x)) / bnorm)
    if res > tol:
        raise SolverFailure("GMRES did not converge", res, its)
    u = ui + operator.volume_potential(operator.expand(x))
    u[operator.support] = x
    return TotalField(amp * u, k, medium, inc, res, its)


def far_field(total: TotalField, directions) -> np.ndarray:
    """``u_inf`` at observation angles (array) or unit vectors (shape ``(M, 2)``)."""
    dirs = np.asarray(directions, dtype=float)
    if dirs.ndim == 1:
        dirs = np.c_[np.cos(dirs), np.sin(dirs)]
    return far_field_of_source(total.medium, total.k, total.medium.contrast * total.u, dirs)


def far_field_of_source(medium: RefractiveField, k: float, qu: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Far field of the cellwise density ``q u``; cell integrals of the phase are exact."""
    g = medium.grid
    h = g.h
    mask = medium.mask
    if not mask.any():
        return np.zeros(len(dirs), dtype=complex)
    X, Y = g.centers()
    pts = np.c_[X[mask], Y[mask]]
    phase = np.exp(-1j * k * (dirs @ pts.T))
    cell = h * h * np.sinc(k * dirs[:, 0] * h / (2 * np.pi)) * np.sinc(k * dirs[:, 1] * h / (2 * np.pi))
    return FAR_FIELD_CONST * k**2 * cell * (phase @ qu[mask])


# ---------------------------------------------------------------------------
# penetrable disk by separation of variables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskSeries:
    """Plane-wave scattering by a homogeneous disk centred at the origin.

    Inside ``u = sum_m a_m J_m(k n r) e^{im(phi - alpha)}``; outside
    ``u = sum_m (i^m J_m(k r) + b_m H_m(k r)) e^{im(phi - alpha)}``.
    """

    n: float
    r0: float
    k: float
    angle: float
    orders: np.ndarray
    a: np.ndarray
    b: np.ndarray
    tail: float
    near_singular: bool

    def near_field(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        phi = np.arctan2(pts[:, 1], pts[:, 0]) - self.angle
        ms = self.orders
        ang = np.exp(1j * np.outer(phi, ms))
        inside = r < self.r0
        out = np.empty(len(pts), dtype=complex)
        ri = r[inside][:, None]
        out[inside] = np.sum(self.a * special.jv(ms, self.k * self.n * ri) * ang[inside], axis=1)
        ro = r[~inside][:, None]
        terms = (1j**ms) * special.jv(ms, self.k * ro) + self.b * special.hankel1(ms, self.k * ro)
        out[~inside] = np.sum(terms * ang[~inside], axis=1)
        return out

    def interior_field(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        phi = np.arctan2(pts[:, 1], pts[:, 0]) - self.angle
        ang = np.exp(1j * np.outer(phi, self.orders))
        return np.sum(self.a * special.jv(self.orders, self.k * self.n * r[:, None]) * ang, axis=1)

    def far_field(self, obs_angles) -> np.ndarray:
        obs = np.asarray(obs_angles, dtype=float)
        ms = self.orders
        return -4j * FAR_FIELD_CONST * np.exp(1j * np.outer(obs - self.angle, ms)) @ (self.b * (-1j) ** ms)

    def far_matrix(self, obs_angles, inc_angles) -> np.ndarray:
        obs = np.asarray(obs_angles, dtype=float)
        inc = np.asarray(inc_angles, dtype=float)
        ms = self.orders
        # coefficients do not depend on the incidence angle
        D = obs[:, None] - inc[None, :] + self.angle
        return -4j * FAR_FIELD_CONST * np.einsum("m,ijm->ij", self.b * (-1j) ** ms, np.exp(1j * D[..., None] * ms))


def disk_series(n: float, r0: float, k: float, angle: float = 0.0, m_trunc: int | None = None) -> DiskSeries:
    """Mode-matched coefficients for a plane wave ``exp(i k x.(cos angle, sin angle))``."""
    need = int(math.ceil(k * n * r0)) + 20
    if m_trunc is None:
        m_trunc = need
    if m_trunc < k * n * r0 + 20:
        raise ForwardError(f"m_trunc must be at least k n r0 + 20 = {k * n * r0 + 20:.1f}")
    ms = np.arange(-m_trunc, m_trunc + 1)
    x, y = k * r0, k * n * r0
    A = np.empty((len(ms), 2, 2), dtype=complex)
    A[:, 0, 0] = special.jv(ms, y)
    A[:, 0, 1] = -special.hankel1(ms, x)
    A[:, 1, 0] = n * special.jvp(ms, y)
    A[:, 1, 1] = -special.h1vp(ms, x)
    rhs = np.stack([(1j**ms) * special.jv(ms, x), (1j**ms) * special.jvp(ms, x)], axis=1)
    # column scaling removes the trivial size disparity of high orders
    cond = np.linalg.cond(A / np.linalg.norm(A, axis=1, keepdims=True))
    near_singular = bool(np.any(cond > 1e12))
    if near_singular:
        warnings.warn("disk mode matching is nearly singular", RuntimeWarning, stacklevel=2)
    sol = np.linalg.solve(A, rhs[..., None])[..., 0]
    b = sol[:, 1]
    tail = float(np.max(np.abs(b[[0, -1]])))
    return DiskSeries(n, r0, k, angle, ms, sol[:, 0], b, tail, near_singular)


def write_far_field_csv(path, k: float, obs_angles, inc_angles, values: np.ndarray) -> Path:
    path = Path(path)
    vals = np.asarray(values)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "obs_angle", "inc_angle", "re", "im"])
        for i, a in enumerate(obs_angles):
            for j, b in enumerate(inc_angles):
                wr.writerow([repr(float(k)), repr(float(a)), repr(float(b)), repr(float(vals[i, j].real)), repr(float(vals[i, j].imag))])
    return path
