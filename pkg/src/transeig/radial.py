"""Transmission eigenpairs of a homogeneous disk (d=2) or ball (d=3).

With ``w = alpha J_m(k n r) e^{im phi}`` and ``v = beta J_m(k r) e^{im phi}``
the Cauchy-data match on ``|x| = r0`` has a nontrivial solution exactly when

    f_m(k) = J_m'(k r0) J_m(k n r0) - n J_m(k r0) J_m'(k n r0) = 0,

which equals ``J_{m-1}(k r0) J_m(k n r0) - n J_m(k r0) J_{m-1}(k n r0)`` by the
recurrence ``J_{m-1}(x) = J_m'(x) + (m/x) J_m(x)``. In three dimensions the
same determinant is formed with spherical Bessel functions and a zonal
spherical harmonic as angular factor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate, optimize, special

from .special_fn import _check_order, bessel_zero

CLUSTER_TOL = 1e-7
ROOT_XTOL = 1e-12


class RadialDomainError(ValueError):
    """Invalid medium, wavenumber interval or evaluation point."""


class UndefinedRatioError(ZeroDivisionError):
    """Localization ratio requested for a field of zero norm."""


@dataclass(frozen=True)
class RadialMedium:
    """Disk or ball of radius ``r0`` with constant refractive index ``n``.

    ``validate=False`` skips the ``|n - 1| >= 1e-6`` check; it exists so the
    degenerate ``n = 1`` case can be probed in tests.
    """

    n: float
    r0: float = 1.0
    d: int = 2
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if self.d not in (2, 3):
            raise RadialDomainError(f"dimension must be 2 or 3, got {self.d}")
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise RadialDomainError("radius must be positive")
        if not (self.n > 0 and math.isfinite(self.n)):
            raise RadialDomainError("refractive index must be positive")
        if self.validate and abs(self.n - 1.0) < 1e-6:
            raise RadialDomainError("refractive index must differ from 1")


@dataclass(frozen=True)
class RadialEigenpair:
    """Eigenvalue ``k`` of angular order ``m`` with amplitudes of ``w`` and ``v``.

    Amplitudes are normalised so that ``||v||_{L2(Omega)} = 1``.
    ``multiplicity`` lists every order ``m' >= 0`` whose eigenvalue lies
    within ``1e-7`` of ``k`` (each ``m' >= 1`` carries the pair ``+-m'``).
    """

    m: int
    k: float
    alpha: complex
    beta: complex
    medium: RadialMedium
    s_index: int = 1
    residual: float = 0.0
    multiplicity: tuple[int, ...] = ()


@dataclass(frozen=True)
class BracketSequence:
    """Indices ``s = floor(m^g1)``, ``s' = floor(m^g2)`` bracketing an eigenvalue."""

    m: int
    gamma1: float
    gamma2: float
    s: int = field(init=False)
    s_prime: int = field(init=False)

    def __post_init__(self):
        if not 0 < self.gamma1 < self.gamma2 < 1:
            raise RadialDomainError("need 0 < gamma1 < gamma2 < 1")
        s = int(math.floor(self.m**self.gamma1))
        sp = int(math.floor(self.m**self.gamma2))
        if s < 1 or not s < sp:
            raise RadialDomainError(f"order {self.m} too small: s={s}, s'={sp}")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "s_prime", sp)

    def interval(self, r0: float = 1.0) -> tuple[float, float]:
        """``(j_{m,s}, j_{m,s'}) / r0`` in wavenumber units."""
        return bessel_zero(self.m, self.s) / r0, bessel_zero(self.m, self.s_prime) / r0


@dataclass(frozen=True)
class LocalizationReport:
    eps0: float
    ratio: float
    target: str


@dataclass(frozen=True)
class DualMedium:
    """Index-inverted medium for ``0 < n < 1``.

    If ``k`` is an eigenvalue of ``original`` with pair ``(w, v)``, then
    ``n k`` is an eigenvalue of ``dual`` with pair ``(v, w)``.
    """

    original: RadialMedium
    dual: RadialMedium

    def to_dual(self, k):
        return np.asarray(k) * self.original.n

    def to_original(self, k):
        return np.asarray(k) / self.original.n


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------


def _profile(m: int, d: int, x, derivative: bool = False):
    if d == 2:
        return special.jvp(m, x) if derivative else special.jv(m, x)
    return special.spherical_jn(m, x, derivative=derivative)


def fm_value(m: int, k, medium: RadialMedium):
    """Eigenvalue condition ``f_m`` at wavenumber(s) ``k``."""
    m = _check_order(m)
    k = np.asarray(k, dtype=float)
    if np.any(k <= 0):
        raise RadialDomainError("wavenumber must be positive")
    x = k * medium.r0
    y = medium.n * x
    d = medium.d
    val = _profile(m, d, x, True) * _profile(m, d, y) - medium.n * _profile(m, d, x) * _profile(m, d, y, True)
    return float(val) if val.ndim == 0 else val


def _fm_sign(m: int, k: np.ndarray, medium: RadialMedium) -> np.ndarray:
    # scale-free version for scanning; nan where every factor underflows
    x = k * medium.r0
    y = medium.n * x
    d = medium.d
    a = _profile(m, d, x, True) * _profile(m, d, y)
    b = medium.n * _profile(m, d, x) * _profile(m, d, y, True)
    scale = np.abs(a) + np.abs(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, (a - b) / scale, np.nan)


def scan_step(medium: RadialMedium, k_lo: float, k_hi: float) -> float:
    return min(math.pi / (4.0 * max(medium.n, 1.0) * medium.r0), (k_hi - k_lo) / 64.0)


def _roots_for_order(m: int, medium: RadialMedium, k_lo: float, k_hi: float) -> list[float]:
    step = scan_step(medium, k_lo, k_hi)
    count = int(math.ceil((k_hi - k_lo) / step)) + 1
    ks = np.linspace(k_lo, k_hi, count)
    g = _fm_sign(m, ks, medium)
    roots = []
    for i in range(count - 1):
        ga, gb = g[i], g[i + 1]
        if not (np.isfinite(ga) and np.isfinite(gb)):
            continue
        if ga == 0.0:
            if i == 0 or i > 0 and g[i - 1] != 0.0:
                roots.append(float(ks[i]))
            continue
        if ga * gb < 0:
            r = optimize.brentq(lambda t: fm_value(m, t, medium), ks[i], ks[i + 1], xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
            roots.append(float(r))
    if count > 1 and g[-1] == 0.0:
        roots.append(float(ks[-1]))
    return roots


def _amplitudes(m: int, k: float, medium: RadialMedium) -> tuple[float, float]:
    x = k * medium.r0
    y = medium.n * x
    d = medium.d
    jx, jy = _profile(m, d, x), _profile(m, d, y)
    dx, dy = _profile(m, d, x, True), medium.n * _profile(m, d, y, True)
    # null vector of [[J(y), -J(x)], [n J'(y), -J'(x)]]; use the better-conditioned row
    if math.hypot(jx, jy) >= math.hypot(dx, dy):
        alpha, beta = jx, jy
    else:
        alpha, beta = dx, dy
    norm_v = abs(beta) * math.sqrt(_radial_mass(m, k, medium.d, 0.0, medium.r0) * _angular_mass(medium.d))
    if norm_v == 0.0:
        raise UndefinedRatioError("v vanishes identically for this pair")
    return alpha / norm_v, beta / norm_v


def _angular_mass(d: int) -> float:
    # squared L2 norm of e^{im phi} on the circle; the 3D zonal factor is unit-normalised
    return 2.0 * math.pi if d == 2 else 1.0


def _radial_mass(m: int, kappa: float, d: int, a: float, b: float) -> float:
    """``int_a^b J_m(kappa r)^2 r^{d-1} dr`` by adaptive quadrature."""
    if b <= a:
        return 0.0

    def integrand(r):
        return _profile(m, d, kappa * r) ** 2 * r ** (d - 1)

    # split at roughly every half oscillation so the adaptive rule sees smooth pieces
    pieces = max(1, int(math.ceil(kappa * (b - a) / math.pi)))
    edges = np.linspace(a, b, pieces + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-10, limit=200)
        total += val
    return total


def find_radial_eigs(medium: RadialMedium, k_lo: float, k_hi: float, m_max: int) -> list[RadialEigenpair]:
    """All roots of ``f_m`` on ``[k_lo, k_hi]`` for ``0 <= m <= m_max``, sorted by ``k``."""
    if not 0 < k_lo:
        raise RadialDomainError("k_lo must be positive")
    if k_hi <= k_lo:
        return []
    _check_order(m_max)
    found: list[tuple[float, int, int]] = []
    for m in range(m_max + 1):
        for s, k in enumerate(_roots_for_order(m, medium, k_lo, k_hi), start=1):
            found.append((k, m, s))
    found.sort()
    pairs = []
    for k, m, s in found:
        alpha, beta = _amplitudes(m, k, medium)
        mult = tuple(sorted(mm for kk, mm, _ in found if abs(kk - k) <= CLUSTER_TOL))
        pairs.append(
            RadialEigenpair(m, k, complex(alpha), complex(beta), medium, s, abs(fm_value(m, k, medium)), mult)
        )
    return pairs


def eigenpair_at(medium: RadialMedium, m: int, k: float, s_index: int = 1) -> RadialEigenpair:
    """Build the normalised pair for a known root ``k`` of ``f_m``."""
    alpha, beta = _amplitudes(m, k, medium)
    return RadialEigenpair(m, k, complex(alpha), complex(beta), medium, s_index, abs(fm_value(m, k, medium)), (m,))


def sequence_eigenpair(medium: RadialMedium, seq: BracketSequence) -> RadialEigenpair | None:
    """First eigenvalue of order ``seq.m`` inside ``(j_{m,s}, j_{m,s'}) / r0``."""
    lo, hi = seq.interval(medium.r0)
    roots = _roots_for_order(seq.m, medium, lo, hi)
    if not roots:
        return None
    return eigenpair_at(medium, seq.m, roots[0], seq.s)


# ---------------------------------------------------------------------------
# fields and localization
# ---------------------------------------------------------------------------


def eig_field_eval(pair: RadialEigenpair, points) -> tuple[np.ndarray, np.ndarray]:
    """``(w, v)`` at ``points`` (shape ``(N, d)``) inside the closed disk/ball."""
    med = pair.medium
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != med.d:
        raise RadialDomainError(f"points must have {med.d} coordinates")
    r = np.linalg.norm(pts, axis=1)
    if np.any(r > med.r0 * (1 + 1e-12)):
        raise RadialDomainError("point outside the medium")
    if med.d == 2:
        ang = np.exp(1j * pair.m * np.arctan2(pts[:, 1], pts[:, 0]))
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            cos_t = np.where(r > 0, pts[:, 2] / np.where(r > 0, r, 1.0), 1.0)
        ang = math.sqrt((2 * pair.m + 1) / (4 * math.pi)) * special.eval_legendre(pair.m, cos_t)
    w = pair.alpha * _profile(pair.m, med.d, pair.k * med.n * r) * ang
    v = pair.beta * _profile(pair.m, med.d, pair.k * r) * ang
    return w, v


def _check_target(target: str) -> str:
    if target not in ("w", "v"):
        raise RadialDomainError(f"target must be 'w' or 'v', got {target!r}")
    return target


def localization_ratio(
    source,
    eps0: float,
    target: str = "v",
    *,
    dist: np.ndarray | None = None,
    weights: np.ndarray | None = None,
) -> LocalizationReport:
    """``||u||_{L2(N_eps0)} / ||u||_{L2(Omega)}`` with ``N_eps0`` the inner boundary band.

    ``source`` is either a :class:`RadialEigenpair` (exact radial quadrature)
    or an array of field samples at interior points; in the latter case
    ``dist`` gives each sample's distance to the boundary and ``weights`` the
    quadrature weights (uniform if omitted).
    """
    _check_target(target)
    if isinstance(source, RadialEigenpair):
        med = source.medium
        if not 0 < eps0 < med.r0:
            raise RadialDomainError("eps0 must lie in (0, r0)")
        kappa = source.k * (med.n if target == "w" else 1.0)
        total = _radial_mass(source.m, kappa, med.d, 0.0, med.r0)
        band = _radial_mass(source.m, kappa, med.d, med.r0 - eps0, med.r0)
        if total <= 0.0:
            raise UndefinedRatioError("zero-norm field")
        return LocalizationReport(eps0, float(min(1.0, math.sqrt(band / total))), target)

    vals = np.asarray(source)
    if dist is None:
        raise RadialDomainError("sampled fields need distances to the boundary")
    dist = np.asarray(dist, dtype=float)
    wts = np.ones_like(dist) if weights is None else np.asarray(weights, dtype=float)
    if not 0 < eps0 < np.max(dist):
        raise RadialDomainError("eps0 must be positive and below the inradius")
    dens = wts * np.abs(vals) ** 2
    total = float(np.sum(dens))
    if total == 0.0:
        raise UndefinedRatioError("zero-norm field")
    band = float(np.sum(dens[dist < eps0]))
    return LocalizationReport(eps0, math.sqrt(band / total), target)


def dual_small_n(medium: RadialMedium) -> DualMedium:
    """Swap the roles of ``w`` and ``v`` for an index ``0 < n < 1``."""
    if not 0 < medium.n < 1:
        raise RadialDomainError("duality map needs 0 < n < 1")
    return DualMedium(medium, RadialMedium(1.0 / medium.n, medium.r0, medium.d))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_eigs_csv(path, pairs: Iterable[RadialEigenpair]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["m", "s_index", "k", "residual"])
        for p in pairs:
            wr.writerow([p.m, p.s_index, repr(p.k), repr(p.residual)])
    return path


def localization_sweep(pairs: Sequence[RadialEigenpair], eps0: float) -> list[dict]:
    rows = []
    for p in pairs:
        rows.append(
            {
                "m": p.m,
                "k": p.k,
                "eps0": eps0,
                "ratio_v": localization_ratio(p, eps0, "v").ratio,
                "ratio_w": localization_ratio(p, eps0, "w").ratio,
            }
        )
    return rows


def write_localization_csv(path, rows: Iterable[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=["m", "k", "eps0", "ratio_v", "ratio_w"])
        wr.writeheader()
        for row in rows:
            wr.writerow({key: row[key] for key in wr.fieldnames})
    return path
