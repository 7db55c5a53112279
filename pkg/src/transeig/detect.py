"""Eigenvalue detection from far-field data.

For each wavenumber the far-field equation ``F_k g = Psi_inf(., z)`` is solved
with Tikhonov regularisation and ``||g||`` is recorded; transmission
eigenvalues show up as peaks of ``k -> ||g_k||``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, signal

from . import farfield as ff
from . import forward as fw

DEFAULT_PROMINENCE = 3.0
_LOG_ALPHA_RANGE = (-80.0, 20.0)


class DetectError(ValueError):
    """Invalid detection input."""


@dataclass(frozen=True)
class AlphaRule:
    """How the Tikhonov parameter is chosen.

    ``morozov``: residual ``||A g - rhs|| = delta ||F||_F``.
    ``morozov_scaled``: same with the quadrature-scaled ``||A||_F``.
    ``fixed``: ``alpha = value``.
    If no discrepancy solution exists the fallback is
    ``max(1e-8, (delta ||F||_F)^2)``.
    """

    kind: str = "morozov"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("morozov", "morozov_scaled", "fixed"):
            raise DetectError(f"unknown alpha rule {self.kind!r}")
        if self.kind == "fixed" and self.value < 0:
            raise DetectError("fixed alpha must be nonnegative")

    def describe(self) -> str:
        return f"fixed({self.value:g})" if self.kind == "fixed" else self.kind


@dataclass(frozen=True, eq=False)
class TikhonovResult:
    g: ff.HerglotzKernel
    residual: float
    alpha: float
    pseudo_inverse: bool = False


@dataclass(frozen=True, eq=False)
class DetectionCurve:
    """``||g||`` per wavenumber; ``gaps`` lists wavenumbers whose assembly failed.

    ``degenerate`` marks curves of identically vanishing data (zero contrast),
    for which ``gnorm`` is zero throughout.
    """

    k_samples: np.ndarray
    gnorm: np.ndarray
    z: tuple
    alpha_rule: AlphaRule
    delta: float
    residual: np.ndarray
    alpha: np.ndarray
    seed: int | None = None
    gaps: tuple[float, ...] = ()

    def __post_init__(self):
        k = np.asarray(self.k_samples, dtype=float)
        if np.any(np.diff(k) <= 0):
            raise DetectError("wavenumbers must be strictly increasing")
        g = np.asarray(self.gnorm, dtype=float)
        if g.shape != k.shape or not np.all(np.isfinite(g)) or np.any(g < 0):
            raise DetectError("gnorm must be finite and nonnegative")
        object.__setattr__(self, "k_samples", k)
        object.__setattr__(self, "gnorm", g)

    @property
    def degenerate(self) -> bool:
        return bool(np.all(self.gnorm == 0))

    def flatness(self) -> float:
        """``max / min`` of ``gnorm`` (1 for a constant curve)."""
        lo, hi = float(self.gnorm.min()), float(self.gnorm.max())
        if hi == lo:
            return 1.0
        return math.inf if lo == 0 else hi / lo

    def log_curve(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.gnorm)


@dataclass(frozen=True)
class PeakSet:
    k: tuple[float, ...] = ()
    prominence: tuple[float, ...] = ()
    index: tuple[int, ...] = ()

    def __len__(self):
        return len(self.k)

    def nearest(self, target: float) -> float | None:
        if not self.k:
            return None
        arr = np.asarray(self.k)
        return float(arr[np.argmin(np.abs(arr - target))])


# ---------------------------------------------------------------------------
# Tikhonov
# ---------------------------------------------------------------------------


def _svd(A: np.ndarray):
    return np.linalg.svd(A, full_matrices=False)


def tikhonov_solve(F: ff.FarFieldMatrix, rhs: np.ndarray, alpha: float, svd=None) -> TikhonovResult:
    """Minimiser of ``||A g - rhs||^2 + alpha ||g||^2`` with ``A = (2 pi / N0) F``.

    ``||g||`` is the Euclidean norm of the coefficient vector. For
    ``alpha = 0`` the pseudo-inverse solution is returned, flagged when the
    matrix is numerically rank deficient.
    """
    rhs = np.asarray(rhs, dtype=complex)
    if rhs.shape != (F.obs.count,):
        raise DetectError("rhs length must match the observation directions")
    if alpha < 0:
        raise DetectError("alpha must be nonnegative")
    A = F.scaled
    U, s, Vh = svd if svd is not None else _svd(A)
    beta = U.conj().T @ rhs
    flagged = False
    if alpha == 0:
        cutoff = max(A.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
        keep = s > cutoff
        flagged = bool(not keep.all())
        filt = np.zeros_like(s)
        filt[keep] = 1.0 / s[keep]
    else:
        filt = s / (s * s + alpha)
    g = Vh.conj().T @ (filt * beta)
    res = float(np.linalg.norm(A @ g - rhs))
    return TikhonovResult(ff.HerglotzKernel(F.k, F.inc, g), res, float(alpha), flagged)


def choose_alpha(F: ff.FarFieldMatrix, rhs: np.ndarray, delta: float, rule: AlphaRule, svd=None) -> float:
    if rule.kind == "fixed":
        return rule.value
    A = F.scaled
    U, s, _ = svd if svd is not None else _svd(A)
    beta = U.conj().T @ rhs
    # part of rhs outside the range of A is never fitted
    out_of_range = max(0.0, float(np.linalg.norm(rhs) ** 2 - np.linalg.norm(beta) ** 2))
    norm = F.frobenius() if rule.kind == "morozov" else float(np.linalg.norm(A))
    target = delta * norm
    fallback = max(1e-8, (delta * F.frobenius()) ** 2)

    def discrepancy(log_alpha):
        a = math.exp(log_alpha)
        r = a / (s * s + a) * beta
        return math.sqrt(float(np.sum(np.abs(r) ** 2)) + out_of_range) - target

    lo, hi = _LOG_ALPHA_RANGE
    try:
        return math.exp(optimize.brentq(discrepancy, lo, hi, xtol=1e-10))
    except ValueError:
        return fallback


def solve_far_field_equation(F: ff.FarFieldMatrix, z, delta: float, rule: AlphaRule) -> TikhonovResult:
    rhs = ff.psi_far(z, F.obs, F.k)
    dec = _svd(F.scaled)
    alpha = choose_alpha(F, rhs, delta, rule, dec)
    return tikhonov_solve(F, rhs, alpha, dec)


# ---------------------------------------------------------------------------
# curves and peaks
# ---------------------------------------------------------------------------


MatrixSource = Callable[[float], ff.FarFieldMatrix]


def medium_source(
    medium: fw.RefractiveField,
    obs: ff.DirectionSet,
    inc: ff.DirectionSet,
    cache_dir=None,
    tol: float = fw.DEFAULT_TOL,
    workers: int = 1,
) -> MatrixSource:
    def get(k: float) -> ff.FarFieldMatrix:
        return ff.assemble_F(medium, k, obs, inc, tol=tol, workers=workers, cache_dir=cache_dir)

    return get


def disk_source(n: float, r0: float, obs: ff.DirectionSet, inc: ff.DirectionSet) -> MatrixSource:
    """Exact matrices of a centred homogeneous disk."""

    def get(k: float) -> ff.FarFieldMatrix:
        return ff.disk_matrix(n, r0, k, obs, inc)

    return get


def detection_curve(
    source: MatrixSource,
    k_grid: Sequence[float],
    z,
    delta: float = 0.0,
    seed: int | None = None,
    alpha_rule: AlphaRule = AlphaRule(),
) -> DetectionCurve:
    """``||g_k||`` over ``k_grid`` for one probe point or a set of probes.

    Noise at the ``i``-th wavenumber uses seed ``seed + i``. With several
    probes (``z`` of shape ``(P, 2)``) the log-norms are averaged.
    """
    zs = np.atleast_2d(np.asarray(z, dtype=float))
    if zs.shape[1] != 2:
        raise DetectError("probe points must be planar")
    if delta > 0 and seed is None:
        raise DetectError("a seed is required for delta > 0")
    ks, norms, res, alphas, gaps = [], [], [], [], []
    for i, k in enumerate(np.asarray(k_grid, dtype=float)):
        try:
            F = source(float(k))
        except (ff.AssemblyError, fw.SolverFailure):
            gaps.append(float(k))
            continue
        F = ff.add_noise(F, delta, None if delta == 0 else seed + i)
        dec = _svd(F.scaled)
        logs, r_k, a_k = [], [], []
        for zp in zs:
            rhs = ff.psi_far(zp, F.obs, F.k)
            alpha = choose_alpha(F, rhs, delta, alpha_rule, dec)
            sol = tikhonov_solve(F, rhs, alpha, dec)
            logs.append(np.linalg.norm(sol.g.coefficients))
            r_k.append(sol.residual)
            a_k.append(alpha)
        logs = np.asarray(logs)
        if np.all(logs > 0):
            val = float(np.exp(np.mean(np.log(logs))))
        else:
            val = 0.0
        ks.append(float(k))
        norms.append(val)
        res.append(float(np.mean(r_k)))
        alphas.append(float(np.mean(a_k)))
    zval = tuple(map(float, zs[0])) if len(zs) == 1 else tuple(tuple(map(float, p)) for p in zs)
    return DetectionCurve(np.array(ks), np.array(norms), zval, alpha_rule, float(delta),
                          np.array(res), np.array(alphas), seed, tuple(gaps))


def _parabolic(x: np.ndarray, y: np.ndarray, i: int) -> float:
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    den = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / den
    b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / den
    if a >= 0:
        return float(x1)
    return float(min(max(-b / (2 * a), x0), x2))


def find_peaks(curve: DetectionCurve, prominence: float = DEFAULT_PROMINENCE) -> PeakSet:
    """Strict local maxima of ``log ||g||`` standing out from the background.

    A maximum counts when it exceeds ``median + prominence * MAD`` of the
    log-curve and its topographic prominence exceeds ``prominence * MAD``.
    Locations are refined by a parabola through the three samples.
    """
    if curve.k_samples.size < 5:
        raise DetectError("peak search needs at least five samples")
    if curve.degenerate:
        return PeakSet()
    y = curve.log_curve()
    finite = np.isfinite(y)
    if not finite.all():
        y = np.where(finite, y, np.min(y[finite]))
    med = float(np.median(y))
    mad = float(np.median(np.abs(y - med)))
    spread = float(y.max() - y.min())
    if spread == 0:
        return PeakSet()
    # an exactly flat background has zero MAD; any excursion then counts
    mad = max(mad, 1e-9 * spread)
    idx, props = signal.find_peaks(y, height=med + prominence * mad, prominence=prominence * mad)
    # scipy keeps flat-topped maxima; keep strict ones only
    strict = [j for j, i in enumerate(idx) if y[i] > y[i - 1] and y[i] > y[i + 1]]
    idx = idx[strict]
    prom = props["prominences"][strict]
    ks = [_parabolic(curve.k_samples, y, int(i)) for i in idx]
    return PeakSet(tuple(ks), tuple(float(p) for p in prom), tuple(int(i) for i in idx))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------


def write_curve_csv(path, curve: DetectionCurve) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["k", "gnorm", "residual", "alpha"])
        for row in zip(curve.k_samples, curve.gnorm, curve.residual, curve.alpha):
            wr.writerow([repr(float(v)) for v in row])
    return path


def write_peaks_json(path, peaks: PeakSet, curve: DetectionCurve | None = None) -> Path:
    path = Path(path)
    data = {"peaks": [{"k": k, "prominence": p} for k, p in zip(peaks.k, peaks.prominence)]}
    if curve is not None:
        data.update(z=curve.z, delta=curve.delta, seed=curve.seed, alpha_rule=curve.alpha_rule.describe(),
                    gaps=list(curve.gaps))
    path.write_text(json.dumps(data, indent=1))
    return path
