"""Cylindrical and spherical Bessel functions of the first kind and their zeros.

Function values are delegated to ``scipy.special`` (AMOS/Cephes), which meets
the accuracy targets used here. Zero location is done locally: brackets come
either from the Airy-type bounds on ``j_{m,s}`` (orders ``m >= 10``) or from a
scan at spacing ``pi/4``; each bracket is checked for a sign change, bisected
to ``1e-12`` and polished with two Newton steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

MAX_ORDER = 512
AIRY_BRACKET_MIN_ORDER = 10
SCAN_STEP = math.pi / 4
BISECT_TOL = 1e-12

_CBRT2 = 2.0 ** (1.0 / 3.0)


class BesselDomainError(ValueError):
    """Raised for unsupported orders or arguments."""


def _check_order(m) -> int:
    if isinstance(m, bool) or int(m) != m:
        raise BesselDomainError(f"order must be an integer, got {m!r}")
    m = int(m)
    if not 0 <= m <= MAX_ORDER:
        raise BesselDomainError(f"order {m} outside supported range [0, {MAX_ORDER}]")
    return m


def _check_arg(x):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise BesselDomainError("argument must be finite")
    if np.any(x < 0):
        raise BesselDomainError("argument must be non-negative")
    return x


def _scalar_or_array(x, value):
    return float(value) if np.ndim(x) == 0 else value


def bessel_j(m: int, x):
    """J_m(x) for integer order ``0 <= m <= 512`` and real ``x >= 0``."""
    m = _check_order(m)
    xa = _check_arg(x)
    return _scalar_or_array(x, special.jv(m, xa))


def bessel_j_prime(m: int, x):
    """J_m'(x) from ``(J_{m-1} - J_{m+1})/2``, with ``J_0' = -J_1``."""
    m = _check_order(m)
    xa = _check_arg(x)
    if m == 0:
        val = -special.jv(1, xa)
    else:
        val = 0.5 * (special.jv(m - 1, xa) - special.jv(m + 1, xa))
    return _scalar_or_array(x, val)


def _bessel_j_second(m: int, x: float) -> float:
    # Bessel ODE: x^2 y'' + x y' + (x^2 - m^2) y = 0
    return -bessel_j_prime(m, x) / x - (1.0 - (m / x) ** 2) * bessel_j(m, x)


def spherical_j(m: int, x):
    """Spherical Bessel ``j_m(x) = sqrt(pi/(2x)) J_{m+1/2}(x)``; ``j_m(0)`` is the analytic limit."""
    m = _check_order(m)
    xa = _check_arg(x)
    return _scalar_or_array(x, special.spherical_jn(m, xa))


def spherical_j_prime(m: int, x):
    m = _check_order(m)
    xa = _check_arg(x)
    return _scalar_or_array(x, special.spherical_jn(m, xa, derivative=True))


# ---------------------------------------------------------------------------
# zeros
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZeroBracket:
    """Interval ``(lo, hi)`` holding exactly one zero of J_m (or J_m')."""

    m: int
    s: int
    lo: float
    hi: float
    derivative: bool = False

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"empty bracket ({self.lo}, {self.hi})")

    def values(self) -> tuple[float, float]:
        fn = bessel_j_prime if self.derivative else bessel_j
        return fn(self.m, self.lo), fn(self.m, self.hi)

    def has_sign_change(self) -> bool:
        a, b = self.values()
        return a * b < 0


def airy_zero_estimate(s: int) -> tuple[float, float]:
    """Range ``(a_lo, a_hi)`` for the s-th negative zero of Ai.

    ``a_s = -t (1 + sigma_s)`` with ``t = (3 pi (4s - 1) / 8)^{2/3}`` and
    ``0 <= sigma_s <= 0.130 (3 pi (4s - 1.051) / 8)^{-2}``. The value with
    ``sigma_s = 0`` is the upper end of the range.
    """
    if s < 1:
        raise BesselDomainError("zero index must be >= 1")
    t = (3.0 * math.pi / 8.0 * (4 * s - 1)) ** (2.0 / 3.0)
    sigma_max = 0.130 * (3.0 * math.pi / 8.0 * (4 * s - 1.051)) ** -2
    return -t * (1.0 + sigma_max), -t


def airy_bounds(m: int, s: int, a_s: float) -> tuple[float, float]:
    """Lower/upper bound on ``j_{m,s}`` given the Airy zero ``a_s``."""
    lo = m - a_s / _CBRT2 * m ** (1.0 / 3.0)
    hi = lo + 0.15 * a_s**2 * _CBRT2 / m ** (1.0 / 3.0)
    return lo, hi


def _airy_bracket(m: int, s: int) -> ZeroBracket | None:
    a_lo, a_hi = airy_zero_estimate(s)
    lo = airy_bounds(m, s, a_hi)[0]
    hi = airy_bounds(m, s, a_lo)[1]
    pad = 1e-3 * (hi - lo) + 1e-9
    # zeros of J_m are more than pi apart, so pi/4 sampling sees each one;
    # the bounds are only trusted when they isolate a single zero
    x = np.linspace(lo - pad, hi + pad, max(2, int(np.ceil((hi - lo) / SCAN_STEP)) + 1))
    f = special.jv(m, x)
    idx = np.flatnonzero(f[:-1] * f[1:] < 0)
    if idx.size != 1 or np.any(f == 0.0):
        return None
    i = int(idx[0])
    return ZeroBracket(m, s, float(x[i]), float(x[i + 1]))


def _scan_bracket(m: int, s: int, derivative: bool, start: float | None = None) -> ZeroBracket:
    fn = bessel_j_prime if derivative else bessel_j
    # J_m and J_m' (m >= 1) keep one sign on (0, m]; J_0' < 0 on (0, j'_{0,1})
    x = start if start is not None else max(0.5 * m, 1e-3)
    fx = fn(m, x)
    count = 0
    while True:
        x_next = x + SCAN_STEP
        f_next = fn(m, x_next)
        if fx * f_next < 0 or f_next == 0.0:
            count += 1
            if count == s:
                return ZeroBracket(m, s, x, x_next if f_next != 0.0 else x_next + 1e-12, derivative)
        x, fx = x_next, f_next


def zero_bracket(m: int, s: int, derivative: bool = False) -> ZeroBracket:
    """Bracket for ``j_{m,s}`` (or ``j'_{m,s}`` when ``derivative``)."""
    m = _check_order(m)
    if s < 1:
        raise BesselDomainError("zero index must be >= 1")
    if derivative:
        if m >= AIRY_BRACKET_MIN_ORDER:
            # interlacing m <= j'_{m,1} < j_{m,1} < j'_{m,2} < j_{m,2} < ...
            lo = float(m) if s == 1 else bessel_zero(m, s - 1)
            br = ZeroBracket(m, s, lo, bessel_zero(m, s), True)
            if br.has_sign_change():
                return br
        return _scan_bracket(m, s, True)
    if m >= AIRY_BRACKET_MIN_ORDER:
        br = _airy_bracket(m, s)
        if br is not None:
            return br
    return _scan_bracket(m, s, False)


def _refine(m: int, br: ZeroBracket) -> float:
    fn = bessel_j_prime if br.derivative else bessel_j
    lo, hi = br.lo, br.hi
    flo = fn(m, lo)
    while hi - lo > BISECT_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        fmid = fn(m, mid)
        if fmid == 0.0:
            return mid
        if flo * fmid < 0:
            hi = mid
        else:
            lo, flo = mid, fmid
    x = 0.5 * (lo + hi)
    for _ in range(2):
        if br.derivative:
            step = bessel_j_prime(m, x) / _bessel_j_second(m, x)
        else:
            step = bessel_j(m, x) / bessel_j_prime(m, x)
        x_new = x - step
        if not br.lo <= x_new <= br.hi:
            break
        x = x_new
    return x


def bessel_zero(m: int, s: int) -> float:
    """The s-th positive zero ``j_{m,s}`` of J_m."""
    return _refine(m, zero_bracket(m, s))


def bessel_zero_prime(m: int, s: int) -> float:
    """The s-th positive zero ``j'_{m,s}`` of J_m' (``x = 0`` excluded)."""
    return _refine(m, zero_bracket(m, s, derivative=True))


def bessel_zeros(m: int, count: int) -> np.ndarray:
    """First ``count`` zeros of J_m, each located independently."""
    return np.array([bessel_zero(m, s) for s in range(1, count + 1)])
