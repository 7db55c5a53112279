"""Recovery of the Herglotz kernel of a transmission eigenfunction from far-field data.

At a detected eigenvalue ``k`` the kernel ``g0`` minimises ``||F_k g||`` subject to
``||v_{g,k}||_{L^2(B_R)} = 1`` where ``v_{g,k}`` is the Herglotz wave of ``g`` and
``B_R`` is a ball known to contain the scatterer.  The constrained problem is solved
as the smallest eigenpair of the Hermitian pencil
``(A^H A + (eta ||A||_2)^2 I, H^H H + ridge I)``.  The numerator term ``eta`` keeps
kernels whose far field and Herglotz wave are both below round-off from winning.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from . import farfield as ff
from . import forward as fw

DEFAULT_RIDGE_FACTOR = 1e-10
DEFAULT_STABILIZER = 1e-3
RIDGE_RETRIES = 3
BALL_FACTOR = 1.5
CONSTRAINT_TOL = 1e-8
_COND_LIMIT = 1e15


class RecoveryError(ValueError):
    """Invalid recovery input, e.g. an empty ball or zero fields."""


class RecoveryFailure(RuntimeError):
    """The constraint matrix stayed singular after all ridge increases."""


@dataclass(frozen=True)
class Ball:
    """A-priori ball ``B_R`` containing the scatterer."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise RecoveryError("ball radius must be positive")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.asarray(points, dtype=float) - np.asarray(self.center)
        return np.einsum("ij,ij->i", d, d) <= self.radius**2

    @classmethod
    def around(cls, medium: fw.RefractiveField, factor: float = BALL_FACTOR) -> "Ball":
        """Ball centred at the support centroid with ``factor`` times its circumradius."""
        if not medium.mask.any():
            raise RecoveryError("medium has empty support")
        pts = medium.grid.points()[medium.mask.ravel()]
        c = pts.mean(axis=0)
        # cell corners reach h/sqrt(2) beyond the centres
        r = float(np.max(np.linalg.norm(pts - c, axis=1))) + medium.grid.h / math.sqrt(2)
        return cls((c[0], c[1]), factor * r)

    def grid(self, h: float) -> fw.SamplingGrid:
        cx, cy = self.center
        R = self.radius
        return fw.SamplingGrid.covering(cx - R, cx + R, cy - R, cy + R, h, margin=0)


@dataclass(frozen=True, eq=False)
class RecoveredMode:
    """Recovered kernel ``g0`` and its Herglotz wave on the evaluation grid."""

    g0: ff.HerglotzKernel
    v_field: np.ndarray
    grid: fw.SamplingGrid
    ball: Ball
    objective: float
    constraint_norm: float
    rayleigh: float
    ridge: float
    degenerate: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if abs(self.constraint_norm - 1.0) > CONSTRAINT_TOL:
            raise RecoveryError(f"constraint norm {self.constraint_norm} is not 1")

    @property
    def k(self) -> float:
        return self.g0.k


@dataclass(frozen=True, eq=False)
class RecoveryProblem:
    """Inputs of one recovery: far-field matrix, ball and evaluation grid."""

    F: ff.FarFieldMatrix
    ball: Ball
    eval_grid: fw.SamplingGrid
    ridge: float | None = None
    stabilizer: float = DEFAULT_STABILIZER

    def __post_init__(self):
        x0, x1, y0, y1 = self.eval_grid.bounds()
        cx, cy = self.ball.center
        R = self.ball.radius
        slack = self.eval_grid.h
        if x0 > cx - R + slack or x1 < cx + R - slack or y0 > cy - R + slack or y1 < cy + R - slack:
            raise RecoveryError("evaluation grid does not cover the ball")

    def solve(self) -> RecoveredMode:
        H = build_H(self.F.k, self.F.inc, self.ball, self.eval_grid)
        return min_constrained(self.F, H, self.ridge, stabilizer=self.stabilizer, grid=self.eval_grid, ball=self.ball)


def build_H(k: float, dirs: ff.DirectionSet, ball: Ball, eval_grid: fw.SamplingGrid, return_mask: bool = False):
    """Matrix taking kernel coefficients to ``h * v_{g,k}`` at cell centres inside the ball.

    ``||H g||_2`` is the midpoint-rule value of ``||v_{g,k}||_{L^2(B_R)}``.
    """
    pts = eval_grid.points()
    inside = ball.contains(pts)
    if not inside.any():
        raise RecoveryError("no evaluation cell centre lies inside the ball")
    theta = dirs.vectors()
    H = eval_grid.h * np.exp(1j * k * (pts[inside] @ theta.T)) * dirs.weights[None, :]
    return (H, inside) if return_mask else H


def _smallest_pencil(M1: np.ndarray, M2: np.ndarray):
    if np.linalg.cond(M2) > _COND_LIMIT:
        raise linalg.LinAlgError("constraint matrix is numerically singular")
    lam, vec = linalg.eigh(M1, M2, subset_by_index=[0, 0])
    return float(lam[0]), vec[:, 0]


def min_constrained(
    F: ff.FarFieldMatrix,
    H: np.ndarray,
    ridge: float | None = None,
    *,
    stabilizer: float = DEFAULT_STABILIZER,
    grid: fw.SamplingGrid | None = None,
    ball: Ball | None = None,
) -> RecoveredMode:
    """Minimise ``||A g|| / ||H g||`` through the pencil ``(A^H A + beta I, H^H H + ridge I)``.

    ``A`` is the quadrature-scaled far-field matrix and ``beta = (stabilizer ||A||_2)^2``;
    ``stabilizer=0`` gives the unstabilised quotient.  The result is rescaled so that
    ``||H g0|| = 1`` and rotated so the largest entry of ``H g0`` is real positive.
    When ``A = 0`` every kernel is optimal and the one of least ``||g||`` is returned
    with ``degenerate=True``.
    """
    A = F.scaled
    H = np.asarray(H, dtype=complex)
    N0 = F.inc.count
    if H.shape[1] != N0:
        raise RecoveryError("H and F must share the incident direction set")
    HH = H.conj().T @ H
    AA = A.conj().T @ A
    ridge = DEFAULT_RIDGE_FACTOR * float(np.trace(HH).real) / N0 if ridge is None else float(ridge)
    if ridge < 0 or stabilizer < 0:
        raise RecoveryError("ridge and stabilizer must be nonnegative")

    degenerate = not np.any(A)
    if degenerate:
        # least ||g|| with ||H g|| = 1 is the top right singular vector of H
        _, _, Vh = np.linalg.svd(H)
        g, lam = Vh[0].conj(), 0.0
    else:
        AA = AA + (stabilizer * np.linalg.norm(A, 2)) ** 2 * np.eye(N0)
        for _ in range(RIDGE_RETRIES + 1):
            try:
                lam, g = _smallest_pencil(AA, HH + ridge * np.eye(N0))
                break
            except linalg.LinAlgError:
                ridge = ridge * 10 if ridge > 0 else DEFAULT_RIDGE_FACTOR * float(np.trace(HH).real) / N0
        else:
            raise RecoveryFailure(f"constraint matrix singular up to ridge {ridge:g}")

    Hg = H @ g
    scale = np.linalg.norm(Hg)
    if scale == 0:
        raise RecoveryFailure("recovered kernel has a vanishing Herglotz wave in the ball")
    j = int(np.argmax(np.abs(Hg)))
    g = g * (abs(Hg[j]) / Hg[j]) / scale
    Hg = H @ g
    constraint = float(np.linalg.norm(Hg))
    objective = float(np.linalg.norm(A @ g))
    kernel = ff.HerglotzKernel(F.k, F.inc, g)
    if grid is not None:
        v = fw.herglotz_eval(kernel, F.k, grid.points()).reshape(grid.shape)
    else:
        v = Hg
    return RecoveredMode(
        kernel, v, grid, ball, objective, constraint, objective / constraint, ridge, degenerate,
        meta={"pencil_eigenvalue": max(lam, 0.0), "stabilizer": stabilizer, "inside_cells": int(H.shape[0]), "medium_hash": F.medium_hash},
    )


def recover(
    F: ff.FarFieldMatrix,
    ball: Ball,
    h: float | None = None,
    ridge: float | None = None,
    stabilizer: float = DEFAULT_STABILIZER,
) -> RecoveredMode:
    """Recover the mode at ``F.k`` on a grid of spacing ``h`` (default ``R / 32``) covering ``ball``."""
    grid = ball.grid(h if h is not None else ball.radius / 32)
    return RecoveryProblem(F, ball, grid, ridge, stabilizer).solve()


def rayleigh_scan(source, k_grid, ball: Ball, h: float | None = None, stabilizer: float = DEFAULT_STABILIZER) -> np.ndarray:
    """``||A g0|| / ||H g0||`` of the recovered kernel at each wavenumber of ``k_grid``."""
    return np.array([recover(source(float(k)), ball, h, stabilizer=stabilizer).rayleigh for k in k_grid])


def mode_correlation(v_field: np.ndarray, references, mask: np.ndarray | None = None) -> float:
    """Norm of the projection of the normalised ``v_field`` onto the span of ``references``.

    ``references`` is one array or a sequence of arrays sampled like ``v_field``;
    ``mask`` restricts all of them to a subset of samples (e.g. the scatterer).
    """
    v = np.asarray(v_field, dtype=complex)
    refs = [np.asarray(references, dtype=complex)] if np.ndim(references) == v.ndim else [np.asarray(r, dtype=complex) for r in references]
    if mask is not None:
        m = np.asarray(mask, dtype=bool)
        v = v[m]
        refs = [r[m] for r in refs]
    v = v.ravel()
    R = np.stack([r.ravel() for r in refs], axis=1)
    if R.shape[0] != v.size:
        raise RecoveryError("fields are sampled differently")
    nv = np.linalg.norm(v)
    if nv == 0:
        raise RecoveryError("v_field vanishes")
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        raise RecoveryError("reference fields vanish")
    Q = U[:, s > s[0] * 1e-10]
    return float(min(1.0, np.linalg.norm(Q.conj().T @ v) / nv))


def disk_mode_references(m: int, k: float, grid: fw.SamplingGrid, center=(0.0, 0.0)) -> list[np.ndarray]:
    """``J_m(k r) e^{+-i m phi}`` on the grid centres (one field for ``m = 0``)."""
    from scipy.special import jv

    X, Y = grid.centers()
    r = np.hypot(X - center[0], Y - center[1])
    phi = np.arctan2(Y - center[1], X - center[0])
    orders = [m] if m == 0 else [m, -m]
    return [jv(m, k * r) * np.exp(1j * q * phi) for q in orders]


def write_mode_json(path, mode: RecoveredMode) -> Path:
    path = Path(path)
    data = {
        "k": mode.k,
        "directions": mode.g0.dirs.count,
        "coefficients_re": mode.g0.coefficients.real.tolist(),
        "coefficients_im": mode.g0.coefficients.imag.tolist(),
        "objective": mode.objective,
        "constraint_norm": mode.constraint_norm,
        "rayleigh": mode.rayleigh,
        "ridge": mode.ridge,
        "degenerate": mode.degenerate,
        "ball": {"center": list(mode.ball.center), "radius": mode.ball.radius} if mode.ball else None,
        **mode.meta,
    }
    path.write_text(json.dumps(data, indent=1))
    return path


def write_mode_csv(path, mode: RecoveredMode) -> Path:
    """``x, y, abs_v`` for every evaluation cell centre."""
    if mode.grid is None:
        raise RecoveryError("mode has no evaluation grid")
    path = Path(path)
    pts = mode.grid.points()
    table = np.c_[pts, np.abs(mode.v_field).ravel()]
    np.savetxt(path, table, delimiter=",", header="x,y,abs_v", comments="", fmt="%.12g")
    return path
