"""Far-field matrices, the discrete far-field operator and the noise model."""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import forward as fw

CACHE_ENV = "TRANSEIG_CACHE"


class FarFieldError(ValueError):
    """Mismatched direction sets or invalid operator input."""


class AssemblyError(RuntimeError):
    """A forward solve failed while filling one column of the matrix."""

    def __init__(self, column: int, cause: fw.SolverFailure):
        super().__init__(f"column {column}: {cause}")
        self.column = column
        self.residual = cause.residual


@dataclass(frozen=True)
class DirectionSet:
    """``count`` equispaced directions ``2 pi j / count`` with trapezoid weights."""

    count: int

    def __post_init__(self):
        if self.count < 1:
            raise FarFieldError("direction count must be positive")

    @property
    def angles(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.count) / self.count

    @property
    def weights(self) -> np.ndarray:
        return np.full(self.count, 2 * np.pi / self.count)

    def vectors(self) -> np.ndarray:
        a = self.angles
        return np.c_[np.cos(a), np.sin(a)]


@dataclass(frozen=True, eq=False)
class HerglotzKernel:
    """Density ``g`` sampled on a direction set at wavenumber ``k``."""

    k: float
    dirs: DirectionSet
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.dirs.count,):
            raise FarFieldError("one coefficient per direction is required")
        if not np.all(np.isfinite(c)):
            raise FarFieldError("kernel coefficients must be finite")
        object.__setattr__(self, "coefficients", c)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.dirs.weights * np.abs(self.coefficients) ** 2)))


@dataclass(frozen=True, eq=False)
class FarFieldMatrix:
    """``entries[i, j] = u_inf(obs_i, inc_j, k)``."""

    k: float
    obs: DirectionSet
    inc: DirectionSet
    entries: np.ndarray
    noise_level: float = 0.0
    seed: int | None = None
    medium_hash: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        e = np.array(self.entries, dtype=complex)
        if e.shape != (self.obs.count, self.inc.count):
            raise FarFieldError(f"entries must be {self.obs.count}x{self.inc.count}")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)
        if self.noise_level > 0 and self.seed is None:
            raise FarFieldError("noisy matrices must record their seed")

    @property
    def scaled(self) -> np.ndarray:
        """Quadrature-weighted matrix ``(2 pi / N0) F``."""
        return self.entries * self.inc.weights[None, :]

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))


def psi_far(z, obs: DirectionSet, k: float) -> np.ndarray:
    """Far pattern of the fundamental solution centred at ``z``."""
    if not k > 0:
        raise FarFieldError("wavenumber must be positive")
    z = np.asarray(z, dtype=float)
    return np.exp(1j * math.pi / 4) / math.sqrt(8 * k * math.pi) * np.exp(-1j * k * (obs.vectors() @ z))


def apply_F(F: FarFieldMatrix, g: HerglotzKernel) -> np.ndarray:
    """Trapezoid rule for ``(F_k g)(x^_i) = int u_inf(x^_i, theta) g(theta) ds(theta)``."""
    if g.dirs != F.inc:
        raise FarFieldError("kernel directions differ from the incident direction set")
    return F.scaled @ g.coefficients


def add_noise(F: FarFieldMatrix, delta: float, seed: int | None = None) -> FarFieldMatrix:
    """``F + delta ||F||_F (R1 + i R2) / ||R1 + i R2||_F`` with seeded standard normals."""
    if delta < 0:
        raise FarFieldError("noise level must be nonnegative")
    if delta == 0:
        return replace(F, entries=F.entries.copy(), noise_level=0.0, seed=None)
    if seed is None:
        raise FarFieldError("a seed is required for delta > 0")
    rng = np.random.default_rng(seed)
    E = rng.standard_normal(F.entries.shape) + 1j * rng.standard_normal(F.entries.shape)
    noisy = F.entries + delta * np.linalg.norm(F.entries) * E / np.linalg.norm(E)
    return replace(F, entries=noisy, noise_level=float(delta), seed=int(seed))


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def _cache_paths(cache_dir: Path, digest: str, k: float, M0: int, N0: int) -> tuple[Path, Path]:
    stem = f"F_{digest}_k{k:.12g}_{M0}x{N0}"
    return cache_dir / f"{stem}.npy", cache_dir / f"{stem}.json"


def default_cache_dir() -> Path | None:
    val = os.environ.get(CACHE_ENV)
    return Path(val) if val else None


def load_cached(cache_dir, medium: fw.RefractiveField, k: float, obs: DirectionSet, inc: DirectionSet) -> FarFieldMatrix | None:
    if cache_dir is None:
        return None
    digest = medium.digest()
    npy, meta = _cache_paths(Path(cache_dir), digest, k, obs.count, inc.count)
    if not (npy.exists() and meta.exists()):
        return None
    info = json.loads(meta.read_text())
    if info.get("medium_hash") != digest or info.get("M0") != obs.count or info.get("N0") != inc.count:
        return None
    return FarFieldMatrix(float(info["k"]), obs, inc, np.load(npy), medium_hash=digest, meta=info)


def store_cached(cache_dir, F: FarFieldMatrix) -> None:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    npy, meta = _cache_paths(cache_dir, F.medium_hash, F.k, F.obs.count, F.inc.count)
    np.save(npy, np.asarray(F.entries))
    info = {"k": F.k, "M0": F.obs.count, "N0": F.inc.count, "medium_hash": F.medium_hash,
            "noise_level": F.noise_level, "seed": F.seed, **F.meta}
    meta.write_text(json.dumps(info, indent=1, sort_keys=True))


def assemble_F(
    medium: fw.RefractiveField,
    k: float,
    obs: DirectionSet,
    inc: DirectionSet,
    tol: float = fw.DEFAULT_TOL,
    workers: int = 1,
    cache_dir=None,
) -> FarFieldMatrix:
    """One forward solve per incident direction; columns are far fields on ``obs``."""
    cached = load_cached(cache_dir, medium, k, obs, inc)
    if cached is not None:
        return cached
    digest = medium.digest()
    entries = np.zeros((obs.count, inc.count), dtype=complex)
    residuals = np.zeros(inc.count)
    if medium.mask.any():
        fw.check_resolution(medium, k)
        op = fw.LSOperator(medium, k)
        dirs = obs.vectors()

        def column(j):
            inc_field = fw.IncidentField.plane(k, float(inc.angles[j]))
            try:
                tot = fw.solve_forward(medium, inc_field, tol, operator=op)
            except fw.SolverFailure as exc:
                raise AssemblyError(j, exc) from exc
            return j, fw.far_field_of_source(medium, k, medium.contrast * tot.u, dirs), tot.residual

        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                results = list(pool.map(column, range(inc.count)))
        else:
            results = [column(j) for j in range(inc.count)]
        for j, col, res in results:
            entries[:, j] = col
            residuals[j] = res
    F = FarFieldMatrix(k, obs, inc, entries, medium_hash=digest,
                       meta={"tol": tol, "max_residual": float(residuals.max(initial=0.0))})
    if cache_dir is not None:
        store_cached(cache_dir, F)
    return F


def disk_matrix(n: float, r0: float, k: float, obs: DirectionSet, inc: DirectionSet) -> FarFieldMatrix:
    """Far-field matrix of a centred homogeneous disk from its mode series."""
    ds = fw.disk_series(n, r0, k)
    return FarFieldMatrix(k, obs, inc, ds.far_matrix(obs.angles, inc.angles), meta={"source": "disk_series"})
