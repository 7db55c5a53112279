"""Command-line front end.

Every subcommand reads an optional flat ``key = value`` config file, lets flags
override it, writes its outputs into ``--out`` and records a ``manifest.json``
with the resolved parameters, seeds, versions and timings.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import detect as dt
from . import farfield as ff
from . import forward as fw
from . import imaging as im
from . import pspr as ps
from . import radial as rd
from . import recover as rc

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
KITE_ASSUMPTION = "kite boundary x(t) = (cos t + 0.65 cos 2t - 0.65, 1.5 sin t), scaled"

# key: (type, default, help)
KEYS: dict[str, tuple] = {
    "shape": (str, "disk", "scatterer: disk | square | kite | mask"),
    "n": (float, 2.0, "refractive index inside the scatterer"),
    "r0": (float, 1.0, "disk radius"),
    "side": (float, 2.0, "square side length"),
    "scale": (float, 1.0, "kite scale factor"),
    "mask_file": (str, None, "medium CSV written by 'forward --save-medium'"),
    "source": (str, "solver", "far-field data: solver | series (disk only)"),
    "h": (float, None, "solver grid spacing (default: 8 cells per interior wavelength)"),
    "directions": (int, 32, "observation and incident direction count"),
    "kmin": (float, 0.9, "lower end of the wavenumber range"),
    "kmax": (float, 1.1, "upper end of the wavenumber range"),
    "nk": (int, 201, "number of wavenumbers"),
    "k": (str, None, "wavenumber or comma-separated list"),
    "angle": (float, 0.0, "incident angle (radians)"),
    "delta": (float, 0.01, "relative noise level"),
    "seed": (int, 0, "base random seed"),
    "z": (str, "0.3,0.2", "probe point(s) 'x,y;x,y'"),
    "alpha_rule": (str, "morozov", "morozov | morozov_scaled | fixed:<value>"),
    "prominence": (float, dt.DEFAULT_PROMINENCE, "peak prominence in MAD units"),
    "ball_radius": (float, None, "a-priori ball radius (default 1.5x circumradius)"),
    "stabilizer": (float, rc.DEFAULT_STABILIZER, "relative numerator stabilizer of the recovery pencil"),
    "pixels": (int, im.DEFAULT_PIXELS, "image pixels per side"),
    "mmax": (int, 20, "largest angular order"),
    "m": (int, 3, "angular order of the disk mode"),
    "eps0": (float, 0.1, "boundary band width"),
    "amplitudes": (str, "0.01,0.02,0.04", "bump amplitudes"),
    "bump_angle": (float, 0.0, "bump centre angle"),
    "bump_width": (float, 0.3, "bump angular half-width"),
    "k_shift": (float, 1.05, "factor of the off-resonance control"),
    "tol": (float, fw.DEFAULT_TOL, "GMRES relative tolerance"),
    "workers": (int, 1, "worker threads"),
    "cache": (str, None, f"far-field cache directory (default ${ff.CACHE_ENV})"),
    "out": (str, "transeig_out", "output directory"),
}

COMMANDS = {
    "radial-eigs": ("eigenvalues of a radial medium", ["n", "r0", "kmin", "kmax", "mmax"]),
    "localize": ("boundary localization of radial eigenfunctions", ["n", "r0", "kmin", "kmax", "mmax", "eps0"]),
    "forward": ("far field of one plane wave", ["shape", "n", "r0", "side", "scale", "mask_file", "h", "directions", "k", "angle", "tol"]),
    "ffmatrix": ("far-field matrices over a wavenumber grid", ["shape", "n", "r0", "side", "scale", "mask_file", "source", "h", "directions", "kmin", "kmax", "nk", "tol", "workers", "cache"]),
    "detect": ("eigenvalue detection curve and peaks", ["shape", "n", "r0", "side", "scale", "mask_file", "source", "h", "directions", "kmin", "kmax", "nk", "delta", "seed", "z", "alpha_rule", "prominence", "tol", "workers", "cache"]),
    "recover": ("eigenfunction kernel recovery", ["shape", "n", "r0", "side", "scale", "mask_file", "source", "h", "directions", "k", "delta", "seed", "ball_radius", "stabilizer", "tol", "workers", "cache"]),
    "image": ("resonance and direct-sampling images", ["shape", "n", "r0", "side", "scale", "mask_file", "source", "h", "directions", "k", "delta", "seed", "ball_radius", "stabilizer", "pixels", "tol", "workers", "cache"]),
    "pspr": ("pseudo surface plasmon field of a disk with n < 1", ["n", "r0", "m", "k", "h", "eps0", "tol"]),
    "defect": ("boundary-defect sensitivity of a PSPR field", ["n", "r0", "m", "k", "h", "amplitudes", "bump_angle", "bump_width", "k_shift", "tol"]),
}


class UsageError(Exception):
    """Bad command line or configuration."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="transeig", description="Transmission eigenvalue toolkit.")
    parser.add_argument("--version", action="version", version=f"transeig {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    for name, (desc, keys) in COMMANDS.items():
        p = sub.add_parser(name, help=desc, description=desc)
        p.add_argument("--config", help="flat 'key = value' file; flags override it")
        for key in keys + ["seed", "out"]:
            if any(a.dest == key for a in p._actions):
                continue
            typ, default, text = KEYS[key]
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, default=None,
                           help=f"{text} (default: {default})")
        if name == "forward":
            p.add_argument("--save-medium", action="store_true", help="also write the medium CSV")
    return parser


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string("[run]\n" + path.read_text())
    unknown = set(cp["run"]) - set(KEYS)
    if unknown:
        raise UsageError(f"unknown config keys in {path}: {', '.join(sorted(unknown))}")
    return {k: KEYS[k][0](v) for k, v in cp["run"].items()}


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then flags."""
    cfg = {k: spec[1] for k, spec in KEYS.items()}
    if args.config:
        cfg.update(read_config(args.config))
    for k in KEYS:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["cache"] is None:
        cfg["cache"] = str(ff.default_cache_dir()) if ff.default_cache_dir() else None
    return cfg


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _floats(text) -> list[float]:
    if text is None:
        raise UsageError("a wavenumber (--k) is required")
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse number list {text!r}") from exc


def _points(text) -> list[tuple[float, float]]:
    pts = []
    for chunk in str(text).split(";"):
        vals = _floats(chunk)
        if len(vals) != 2:
            raise UsageError(f"probe point {chunk!r} needs two coordinates")
        pts.append((vals[0], vals[1]))
    return pts


def _alpha_rule(text: str) -> dt.AlphaRule:
    if text.startswith("fixed"):
        _, _, val = text.partition(":")
        return dt.AlphaRule("fixed", float(val or 0.0))
    return dt.AlphaRule(text)


def _k_grid(cfg) -> np.ndarray:
    if cfg["nk"] < 1 or cfg["kmax"] < cfg["kmin"] or cfg["kmin"] <= 0:
        raise UsageError("need 0 < kmin <= kmax and nk >= 1")
    return np.linspace(cfg["kmin"], cfg["kmax"], cfg["nk"])


def _spacing(cfg, k_max: float) -> float:
    if cfg["h"] is not None:
        return cfg["h"]
    return 2 * np.pi / (k_max * max(cfg["n"], 1.0)) / fw.POINTS_PER_WAVELENGTH


def build_medium(cfg, k_max: float, manifest: dict) -> fw.RefractiveField:
    shape = cfg["shape"]
    if shape == "mask":
        if not cfg["mask_file"]:
            raise UsageError("shape 'mask' needs mask_file")
        return fw.read_medium_csv(cfg["mask_file"])
    h = _spacing(cfg, k_max)
    if shape == "disk":
        return fw.disk_medium(cfg["n"], cfg["r0"], h)
    if shape == "square":
        return fw.square_medium(cfg["n"], cfg["side"], h)
    if shape == "kite":
        manifest.setdefault("assumptions", []).append(KITE_ASSUMPTION)
        return fw.kite_medium(cfg["n"], h, cfg["scale"])
    raise UsageError(f"unknown shape {shape!r}")


def matrix_source(cfg, k_max: float, manifest: dict):
    dirs = ff.DirectionSet(cfg["directions"])
    if cfg["source"] == "series":
        if cfg["shape"] != "disk":
            raise UsageError("series data exist only for the disk")
        manifest["medium"] = {"shape": "disk", "n": cfg["n"], "r0": cfg["r0"], "data": "series"}
        return dt.disk_source(cfg["n"], cfg["r0"], dirs, dirs), None
    if cfg["source"] != "solver":
        raise UsageError(f"unknown source {cfg['source']!r}")
    med = build_medium(cfg, k_max, manifest)
    manifest["medium"] = {"shape": cfg["shape"], "hash": med.digest(), "grid": [med.grid.nx, med.grid.ny], "h": med.grid.h}
    return dt.medium_source(med, dirs, dirs, cfg["cache"], cfg["tol"], cfg["workers"]), med


def _ball(cfg, med):
    if med is not None:
        ball = rc.Ball.around(med)
    else:
        ball = rc.Ball((0.0, 0.0), rc.BALL_FACTOR * cfg["r0"])
    return rc.Ball(ball.center, cfg["ball_radius"]) if cfg["ball_radius"] else ball


def _noisy(F, cfg, index: int):
    return ff.add_noise(F, cfg["delta"], cfg["seed"] + index) if cfg["delta"] > 0 else F


def _boundary(cfg, med):
    if cfg["shape"] == "disk":
        t = np.linspace(0, 2 * np.pi, 1025)
        return np.c_[cfg["r0"] * np.cos(t), cfg["r0"] * np.sin(t)]
    if cfg["shape"] == "square":
        return fw.square_boundary(cfg["side"])
    if cfg["shape"] == "kite":
        return fw.kite_boundary(cfg["scale"])
    return None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_radial_eigs(cfg, out: Path, manifest: dict) -> list[Path]:
    pairs = rd.find_radial_eigs(rd.RadialMedium(cfg["n"], cfg["r0"]), cfg["kmin"], cfg["kmax"], cfg["mmax"])
    manifest["count"] = len(pairs)
    return [rd.write_eigs_csv(out / "eigs.csv", pairs)]


def cmd_localize(cfg, out: Path, manifest: dict) -> list[Path]:
    pairs = rd.find_radial_eigs(rd.RadialMedium(cfg["n"], cfg["r0"]), cfg["kmin"], cfg["kmax"], cfg["mmax"])
    return [rd.write_localization_csv(out / "localization.csv", rd.localization_sweep(pairs, cfg["eps0"]))]


def cmd_forward(cfg, out: Path, manifest: dict, save_medium: bool = False) -> list[Path]:
    (k,) = _floats(cfg["k"])[:1]
    med = build_medium(cfg, k, manifest)
    manifest["medium"] = {"shape": cfg["shape"], "hash": med.digest(), "grid": [med.grid.nx, med.grid.ny], "h": med.grid.h}
    tot = fw.solve_forward(med, fw.IncidentField.plane(k, cfg["angle"]), cfg["tol"])
    obs = ff.DirectionSet(cfg["directions"]).angles
    manifest["residual"], manifest["iterations"] = tot.residual, tot.iterations
    paths = [fw.write_far_field_csv(out / "far_field.csv", k, obs, [cfg["angle"]], fw.far_field(tot, obs)[:, None])]
    if save_medium:
        paths.append(fw.write_medium_csv(out / "medium.csv", med))
    return paths


def cmd_ffmatrix(cfg, out: Path, manifest: dict) -> list[Path]:
    ks = _k_grid(cfg)
    source, _ = matrix_source(cfg, ks[-1], manifest)
    cache = Path(cfg["cache"]) if cfg["cache"] else out / "cache"
    paths = []
    for i, k in enumerate(ks):
        F = source(float(k))
        stem = out / f"F_{i:04d}.npy"
        np.save(stem, np.asarray(F.entries))
        paths.append(stem)
        if cfg["source"] == "solver" and not cfg["cache"]:
            ff.store_cached(cache, F)
    manifest["k_grid"] = ks.tolist()
    return paths


def cmd_detect(cfg, out: Path, manifest: dict) -> list[Path]:
    ks = _k_grid(cfg)
    source, _ = matrix_source(cfg, ks[-1], manifest)
    z = _points(cfg["z"])
    curve = dt.detection_curve(source, ks, z if len(z) > 1 else z[0], cfg["delta"], cfg["seed"], _alpha_rule(cfg["alpha_rule"]))
    peaks = dt.find_peaks(curve, cfg["prominence"])
    manifest["peaks"] = list(peaks.k)
    manifest["gaps"] = [list(g) for g in curve.gaps]
    return [dt.write_curve_csv(out / "curve.csv", curve), dt.write_peaks_json(out / "peaks.json", peaks, curve)]


def _recover_all(cfg, manifest):
    ks = _floats(cfg["k"])
    source, med = matrix_source(cfg, max(ks), manifest)
    ball = _ball(cfg, med)
    manifest["ball"] = {"center": list(ball.center), "radius": ball.radius}
    modes = []
    for i, k in enumerate(ks):
        modes.append(rc.recover(_noisy(source(k), cfg, i), ball, stabilizer=cfg["stabilizer"]))
    return modes, ball, source, med, ks


def cmd_recover(cfg, out: Path, manifest: dict) -> list[Path]:
    modes, *_ = _recover_all(cfg, manifest)
    paths = []
    for i, mode in enumerate(modes):
        paths.append(rc.write_mode_json(out / f"mode_{i}.json", mode))
        paths.append(rc.write_mode_csv(out / f"mode_{i}.csv", mode))
    manifest["rayleigh"] = [m.rayleigh for m in modes]
    return paths


def cmd_image(cfg, out: Path, manifest: dict) -> list[Path]:
    modes, ball, source, med, ks = _recover_all(cfg, manifest)
    grid = im.image_grid(ball, cfg["pixels"])
    res = im.indicator_res(modes, grid)
    dsm = im.indicator_dsm([_noisy(source(k), cfg, i) for i, k in enumerate(ks)], grid)
    paths = [im.write_image_csv(out / "image_res.csv", res), im.write_image_csv(out / "image_dsm.csv", dsm),
             im.write_image_csv(out / "image_hybrid.csv", im.hybrid(res, dsm))]
    boundary = _boundary(cfg, med)
    if boundary is not None:
        metric = im.concentration_metric(res, boundary, 0.05, 0.1)
        manifest["concentration"] = metric
        paths.append(im.write_metric_json(out / "metric.json", res, metric, 0.05, 0.1))
    return paths


def _pspr_setup(cfg):
    if not 0 < cfg["n"] < 1:
        raise UsageError("pspr needs 0 < n < 1")
    if cfg["k"] is not None:
        k = _floats(cfg["k"])[0]
    else:
        k = ps.disk_sle_eigenpair(cfg["n"], cfg["m"], cfg["r0"]).k
    return k, ps.kernel_for_disk_mode(cfg["m"], k)


def cmd_pspr(cfg, out: Path, manifest: dict) -> list[Path]:
    k, kernel = _pspr_setup(cfg)
    h = cfg["h"] or 0.02
    spec = ps.DefectSpec(cfg["r0"], fw.RadialBump(0.0, 0.3, 0.0))
    grid = ps.defect_grid(spec, h)
    field = ps.generate_pspr(fw.disk_medium(cfg["n"], cfg["r0"], h, grid=grid, supersample=1), kernel, k, cfg["eps0"])
    report = {"k": k, "m": cfg["m"], "norm_inside": field.norm_inside, "norm_annulus": field.norm_annulus,
              "localization": field.localization.ratio, "eps0": cfg["eps0"], "residual": field.residual}
    manifest.update(report)
    rep = out / "pspr.json"
    rep.write_text(json.dumps(report, indent=1))
    return [ps.write_pspr_csv(out / "pspr.csv", field), rep]


def cmd_defect(cfg, out: Path, manifest: dict) -> list[Path]:
    k, kernel = _pspr_setup(cfg)
    amps = _floats(cfg["amplitudes"])
    h = cfg["h"] or min(amps) / 2
    grid = ps.defect_grid(ps.DefectSpec(cfg["r0"], fw.RadialBump(cfg["bump_angle"], cfg["bump_width"], max(amps))), h)
    results = []
    for kk in (k, cfg["k_shift"] * k):
        base = None
        for a in amps:
            spec = ps.DefectSpec(cfg["r0"], fw.RadialBump(cfg["bump_angle"], cfg["bump_width"], a))
            r = ps.defect_experiment(cfg["n"], spec, kernel, kk, grid, base=base, tol=cfg["tol"])
            base = r.base
            results.append(r)
    manifest["sensitivity"] = [[r.k, r.amplitude, r.sensitivity] for r in results]
    return [ps.write_defect_json(out / "defect.json", results)]


HANDLERS = {
    "radial-eigs": cmd_radial_eigs,
    "localize": cmd_localize,
    "forward": cmd_forward,
    "ffmatrix": cmd_ffmatrix,
    "detect": cmd_detect,
    "recover": cmd_recover,
    "image": cmd_image,
    "pspr": cmd_pspr,
    "defect": cmd_defect,
}

NUMERICAL_ERRORS = (fw.SolverFailure, ff.AssemblyError, rc.RecoveryFailure, rd.UndefinedRatioError,
                    np.linalg.LinAlgError, FloatingPointError)


def _inputs_hash(command: str, cfg: dict) -> str:
    blob = json.dumps({"command": command, **cfg}, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def dispatch(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        cfg = resolve(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": args.command,
        "argv": argv,
        "config": cfg,
        "inputs_hash": _inputs_hash(args.command, cfg),
        "versions": {"transeig": __version__, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
    }
    start = time.perf_counter()
    code = EXIT_OK
    try:
        handler = HANDLERS[args.command]
        extra = {"save_medium": args.save_medium} if args.command == "forward" else {}
        manifest["outputs"] = [str(p) for p in handler(cfg, out, manifest, **extra)]
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        manifest["error"], code = str(exc), EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        manifest["error"], code = str(exc), EXIT_NUMERICAL
    except (ValueError, FileNotFoundError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        manifest["error"], code = str(exc), EXIT_USAGE
    manifest["seconds"] = time.perf_counter() - start
    manifest["exit_code"] = code
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str))
    return code


def main() -> None:
    sys.exit(dispatch())
