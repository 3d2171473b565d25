"""Command-line benchmark driver.

Every run writes deterministic CSV/JSON results into the output directory,
each CSV starting with ``#`` metadata lines (version, config hash, DOFs,
wavenumbers, density ratios, spectra convention).  Wall-clock times go to a
separate ``timings.csv``.  PNG figures are rendered next to the data unless
``--no-plot`` is given.

Exit codes: 0 success, 2 configuration error, 3 resource guard, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import Assembler, P1Space
from .fields import (
    EXCLUDED,
    PlaneWave,
    SeriesConvergenceError,
    cube_resonances,
    evaluate_field,
    sphere_series_oracle,
)
from .formulations import (
    ALL_KINDS,
    FormulationKind,
    build_multiple,
    memory_estimate,
    solve,
)
from .linalg import condition_number, eigenvalues
from .materials import Material, builtin_material
from .mesh import MeshError, cube_divisions_for, import_msh, make_cube, make_icosphere
from .spectral import (
    CONVENTION,
    OPERATOR_PRODUCT_VD,
    DimensionCapError,
    accumulation_points,
    cluster_metrics,
    sorted_spectrum,
    spectral_report,
)

log = logging.getLogger("transbem")

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_NUMERICAL = 0, 2, 3, 4

MODES = ("spectrum", "condition", "solve", "sweep-density", "sweep-frequency", "multi", "field")

MATERIAL_LETTERS = {"f": "fat", "b": "bone", "i": "iron"}

# Desk-scale defaults per mode
DEFAULTS = {
    "spectrum": {"geometry": {"type": "icosphere", "level": 2}, "exterior": "water", "interior": "bone",
                 "frequency": 500.0},
    "condition": {"geometry": {"type": "icosphere", "level": 2}, "exterior": "water", "interior": "bone",
                  "frequency": 500.0},
    "solve": {"geometry": {"type": "icosphere", "level": 2}, "exterior": "water", "interior": "bone",
              "frequency": 500.0},
    "sweep-density": {"geometry": {"type": "icosphere", "level": 3}, "exterior": "water",
                      "sweep": {"mode": "constant-c"}},
    "sweep-frequency": {"geometry": {"type": "cube", "edge": 1.0}, "exterior": "water", "interior": "fat",
                        "frequencies": {"start": 200.0, "stop": 1200.0, "num": 6}},
    "multi": {"geometry": {"type": "spheres", "materials": "fff", "level": 2, "spacing": 3.0},
              "exterior": "water", "frequency": 716.2},
    "field": {"geometry": {"type": "icosphere", "level": 2}, "exterior": "water", "interior": "bone",
              "frequency": 500.0, "formulations": ["HighContrastNeumann"],
              "field": {"axis": "z", "offset": 0.0, "extent": 4.0, "resolution": 41, "oracle": False}},
}

COMMON_KEYS = {"mode", "geometry", "exterior", "interior", "frequency", "frequencies", "formulations",
               "sweep", "field", "tol", "max_iter", "amplitude", "direction", "operator_product",
               "elements_per_wavelength", "condition", "dense_cap"}

SWEEP_RANGES = {"constant-c": (1e-4, 1e4, 17), "constant-beta": (1e-3, 1e3, 13)}
# water exterior: k+ = k- = 5.24 at constant c; k+ = 0.166, k- up to 5.24 at constant beta
SWEEP_FREQUENCY = {"constant-c": 1250.0, "constant-beta": 39.5}

LARGE_MULTI = {"materials": "fffbfff", "level": 4, "frequency": 2353.0}


class ConfigError(ValueError):
    pass


class ResourceGuardError(RuntimeError):
    pass


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------- config

def parse_material(spec) -> Material:
    if isinstance(spec, Material):
        return spec
    if isinstance(spec, str):
        try:
            return builtin_material(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from None
    try:
        if isinstance(spec, dict):
            return Material(float(spec["rho"]), float(spec["c"]), spec.get("name", "custom"))
        rho, c = spec
        return Material(float(rho), float(c))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad material specification {spec!r}: {exc}") from None


def parse_material_string(s: str):
    """``"fffbfff"`` -> list of materials over the alphabet f (fat), b (bone), i (iron)."""
    if not s:
        raise ConfigError("empty material string")
    bad = sorted(set(s) - set(MATERIAL_LETTERS))
    if bad:
        raise ConfigError(f"unknown material letter(s) {bad} in {s!r}; use f, b, i")
    return [builtin_material(MATERIAL_LETTERS[ch]) for ch in s]


def frequency_list(spec):
    if isinstance(spec, (int, float)):
        spec = [spec]
    if isinstance(spec, dict):
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec["num"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("frequency range needs start, stop, num") from None
        if num < 1:
            raise ConfigError("frequency range needs num >= 1")
        spec = list(np.linspace(start, stop, num))
    out = [float(f) for f in spec]
    if not out or any(f <= 0 or not math.isfinite(f) for f in out):
        raise ConfigError("frequencies must be positive")
    return out


def resolve_config(mode, file_config=None, overrides=None):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    cfg = copy.deepcopy(DEFAULTS[mode])
    for src in (file_config or {}, overrides or {}):
        unknown = set(src) - COMMON_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        for key, value in src.items():
            if isinstance(value, dict) and isinstance(cfg.get(key), dict):
                cfg[key] = {**cfg[key], **value}
            else:
                cfg[key] = value
    cfg["mode"] = mode
    if "formulations" not in cfg:
        cfg["formulations"] = [k.value for k in ALL_KINDS]
    if isinstance(cfg["formulations"], str):
        cfg["formulations"] = [s for s in cfg["formulations"].split(",") if s]
    if not cfg["formulations"] and not cfg.get("operator_product"):
        raise ConfigError("formulation list is empty")
    try:
        cfg["formulations"] = [FormulationKind.parse(k).value for k in cfg["formulations"]]
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    for key in ("exterior", "interior"):
        if key in cfg:
            parse_material(cfg[key])
    if "frequency" in cfg:
        frequency_list(cfg["frequency"])
    return cfg


def config_hash(cfg) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True, default=str).encode()).hexdigest()[:12]


# ---------------------------------------------------------------- geometry

def make_geometry(geom, k_max=None, elements_per_wavelength=6.0):
    """Return ``(meshes, interior material strings or None)``."""
    kind = geom.get("type", "icosphere")
    try:
        if kind == "icosphere":
            return [make_icosphere(float(geom.get("radius", 1.0)), int(geom.get("level", 2)))], None
        if kind == "cube":
            edge = float(geom.get("edge", 1.0))
            if "h" in geom:
                return [make_cube(edge, float(geom["h"]))], None
            if k_max is None:
                raise ConfigError("cube geometry needs 'h' or a frequency for automatic sizing")
            n = cube_divisions_for(k_max, edge, elements_per_wavelength)
            return [make_cube(edge, edge / n)], None
        if kind == "msh":
            return [import_msh(geom["path"])], None
        if kind == "spheres":
            letters = geom.get("materials", "fff")
            mats = parse_material_string(letters)
            level = int(geom.get("level", 2))
            spacing = float(geom.get("spacing", 3.0))
            radius = float(geom.get("radius", 1.0))
            meshes = [make_icosphere(radius, level, center=(spacing * j, 0.0, 0.0)) for j in range(len(mats))]
            return meshes, mats
    except (MeshError, OSError, KeyError) as exc:
        raise ConfigError(f"cannot build geometry {geom!r}: {exc}") from None
    raise ConfigError(f"unknown geometry type {kind!r}")


def guard_memory(meshes, budget_gb):
    n = sum(m.n_vertices for m in meshes)
    need = memory_estimate(n, 1)
    if need > budget_gb * 1e9:
        raise ResourceGuardError(
            f"dense working set {need / 1e9:.2f} GB exceeds budget {budget_gb:g} GB "
            f"({n} vertices over {len(meshes)} objects)")
    return need


# ---------------------------------------------------------------- output

class Output:
    def __init__(self, out_dir, cfg, plot=True):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.plot = plot
        self.timings = []
        self.written = []

    def header(self, **meta):
        lines = [f"transbem v{__version__}", f"config_hash={self.hash}", f"convention={CONVENTION}"]
        for key in sorted(meta):
            lines.append(f"{key}={_fmt_meta(meta[key])}")
        return lines

    def csv(self, name, columns, rows, **meta):
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            for line in self.header(**meta):
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt_cell(v) for v in row])
        self.written.append(path)
        return path

    def json(self, name, payload, **meta):
        path = self.dir / name
        doc = {"meta": dict(zip(("version", "config_hash", "convention"),
                                (f"v{__version__}", self.hash, CONVENTION)), **_jsonable(meta)),
               **_jsonable(payload)}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        self.written.append(path)
        return path

    def figure(self, func, name, *args, **kwargs):
        if not self.plot:
            return None
        from . import plotting

        path = self.dir / name
        getattr(plotting, func)(*args, path=path, **kwargs)
        self.written.append(path)
        return path

    def time(self, label, seconds):
        self.timings.append((label, seconds))

    def finish(self):
        with open(self.dir / "config.json", "w") as fh:
            json.dump(self.cfg, fh, indent=1, sort_keys=True, default=str)
            fh.write("\n")
        with open(self.dir / "timings.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "seconds"])
            for label, sec in self.timings:
                w.writerow([label, f"{sec:.3f}"])


def _fmt_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _fmt_meta(v):
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt_meta(x) for x in v)
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# ---------------------------------------------------------------- runners

class Context:
    def __init__(self, cfg, out, budget_gb):
        self.cfg = cfg
        self.out = out
        self.budget_gb = budget_gb
        self.exterior = parse_material(cfg["exterior"])
        self.kinds = [FormulationKind.parse(k) for k in cfg["formulations"]]
        self.tol = float(cfg.get("tol", 1e-7))
        self.max_iter = cfg.get("max_iter")
        self.amplitude = complex(cfg.get("amplitude", 1.0))
        self.direction = tuple(cfg.get("direction", PlaneWave.__dataclass_fields__["direction"].default))
        self.epw = float(cfg.get("elements_per_wavelength", 6.0))

    def wave(self, f):
        return PlaneWave(self.exterior.wavenumber(f), self.direction, self.amplitude)

    def single(self, f, interior=None, k_max=None):
        interior = interior or parse_material(self.cfg.get("interior", "bone"))
        meshes, _ = make_geometry(self.cfg["geometry"], k_max, self.epw)
        guard_memory(meshes, self.budget_gb)
        return meshes, [interior] * len(meshes)

    def meta(self, f, meshes, interiors):
        return {
            "dofs": [m.n_vertices for m in meshes],
            "frequency": f,
            "k_exterior": self.exterior.wavenumber(f),
            "k_interior": [m.wavenumber(f) for m in interiors],
            "density_ratio": [m.rho / self.exterior.rho for m in interiors],
        }


def _solve_checked(system, ctx):
    report, traces = solve(system, tol=ctx.tol, max_iter=ctx.max_iter)
    if not np.all(np.diff(report.history) <= 1e-12 * max(report.history)):
        raise NumericalFailure("GMRES residual history increased")
    return report, traces


def run_spectrum(ctx: Context):
    cfg, out = ctx.cfg, ctx.out
    cap = int(cfg.get("dense_cap", 6000))
    op = cfg.get("operator_product")
    if op:
        meshes, _ = make_geometry(cfg["geometry"])
        guard_memory(meshes, ctx.budget_gb)
        space = P1Space(meshes[0])
        asm = Assembler()
        k1 = float(op["k1"])
        V = asm.operator("V", k1, space, space).entries
        for k2 in op.get("k2", [k1]):
            t0 = time.perf_counter()
            D = asm.operator("D", float(k2), space, space).entries
            A = space.mass_solver.solve(V) @ space.mass_solver.solve(D)
            eigs = sorted_spectrum(eigenvalues(A))
            pred = accumulation_points(OPERATOR_PRODUCT_VD, 1.0, 1.0)
            met = cluster_metrics(eigs, pred)
            tag = f"VD_k1={k1:g}_k2={float(k2):g}"
            meta = {"dofs": space.n, "k1": k1, "k2": float(k2)}
            out.csv(f"spectrum_{tag}.csv", ["re", "im"], [(z.real, z.imag) for z in eigs], **meta)
            out.json(f"spectrum_{tag}.json", {"prediction": list(pred.points), "metrics": _metrics(met)}, **meta)
            out.figure("plot_spectrum", f"spectrum_{tag}.png", eigs, predictions=pred.points, title=tag)
            out.time(tag, time.perf_counter() - t0)
    f = frequency_list(cfg["frequency"])[0]
    if not cfg["formulations"]:
        return
    meshes, interiors = ctx.single(f)
    asm = Assembler()
    meta = ctx.meta(f, meshes, interiors)
    for kind in ctx.kinds:
        t0 = time.perf_counter()
        system = build_multiple(kind, ctx.exterior, interiors, meshes, f, ctx.wave(f), asm)
        try:
            rep = spectral_report(system, cap=cap)
        except DimensionCapError as exc:
            raise ResourceGuardError(str(exc)) from None
        out.csv(f"spectrum_{kind.value}.csv", ["re", "im"], [(z.real, z.imag) for z in rep.eigenvalues], **meta)
        payload = {
            "kind": kind.value,
            "condition_number": rep.condition,
            "prediction": list(rep.prediction.points) if rep.prediction else None,
            "metrics": _metrics(rep.metrics) if rep.metrics else None,
        }
        out.json(f"spectrum_{kind.value}.json", payload, **meta)
        out.figure("plot_spectrum", f"spectrum_{kind.value}.png", rep.eigenvalues,
                   predictions=rep.prediction.points if rep.prediction else (), title=kind.value)
        out.time(f"spectrum {kind.value}", time.perf_counter() - t0)


def _metrics(m):
    return {"radii": list(m.radii), "fractions": list(m.fractions),
            "median_distance": m.median_distance, "min_modulus": m.min_modulus}


def run_condition(ctx: Context):
    f = frequency_list(ctx.cfg["frequency"])[0]
    meshes, interiors = ctx.single(f)
    asm = Assembler()
    rows = []
    for kind in ctx.kinds:
        t0 = time.perf_counter()
        system = build_multiple(kind, ctx.exterior, interiors, meshes, f, ctx.wave(f), asm)
        rows.append((kind.value, system.dimension, condition_number(system.strong_dense())))
        ctx.out.time(f"condition {kind.value}", time.perf_counter() - t0)
    ctx.out.csv("condition.csv", ["formulation", "dimension", "kappa2"], rows, **ctx.meta(f, meshes, interiors))


def run_solve(ctx: Context):
    f = frequency_list(ctx.cfg["frequency"])[0]
    meshes, interiors = ctx.single(f)
    _solve_and_report(ctx, f, meshes, interiors, "solve")


def _solve_and_report(ctx, f, meshes, interiors, stem):
    asm = Assembler()
    meta = ctx.meta(f, meshes, interiors)
    oracle = _oracle_traces(ctx, f, meshes, interiors)
    rows, failures, solved = [], [], {}
    for kind in ctx.kinds:
        t0 = time.perf_counter()
        system = build_multiple(kind, ctx.exterior, interiors, meshes, f, ctx.wave(f), asm)
        report, traces = _solve_checked(system, ctx)
        ctx.out.time(f"{stem} {kind.value}", time.perf_counter() - t0)
        solved[kind] = (system, traces, report.history)
        err = ""
        if oracle is not None:
            num = traces.objects[0].dirichlet
            err = float(np.linalg.norm(num - oracle) / max(np.linalg.norm(oracle), 1e-300))
        rows.append((kind.value, system.dimension, report.iterations, report.residual, report.converged,
                     system.matvecs_per_apply(), system.operator_count(), err))
        ctx.out.csv(f"{stem}_history_{kind.value}.csv", ["iteration", "relative_residual"],
                    list(enumerate(report.history)), **meta)
        trace_rows = []
        for m, obj in enumerate(traces.objects):
            for v in range(meshes[m].n_vertices):
                x = meshes[m].vertices[v]
                trace_rows.append((m, v, x[0], x[1], x[2], obj.dirichlet[v].real, obj.dirichlet[v].imag,
                                   obj.neumann[v].real, obj.neumann[v].imag))
        ctx.out.csv(f"{stem}_traces_{kind.value}.csv",
                    ["object", "vertex", "x", "y", "z", "dirichlet_re", "dirichlet_im", "neumann_re", "neumann_im"],
                    trace_rows, **meta)
        if not report.converged:
            failures.append(kind.value)
    ctx.out.figure("plot_curves", f"{stem}_convergence.png", None,
                   {k.value: solved[k][2] for k in solved}, xlabel="iteration",
                   ylabel="relative residual", logy=True)
    ctx.out.csv(f"{stem}.csv", ["formulation", "dimension", "iterations", "relative_residual", "converged",
                                "matvecs_per_apply", "operators", "oracle_rel_l2"], rows, **meta)
    if failures:
        raise NumericalFailure(f"GMRES did not converge for {failures}")
    return solved


def _is_origin_sphere(geom):
    return geom.get("type", "icosphere") == "icosphere"


def _oracle_traces(ctx, f, meshes, interiors):
    if len(meshes) != 1 or not _is_origin_sphere(ctx.cfg["geometry"]):
        return None
    from .materials import MediumPair

    radius = float(ctx.cfg["geometry"].get("radius", 1.0))
    try:
        return sphere_series_oracle(MediumPair(ctx.exterior, interiors[0], f), radius, ctx.wave(f),
                                    meshes[0].vertices)
    except SeriesConvergenceError:
        return None


def run_density_sweep(ctx: Context):
    cfg = ctx.cfg
    sweep = cfg.get("sweep", {})
    mode = sweep.get("mode", "constant-c")
    if mode not in SWEEP_RANGES:
        raise ConfigError(f"sweep mode must be one of {sorted(SWEEP_RANGES)}")
    lo, hi, num = SWEEP_RANGES[mode]
    lo = float(sweep.get("ratio_min", lo))
    hi = float(sweep.get("ratio_max", hi))
    num = int(sweep.get("points", num))
    if lo <= 0 or hi <= 0 or num < 1 or hi < lo:
        raise ConfigError("density sweep needs 0 < ratio_min <= ratio_max and points >= 1")
    ratios = np.logspace(math.log10(lo), math.log10(hi), num)
    f = frequency_list(cfg.get("frequency", SWEEP_FREQUENCY[mode]))[0]
    meshes, _ = make_geometry(cfg["geometry"])
    guard_memory(meshes, ctx.budget_gb)
    asm = Assembler()
    rows = []
    series = {k.value: [] for k in ctx.kinds}
    ext = ctx.exterior
    for r in ratios:
        interior = ext.with_density(ext.rho * r, constant_compressibility=(mode == "constant-beta"))
        k_int = interior.wavenumber(f)
        for kind in ctx.kinds:
            t0 = time.perf_counter()
            system = build_multiple(kind, ext, [interior] * len(meshes), meshes, f, ctx.wave(f), asm)
            kappa = condition_number(system.strong_dense())
            ctx.out.time(f"ratio {r:.3g} {kind.value}", time.perf_counter() - t0)
            rows.append((float(r), kind.value, ext.wavenumber(f), k_int, kappa))
            series[kind.value].append(kappa)
        if mode == "constant-beta":
            # interior wavenumbers change with the ratio; drop them from the cache
            asm.clear()
    meta = {"dofs": [m.n_vertices for m in meshes], "frequency": f, "k_exterior": ext.wavenumber(f),
            "k_interior_range": [rows[0][3], rows[-1][3]], "sweep_mode": mode,
            "density_ratio": [float(ratios[0]), float(ratios[-1])]}
    ctx.out.csv("sweep_density.csv", ["density_ratio", "formulation", "k_exterior", "k_interior", "kappa2"],
                rows, **meta)
    ctx.out.figure("plot_curves", "sweep_density.png", ratios, series, xlabel="rho-/rho+",
                   ylabel="condition number", logx=True, logy=True, title=mode)


def run_frequency_sweep(ctx: Context):
    cfg = ctx.cfg
    freqs = frequency_list(cfg.get("frequencies", cfg.get("frequency")))
    interior = parse_material(cfg.get("interior", "fat"))
    want_kappa = bool(cfg.get("condition", True))
    rows = []
    k_all = []
    kappa_series = {k.value: [] for k in ctx.kinds}
    iter_series = {k.value: [] for k in ctx.kinds}
    failures = []
    last_meshes = None
    for f in freqs:
        k_ext, k_int = ctx.exterior.wavenumber(f), interior.wavenumber(f)
        meshes, interiors = ctx.single(f, interior, k_max=max(k_ext, k_int))
        last_meshes = meshes
        asm = Assembler()
        k_all.append(k_ext)
        for kind in ctx.kinds:
            t0 = time.perf_counter()
            system = build_multiple(kind, ctx.exterior, interiors, meshes, f, ctx.wave(f), asm)
            kappa = condition_number(system.strong_dense()) if want_kappa else float("nan")
            report, _ = _solve_checked(system, ctx)
            if not report.converged:
                failures.append((f, kind.value))
            ctx.out.time(f"f={f:g} {kind.value}", time.perf_counter() - t0)
            rows.append((f, kind.value, k_ext, k_int, meshes[0].n_vertices, kappa, report.iterations,
                         report.converged))
            kappa_series[kind.value].append(kappa)
            iter_series[kind.value].append(report.iterations)
    meta = {"exterior": ctx.exterior.name, "interior": interior.name,
            "density_ratio": interior.rho / ctx.exterior.rho,
            "wavenumber_ratio": ctx.exterior.c / interior.c,
            "elements_per_wavelength": ctx.epw, "mesh_sizing": "max(k+, k-)",
            "dofs": last_meshes[0].n_vertices if last_meshes else 0}
    ctx.out.csv("sweep_frequency.csv", ["frequency", "formulation", "k_exterior", "k_interior", "vertices",
                                        "kappa2", "iterations", "converged"], rows, **meta)
    edge = float(cfg["geometry"].get("edge", 1.0))
    markers = cube_resonances(max(k_all) * edge, 1.0) if max(k_all) * edge >= math.pi * math.sqrt(3) else []
    ctx.out.csv("cube_resonances.csv", ["k_edge"], [(k,) for k in markers], **meta)
    if want_kappa:
        ctx.out.figure("plot_curves", "sweep_frequency_kappa.png", k_all, kappa_series, xlabel="k+",
                       ylabel="condition number", logy=True, markers=sorted(set(markers)))
    ctx.out.figure("plot_curves", "sweep_frequency_iterations.png", k_all, iter_series, xlabel="k+",
                   ylabel="GMRES iterations", markers=sorted(set(markers)))
    if failures:
        raise NumericalFailure(f"GMRES did not converge for {failures}")


def run_multiple_scattering(ctx: Context, large=False):
    cfg = ctx.cfg
    geom = dict(cfg["geometry"])
    geom["type"] = "spheres"
    f = frequency_list(cfg.get("frequency", 716.2))[0]
    if large:
        geom.update(level=LARGE_MULTI["level"], materials=geom.get("materials_large", LARGE_MULTI["materials"]))
        f = LARGE_MULTI["frequency"]
    meshes, interiors = make_geometry(geom)
    guard_memory(meshes, ctx.budget_gb)
    ctx.out.json("layout.json", {"materials": geom.get("materials"), "centers": [m.vertices.mean(axis=0)
                                                                              for m in meshes],
                                 "diagonal_block_pairs": len(meshes),
                                 "off_diagonal_block_pairs": len(meshes) * (len(meshes) - 1)})
    _solve_and_report(ctx, f, meshes, interiors, "multi")


def run_field(ctx: Context):
    cfg = ctx.cfg
    f = frequency_list(cfg["frequency"])[0]
    fc = cfg.get("field", {})
    meshes, interiors = ctx.single(f)
    points, (u, v), shape = plane_grid(fc)
    solved = _solve_and_report(ctx, f, meshes, interiors, "field_solve")
    meta = ctx.meta(f, meshes, interiors)
    oracle = None
    if fc.get("oracle") and len(meshes) == 1 and _is_origin_sphere(cfg["geometry"]):
        from .materials import MediumPair

        oracle = sphere_series_oracle(MediumPair(ctx.exterior, interiors[0], f),
                                      float(cfg["geometry"].get("radius", 1.0)), ctx.wave(f), points)
    for kind, (system, traces, _) in solved.items():
        grid = evaluate_field(traces, meshes, ctx.exterior, interiors, f, ctx.wave(f), points,
                              on_surface="exclude")
        if np.all(grid.tags == EXCLUDED):
            raise ConfigError("every field point lies within the near-surface exclusion zone")
        cols = ["x", "y", "z", "re", "im", "abs", "tag"]
        rows = []
        for i, p in enumerate(points):
            val = grid.values[i]
            rec = [p[0], p[1], p[2], val.real, val.imag, abs(val), grid.tags[i]]
            if grid.tags[i] == EXCLUDED:
                rec[3:6] = ["", "", ""]
            if oracle is not None:
                rec += [oracle[i].real, oracle[i].imag]
            rows.append(rec)
        if oracle is not None:
            cols += ["oracle_re", "oracle_im"]
        ctx.out.csv(f"field_{kind.value}.csv", cols, rows, **meta)
        surf = []
        for m, obj in enumerate(traces.objects):
            for vi in range(meshes[m].n_vertices):
                x = meshes[m].vertices[vi]
                surf.append((m, vi, x[0], x[1], x[2], abs(obj.dirichlet[vi])))
        ctx.out.csv(f"surface_{kind.value}.csv", ["object", "vertex", "x", "y", "z", "abs"], surf, **meta)
        ctx.out.figure("plot_field_plane", f"field_{kind.value}.png", u, v, grid.values.reshape(shape),
                       title=kind.value)


def plane_grid(fc):
    axis = fc.get("axis", "z")
    if axis not in ("x", "y", "z"):
        raise ConfigError("field axis must be x, y or z")
    extent = float(fc.get("extent", 4.0))
    res = int(fc.get("resolution", 41))
    if extent <= 0 or res < 1:
        raise ConfigError("field plane needs extent > 0 and resolution >= 1")
    c = np.asarray(fc.get("center", (0.0, 0.0, 0.0)), float)
    s = np.linspace(-extent / 2, extent / 2, res)
    U, V = np.meshgrid(s, s, indexing="xy")
    a = "xyz".index(axis)
    ua, va = [i for i in range(3) if i != a]
    pts = np.zeros((res * res, 3))
    pts[:, a] = c[a] + float(fc.get("offset", 0.0))
    pts[:, ua] = c[ua] + U.ravel()
    pts[:, va] = c[va] + V.ravel()
    return pts, (U, V), (res, res)


RUNNERS = {
    "spectrum": run_spectrum,
    "condition": run_condition,
    "solve": run_solve,
    "sweep-density": run_density_sweep,
    "sweep-frequency": run_frequency_sweep,
    "field": run_field,
}


# ---------------------------------------------------------------- entry point

def build_parser():
    p = argparse.ArgumentParser(prog="transbem", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"transbem {__version__}")
    sub = p.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", type=Path, help="JSON configuration file")
        sp.add_argument("--formulation", action="append",
                        help="formulation name (repeatable or comma separated)")
        sp.add_argument("--freq", type=float, help="frequency in Hz")
        sp.add_argument("--mesh-level", type=int, help="icosphere subdivision level")
        sp.add_argument("--out", type=Path, default=Path("transbem-out"), help="output directory")
        sp.add_argument("--budget-gb", type=float, default=16.0, help="dense memory budget")
        sp.add_argument("--threads", type=int, help="worker threads for compiled kernels")
        sp.add_argument("--no-plot", action="store_true", help="skip PNG figures")
        sp.add_argument("-v", "--verbose", action="store_true")
        if mode == "multi":
            sp.add_argument("--materials", help="interior materials over {f,b,i}, e.g. fffbfff")
            sp.add_argument("--large", action="store_true",
                            help="seven-sphere fffbfff layout at 2353 Hz (heavy)")
        if mode == "sweep-density":
            sp.add_argument("--sweep-mode", choices=sorted(SWEEP_RANGES))
    return p


def _overrides(args):
    ov = {}
    if args.formulation:
        ov["formulations"] = [s for item in args.formulation for s in item.split(",") if s]
    if args.freq is not None:
        ov["frequency"] = args.freq
    if args.mesh_level is not None:
        ov["geometry"] = {"level": args.mesh_level}
    if getattr(args, "materials", None):
        ov.setdefault("geometry", {})["materials"] = args.materials
    if getattr(args, "sweep_mode", None):
        ov["sweep"] = {"mode": args.sweep_mode}
    return ov


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        file_cfg = {}
        if args.config is not None:
            try:
                file_cfg = json.loads(args.config.read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from None
            file_cfg.pop("mode", None)
        cfg = resolve_config(args.mode, file_cfg, _overrides(args))
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            import numba

            numba.set_num_threads(min(args.threads, numba.config.NUMBA_NUM_THREADS))
        out = Output(args.out, cfg, plot=not args.no_plot)
        ctx = Context(cfg, out, args.budget_gb)
        t0 = time.perf_counter()
        if args.mode == "multi":
            run_multiple_scattering(ctx, large=args.large)
        else:
            RUNNERS[args.mode](ctx)
        out.time("total", time.perf_counter() - t0)
        out.finish()
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceGuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericalFailure, np.linalg.LinAlgError, SeriesConvergenceError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK
