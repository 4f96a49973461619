"""Experiment pipelines: run a config, compare run outputs, convert dumps.

A run directory contains the emitted copy of its config, one convergence
CSV and (optionally) one field dump per schedule entry, `defects.csv`,
`asymptotics.csv` and `summary.txt` (key=value scalars only).  All CSV
content is deterministic: fixed reduction orders, no timestamps.
"""

from __future__ import annotations

import os

import numpy as np

from . import qfield_io
from .asympt import RegionSpec, asymptotics_report
from .config import ConfigError, ExperimentConfig, emit_config, parse_config
from .defects import locate_defects
from .fields import DirectorField, Field, boundary_director, uniaxial_fields
from .grid import build_domain
from .harmonic import canonical_harmonic_2d, minimize_dirichlet, singular_set
from .minimize import (
    ContinuationError,
    MinimizeOptions,
    continuation,
    initial_director,
)
from .tensor import MaterialParams

EXIT_OK = 0
EXIT_TOL = 1
EXIT_USAGE = 2
EXIT_SOLVER = 3

_FMT = "%.12g"

DEFECT_COLUMNS_2D = [
    "run_id", "L", "x", "y", "q_winding", "director_winding",
    "core_radius", "fitted_n", "fitted_alpha", "fit_residual",
]
DEFECT_COLUMNS_3D = [
    "run_id", "L", "x", "y", "z", "q_winding", "director_winding",
    "core_radius", "fitted_n", "fitted_alpha", "fit_residual",
]
ASYMPT_COLUMNS = [
    "run_id", "L", "sup_psi", "prop4_sup_err", "prop4_mean_err",
    "sup_grad_s", "gradn_err", "max_beta2", "lambda1_gap",
    "max_principle_excess", "r2_supE",
]

STRUCTURAL_KEYS = ("dim", "nx", "h", "shape", "mode")


def _build_grid(cfg: ExperimentConfig):
    if cfg.shape in ("disk", "ball"):
        return build_domain(cfg.shape, cfg.resolution, radius=cfg.radius)
    return build_domain(cfg.shape, cfg.resolution, side=cfg.side)


def _build_boundary(cfg: ExperimentConfig, grid):
    if cfg.boundary_kind == "planar-degree":
        return boundary_director(grid, "planar-degree", degree=cfg.degree)
    if cfg.boundary_kind == "radial":
        return boundary_director(grid, "radial")
    gsrc, values, hdr = qfield_io.load_qfield(cfg.boundary_file)
    if not hdr["unit"] or gsrc.shape != grid.shape:
        raise ConfigError("tabulated boundary file must be a director dump on the run grid")
    return boundary_director(grid, "tabulated", table=values[grid.boundary_indices])


def _harmonic_reference(cfg, grid, bd, records, p):
    """Limiting director field used for the asymptotic comparisons."""
    if grid.dim == 3:
        n0 = DirectorField(
            grid,
            np.where(grid.inside[..., None], initial_director(grid, bd), 0.0),
            check=False,
        )
        return minimize_dirichlet(n0, bd, tol=2e-2, method="nonlinear-cg"), None
    if bd.degree == 0:
        n0 = DirectorField(
            grid,
            np.where(grid.inside[..., None], initial_director(grid, bd), 0.0),
            check=False,
        )
        return minimize_dirichlet(n0, bd, tol=1e-3, method="nonlinear-cg"), None
    # 2D, nonzero degree: the punctured canonical map built on the
    # final-L defect configuration
    recs = records[-1][1]
    degrees = [r.director_winding for r in recs]
    if any(d is None for d in degrees) or int(sum(degrees)) != bd.degree:
        return None, "defect windings do not account for the boundary degree"
    pts = [tuple(r.position) for r in recs]
    return canonical_harmonic_2d(grid, list(zip(pts, [int(d) for d in degrees])), bd), None


def run_config(cfg: ExperimentConfig, out_dir=None):
    """Execute a parsed config; returns (exit_code, artifact_dir)."""
    out = out_dir or cfg.out_dir
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(emit_config(cfg))

    grid = _build_grid(cfg)
    bd = _build_boundary(cfg, grid)
    p = MaterialParams(a2=cfg.a2, b2=cfg.b2, c2=cfg.c2, L=cfg.L_schedule[0])
    opts = MinimizeOptions(
        mode=cfg.mode,
        method=cfg.method,
        dt=cfg.dt,
        grad_tol=cfg.grad_tol,
        max_iters=cfg.max_iters,
        record_cadence=cfg.record_cadence,
    )

    summary = {
        "run_id": cfg.run_id,
        "mode": cfg.mode,
        "shape": cfg.shape,
        "dim": grid.dim,
        "nx": grid.shape[0],
        "h": grid.h,
        "boundary_degree": bd.degree if bd.degree is not None else "unknown",
    }

    failed = False
    try:
        recs = continuation(grid, bd, p, cfg.L_schedule, opts)
    except ContinuationError as exc:
        recs = exc.records
        failed = True
        summary["solver_error"] = str(exc).replace("\n", " ")

    for rec in recs:
        tag = _fmt_L(rec.L)
        qfield_io.write_csv(
            os.path.join(out, f"convergence_L{tag}.csv"),
            ["iter", "energy", "elastic", "bulk_over_L", "grad_max"],
            [list(row) for row in rec.history],
        )
        if cfg.save_fields:
            qfield_io.dump_field(os.path.join(out, f"field_L{tag}.qfield"), rec.field)

    defect_rows = []
    records_with_defects = []
    for rec in recs:
        fit = None if cfg.fit_r_in is None else (cfg.fit_r_in, cfg.fit_r_out)
        d = locate_defects(rec.field, p.with_L(rec.L), frac=cfg.isotropic_frac, fit_annulus=fit) if cfg.defects else []
        records_with_defects.append((rec, d))
        for drec in d:
            defect_rows.append(drec.as_row(cfg.run_id, rec.L))
    if cfg.defects:
        cols = DEFECT_COLUMNS_3D if grid.dim == 3 else DEFECT_COLUMNS_2D
        qfield_io.write_csv(os.path.join(out, "defects.csv"), cols, defect_rows)

    if cfg.asymptotics and recs:
        n0, why_not = _harmonic_reference(cfg, grid, bd, records_with_defects, p)
        if n0 is None:
            summary["asymptotics_skipped"] = why_not
        else:
            if cfg.save_fields:
                qfield_io.dump_director(os.path.join(out, "harmonic_map.qfield"), n0)
            if grid.dim == 3:
                sclusters = singular_set(n0)
                for i, cl in enumerate(sclusters, start=1):
                    for ax, name in enumerate("xyz"[: grid.dim]):
                        summary[f"singular{i}_{name}"] = cl["centroid"][ax]
            rows = []
            for rec, drecs in records_with_defects:
                pL = p.with_L(rec.L)
                rep = _asymptotics_for(cfg, grid, rec, drecs, n0, pL)
                rows.append(rep.as_csv_row(cfg.run_id))
                _merge_report(summary, rep, rec)
            qfield_io.write_csv(os.path.join(out, "asymptotics.csv"), ASYMPT_COLUMNS, rows)

    for rec, drecs in records_with_defects:
        tag = _fmt_L(rec.L)
        summary[f"energy_L{tag}"] = rec.energy
        summary[f"elastic_L{tag}"] = rec.elastic
        summary[f"bulk_over_L_L{tag}"] = rec.bulk_over_L
        summary[f"grad_max_L{tag}"] = rec.grad_max
        summary[f"iters_L{tag}"] = rec.iterations
        summary[f"converged_L{tag}"] = int(rec.converged)
        summary[f"n_defects_L{tag}"] = len(drecs)
        for i, drec in enumerate(drecs, start=1):
            for ax, name in enumerate("xyz"[: grid.dim]):
                summary[f"defect{i}_{name}_L{tag}"] = drec.position[ax]
            summary[f"defect{i}_core_radius_L{tag}"] = drec.core_radius
    if records_with_defects:
        rec, drecs = records_with_defects[-1]
        summary["L_final"] = rec.L
        summary["energy"] = rec.energy
        summary["grad_max"] = rec.grad_max
        summary["n_defects"] = len(drecs)

    _write_summary(os.path.join(out, "summary.txt"), summary)
    return (EXIT_SOLVER if failed else EXIT_OK), out


def _asymptotics_for(cfg, grid, rec, drecs, n0, pL):
    if rec.mode == "uniaxial":
        s, director, field = rec.s, rec.director, rec.field
    else:
        u = uniaxial_fields(rec.field)
        s, director, field = u.s, u.director, rec.field
    core = min((d.core_radius for d in drecs), default=None)
    spec = RegionSpec(delta=cfg.exclusion_delta, standoff=cfg.boundary_standoff)
    mask = spec.build_mask(grid, [d.position for d in drecs], core_radius=core)
    return asymptotics_report(field, s, director, n0, pL, mask)


def _merge_report(summary, rep, rec):
    tag = _fmt_L(rec.L)
    summary[f"sup_psi_L{tag}"] = rep.sup_psi
    summary[f"prop4_sup_err_L{tag}"] = rep.prop4_sup_err
    summary[f"prop4_mean_err_L{tag}"] = rep.prop4_mean_err
    summary[f"prop4_mean_rel_L{tag}"] = rep.prop4_mean_rel
    summary[f"sup_grad_s_L{tag}"] = rep.sup_grad_s
    summary[f"gradn_err_L{tag}"] = rep.gradn_err
    summary[f"max_beta2_L{tag}"] = rep.max_beta2
    summary[f"lambda1_gap_L{tag}"] = rep.lambda1_gap
    summary[f"max_principle_excess_L{tag}"] = rep.max_principle_excess
    summary[f"r2_supE_L{tag}"] = rep.r2_supE
    summary["sup_psi"] = rep.sup_psi
    summary["prop4_mean_rel"] = rep.prop4_mean_rel
    summary["max_beta2"] = rep.max_beta2
    summary["lambda1_gap"] = rep.lambda1_gap
    summary["max_principle_excess"] = rep.max_principle_excess


def _fmt_L(L):
    return "%g" % L


def _write_summary(path, summary):
    with open(path, "w") as fh:
        for key, value in summary.items():
            if isinstance(value, str):
                fh.write(f"{key}={value}\n")
            elif isinstance(value, (int, np.integer)):
                fh.write(f"{key}={int(value)}\n")
            elif np.isfinite(value):
                fh.write(f"{key}={_FMT % float(value)}\n")
            # quantities undefined for this run (e.g. 3D-only diagnostics
            # in a 2D run) are omitted rather than written as nan


def run(config_path, out_dir=None):
    """CLI entry: run a config file; exit 2 invalid config, 3 solver failure."""
    try:
        cfg = parse_config(config_path)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}")
        return EXIT_USAGE
    try:
        code, out = run_config(cfg, out_dir=out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}")
        return EXIT_USAGE
    print(f"artifacts written to {out}")
    return code


def _read_summary(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = line.split("=", 1)
            out[key] = value
    return out


def compare(dir_a, dir_b, tol=0.0):
    """Tabulate relative deltas between two run summaries.

    Exit 1 when any shared numeric key differs beyond `tol`; keys that
    depend on the grid are marked incomparable when the structural keys
    disagree.  Missing summaries exit 2.
    """
    pa = os.path.join(dir_a, "summary.txt")
    pb = os.path.join(dir_b, "summary.txt")
    if not (os.path.exists(pa) and os.path.exists(pb)):
        print("compare: both directories must contain summary.txt")
        return EXIT_USAGE, []
    sa, sb = _read_summary(pa), _read_summary(pb)
    shared = sorted(set(sa) & set(sb))
    structural_mismatch = any(
        key in sa and key in sb and sa[key] != sb[key] for key in STRUCTURAL_KEYS
    )
    lines = []
    worst = 0.0
    for key in shared:
        va, vb = sa[key], sb[key]
        try:
            fa, fb = float(va), float(vb)
        except ValueError:
            if va != vb:
                lines.append(f"{key}: {va} != {vb}")
                worst = np.inf
            continue
        if key in STRUCTURAL_KEYS:
            if fa != fb:
                lines.append(f"{key}: {va} != {vb} (structural)")
                worst = np.inf
            continue
        if structural_mismatch:
            lines.append(f"{key}: incomparable (structural mismatch)")
            continue
        if fa == fb or (np.isnan(fa) and np.isnan(fb)):
            continue
        denom = max(abs(fa), abs(fb), 1e-300)
        rel = abs(fa - fb) / denom
        worst = max(worst, rel)
        lines.append(f"{key}: {va} vs {vb} (rel {rel:.3e})")
    for line in lines:
        print(line)
    if not lines:
        return EXIT_OK, lines
    return (EXIT_TOL if worst > tol else EXIT_OK), lines


def export(dump_path, fmt, out_path=None):
    """Convert between qfield and csv dump forms (lossless round trips)."""
    try:
        if fmt == "csv":
            out = out_path or os.path.splitext(dump_path)[0] + ".csv"
            qfield_io.export_csv(dump_path, out)
        elif fmt == "qfield":
            with open(dump_path) as fh:
                first = fh.readline()
            out = out_path or os.path.splitext(dump_path)[0] + ".qfield"
            if first.startswith("# QFIELD"):
                qfield_io.import_csv(dump_path, out)
            elif first.startswith("QFIELD"):
                grid, values, hdr = qfield_io.load_qfield(dump_path)
                qfield_io._dump(out, grid, values, unit=hdr["unit"])
            else:
                raise ValueError("unrecognized dump format")
        else:
            print(f"export: unknown format {fmt!r}")
            return EXIT_USAGE
    except (ValueError, OSError) as exc:
        print(f"export error: {exc}")
        return EXIT_USAGE
    print(f"wrote {out}")
    return EXIT_OK
