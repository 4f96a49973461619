"""INI experiment configs: parse, validate, emit (round-trip stable)."""

from __future__ import annotations

import configparser
import os
import re
from dataclasses import dataclass


class ConfigError(ValueError):
    """Invalid configuration; message carries file and line when known."""


@dataclass
class ExperimentConfig:
    # domain
    shape: str = "disk"
    radius: float = 1.0
    side: float = 2.0
    resolution: int = 64
    # boundary
    boundary_kind: str = "planar-degree"
    degree: int = 1
    boundary_file: str = ""
    # material
    a2: float = 1.0
    b2: float = 1.0
    c2: float = 1.0
    # schedule
    L_schedule: tuple = (0.04, 0.02, 0.01)
    # minimize
    mode: str = "full"
    method: str = "nonlinear-cg"
    dt: float = 1e-4
    grad_tol: float = 1e-3
    max_iters: int = 200000
    record_cadence: int = 200
    # analysis
    defects: bool = True
    asymptotics: bool = True
    isotropic_frac: float = 0.3
    exclusion_delta: float | None = None  # None = auto: max(3h, 2*core_radius)
    boundary_standoff: int = 2
    fit_r_in: float | None = None  # None = auto: 3h
    fit_r_out: float = 0.3
    # output
    out_dir: str = "runs/out"
    run_id: str = "run"
    save_fields: bool = True


_SCHEMA = {
    "domain": {"shape": str, "radius": float, "side": float, "resolution": int},
    "boundary": {"kind": str, "degree": int, "file": str},
    "material": {"a2": float, "b2": float, "c2": float},
    "schedule": {"L": "floatlist"},
    "minimize": {
        "mode": str,
        "method": str,
        "dt": float,
        "grad_tol": float,
        "max_iters": int,
        "record_cadence": int,
    },
    "analysis": {
        "defects": bool,
        "asymptotics": bool,
        "isotropic_frac": float,
        "exclusion_delta": "optfloat",
        "boundary_standoff": int,
        "fit_r_in": "optfloat",
        "fit_r_out": float,
    },
    "output": {"dir": str, "run_id": str, "save_fields": bool},
}

_KEYMAP = {
    ("domain", "shape"): "shape",
    ("domain", "radius"): "radius",
    ("domain", "side"): "side",
    ("domain", "resolution"): "resolution",
    ("boundary", "kind"): "boundary_kind",
    ("boundary", "degree"): "degree",
    ("boundary", "file"): "boundary_file",
    ("material", "a2"): "a2",
    ("material", "b2"): "b2",
    ("material", "c2"): "c2",
    ("schedule", "L"): "L_schedule",
    ("minimize", "mode"): "mode",
    ("minimize", "method"): "method",
    ("minimize", "dt"): "dt",
    ("minimize", "grad_tol"): "grad_tol",
    ("minimize", "max_iters"): "max_iters",
    ("minimize", "record_cadence"): "record_cadence",
    ("analysis", "defects"): "defects",
    ("analysis", "asymptotics"): "asymptotics",
    ("analysis", "isotropic_frac"): "isotropic_frac",
    ("analysis", "exclusion_delta"): "exclusion_delta",
    ("analysis", "boundary_standoff"): "boundary_standoff",
    ("analysis", "fit_r_in"): "fit_r_in",
    ("analysis", "fit_r_out"): "fit_r_out",
    ("output", "dir"): "out_dir",
    ("output", "run_id"): "run_id",
    ("output", "save_fields"): "save_fields",
}


def _line_of(text, section, key):
    in_section = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[(.+)\]", stripped)
        if m:
            in_section = m.group(1).strip() == section
            continue
        if in_section and re.match(rf"{re.escape(key)}\s*[=:]", stripped):
            return lineno
    return None


def _convert(raw, kind, where):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind == "optfloat":
            low = raw.strip().lower()
            return None if low in ("auto", "none", "") else float(raw)
        if kind == "floatlist":
            vals = tuple(float(tok) for tok in re.split(r"[,\s]+", raw.strip()) if tok)
            if not vals:
                raise ValueError("empty list")
            return vals
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(path):
    """Parse and validate an experiment config file."""
    with open(path) as fh:
        text = fh.read()
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case sensitive (schedule L)
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    cfg = ExperimentConfig()
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                line = _line_of(text, section, key)
                raise ConfigError(f"{path}:{line}: unknown key {key!r} in [{section}]")
            where = f"{path}:{_line_of(text, section, key)}"
            value = _convert(raw, _SCHEMA[section][key], where)
            setattr(cfg, _KEYMAP[(section, key)], value)
    _validate(cfg, path, text)
    return cfg


def _fail(path, text, section, key, msg):
    line = _line_of(text, section, key)
    loc = f"{path}:{line}" if line else path
    raise ConfigError(f"{loc}: {msg}")


def _validate(cfg, path="<config>", text=""):
    if cfg.shape not in ("disk", "square", "ball", "box"):
        _fail(path, text, "domain", "shape", f"unknown shape {cfg.shape!r}")
    if cfg.resolution < 16:
        _fail(path, text, "domain", "resolution", "resolution must be at least 16")
    if cfg.shape in ("disk", "ball") and cfg.radius <= 0:
        _fail(path, text, "domain", "radius", "radius must be positive")
    if cfg.shape in ("square", "box") and cfg.side <= 0:
        _fail(path, text, "domain", "side", "side must be positive")
    if cfg.boundary_kind not in ("planar-degree", "radial", "tabulated"):
        _fail(path, text, "boundary", "kind", f"unknown boundary kind {cfg.boundary_kind!r}")
    dim = 2 if cfg.shape in ("disk", "square") else 3
    if cfg.boundary_kind == "planar-degree" and dim != 2:
        _fail(path, text, "boundary", "kind", "planar-degree data requires a 2D domain")
    if cfg.boundary_kind == "radial" and dim != 3:
        _fail(path, text, "boundary", "kind", "radial data requires a 3D domain")
    if cfg.boundary_kind == "tabulated":
        if not cfg.boundary_file:
            _fail(path, text, "boundary", "file", "tabulated data needs a file")
        if not os.path.exists(cfg.boundary_file):
            _fail(path, text, "boundary", "file", f"no such file: {cfg.boundary_file}")
    for key in ("a2", "b2", "c2"):
        if getattr(cfg, key) <= 0:
            _fail(path, text, "material", key, f"{key} must be positive")
    if any(l <= 0 for l in cfg.L_schedule):
        _fail(path, text, "schedule", "L", "all schedule values must be positive")
    if any(b >= a for a, b in zip(cfg.L_schedule, cfg.L_schedule[1:])):
        _fail(path, text, "schedule", "L", "schedule must be strictly decreasing")
    if cfg.mode not in ("full", "uniaxial"):
        _fail(path, text, "minimize", "mode", f"unknown mode {cfg.mode!r}")
    if cfg.method not in ("gradient-flow", "nonlinear-cg"):
        _fail(path, text, "minimize", "method", f"unknown method {cfg.method!r}")
    if cfg.dt <= 0:
        _fail(path, text, "minimize", "dt", "dt must be positive")
    if cfg.grad_tol <= 0:
        _fail(path, text, "minimize", "grad_tol", "grad_tol must be positive")
    if not 0.0 < cfg.isotropic_frac < 1.0:
        _fail(path, text, "analysis", "isotropic_frac", "isotropic_frac must be in (0, 1)")


def emit_config(cfg: ExperimentConfig):
    """Canonical text form; parse(emit(c)) round-trips to an equal config."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if v is None:
            return "auto"
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = []
    lines.append("[domain]")
    lines.append(f"shape = {cfg.shape}")
    if cfg.shape in ("disk", "ball"):
        lines.append(f"radius = {fmt(cfg.radius)}")
    else:
        lines.append(f"side = {fmt(cfg.side)}")
    lines.append(f"resolution = {cfg.resolution}")
    lines.append("")
    lines.append("[boundary]")
    lines.append(f"kind = {cfg.boundary_kind}")
    if cfg.boundary_kind == "planar-degree":
        lines.append(f"degree = {cfg.degree}")
    if cfg.boundary_kind == "tabulated":
        lines.append(f"file = {cfg.boundary_file}")
    lines.append("")
    lines.append("[material]")
    for key in ("a2", "b2", "c2"):
        lines.append(f"{key} = {fmt(getattr(cfg, key))}")
    lines.append("")
    lines.append("[schedule]")
    lines.append("L = " + ", ".join(repr(l) for l in cfg.L_schedule))
    lines.append("")
    lines.append("[minimize]")
    lines.append(f"mode = {cfg.mode}")
    lines.append(f"method = {cfg.method}")
    lines.append(f"dt = {fmt(cfg.dt)}")
    lines.append(f"grad_tol = {fmt(cfg.grad_tol)}")
    lines.append(f"max_iters = {cfg.max_iters}")
    lines.append(f"record_cadence = {cfg.record_cadence}")
    lines.append("")
    lines.append("[analysis]")
    lines.append(f"defects = {fmt(cfg.defects)}")
    lines.append(f"asymptotics = {fmt(cfg.asymptotics)}")
    lines.append(f"isotropic_frac = {fmt(cfg.isotropic_frac)}")
    lines.append(f"exclusion_delta = {fmt(cfg.exclusion_delta)}")
    lines.append(f"boundary_standoff = {cfg.boundary_standoff}")
    lines.append(f"fit_r_in = {fmt(cfg.fit_r_in)}")
    lines.append(f"fit_r_out = {fmt(cfg.fit_r_out)}")
    lines.append("")
    lines.append("[output]")
    lines.append(f"dir = {cfg.out_dir}")
    lines.append(f"run_id = {cfg.run_id}")
    lines.append(f"save_fields = {fmt(cfg.save_fields)}")
    return "\n".join(lines) + "\n"
