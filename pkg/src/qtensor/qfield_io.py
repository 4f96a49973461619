"""QFIELD text dumps and CSV conversion.

Format: a header line

    QFIELD v1 dim=<2|3> nx=<..> [ny nz] h=<..> dofs=<2|3|5> [unit=1]

followed by one line per node in row-major order:

    i j [k] mask c1 .. c_dofs

with mask 0 exterior, 1 interior, 2 boundary, and coefficients printed
with 17 significant digits (lossless for doubles).  `unit=1` marks
director dumps (dofs = dim).  Grids are centered at the origin, so the
node at index i sits at -(n-1)h/2 + i h along each axis; this convention
makes the header sufficient to reconstruct the geometry.

The CSV flattening is `i,j[,k],mask,c1..c_dofs,s,beta2` with the original
header carried in a leading `# QFIELD ...` comment so the conversion is
reversible.  For tensor dumps s is the uniaxial amplitude (leading
eigenvalue scale in 3D) and beta2 the biaxiality parameter (0 in 2D).
"""

from __future__ import annotations

import numpy as np

from . import tensor
from .fields import DirectorField, Field
from .grid import Grid

_FMT = "%.17g"


def _header(grid: Grid, dofs, unit=False):
    parts = [f"QFIELD v1 dim={grid.dim}", f"nx={grid.shape[0]}", f"ny={grid.shape[1]}"]
    if grid.dim == 3:
        parts.append(f"nz={grid.shape[2]}")
    parts.append("h=" + (_FMT % grid.h))
    parts.append(f"dofs={dofs}")
    if unit:
        parts.append("unit=1")
    return " ".join(parts)


def dump_field(path, field: Field):
    _dump(path, field.grid, field.values, unit=False)


def dump_director(path, director: DirectorField):
    _dump(path, director.grid, director.values, unit=True)


def _dump(path, grid: Grid, values, unit):
    dofs = values.shape[-1]
    with open(path, "w") as fh:
        fh.write(_header(grid, dofs, unit) + "\n")
        idx = np.indices(grid.shape).reshape(grid.dim, -1).T
        flat_mask = grid.mask.reshape(-1)
        flat_vals = values.reshape(-1, dofs)
        for row, m, cs in zip(idx, flat_mask, flat_vals):
            cols = [str(int(v)) for v in row] + [str(int(m))]
            cols += [_FMT % c for c in cs]
            fh.write(" ".join(cols) + "\n")


def parse_header(line):
    toks = line.split()
    if len(toks) < 2 or toks[0] != "QFIELD" or toks[1] != "v1":
        raise ValueError("not a QFIELD v1 dump")
    kv = dict(tok.split("=", 1) for tok in toks[2:])
    dim = int(kv["dim"])
    shape = tuple(int(kv[k]) for k in ("nx", "ny", "nz")[:dim])
    return {
        "dim": dim,
        "shape": shape,
        "h": float(kv["h"]),
        "dofs": int(kv["dofs"]),
        "unit": kv.get("unit") == "1",
    }


def _grid_from_header(hdr, mask):
    dim, shape, h = hdr["dim"], hdr["shape"], hdr["h"]
    origin = tuple(-(n - 1) * h / 2.0 for n in shape)
    return Grid(dim, shape, h, mask, origin)


def load_qfield(path):
    """Load a dump; returns (grid, values, header dict)."""
    with open(path) as fh:
        hdr = parse_header(fh.readline())
        data = np.loadtxt(fh, ndmin=2)
    return _assemble(hdr, data)


def _assemble(hdr, data):
    dim, shape, dofs = hdr["dim"], hdr["shape"], hdr["dofs"]
    expected = int(np.prod(shape))
    if data.shape[0] != expected or data.shape[1] < dim + 1 + dofs:
        raise ValueError("dump body does not match its header")
    idx = data[:, :dim].astype(int)
    order = np.ravel_multi_index(idx.T, shape)
    if len(np.unique(order)) != expected:
        raise ValueError("dump body has missing or duplicate nodes")
    mask = np.zeros(shape, dtype=np.uint8)
    mask.reshape(-1)[order] = data[:, dim].astype(np.uint8)
    values = np.zeros(shape + (dofs,))
    values.reshape(-1, dofs)[order] = data[:, dim + 1 : dim + 1 + dofs]
    grid = _grid_from_header(hdr, mask)
    return grid, values, hdr


def as_field(grid, values, hdr):
    if hdr["unit"]:
        return DirectorField(grid, values, check=False)
    return Field(grid, values)


def export_csv(path_in, path_out):
    """Flatten a tensor dump to CSV with derived amplitude and biaxiality."""
    grid, values, hdr = load_qfield(path_in)
    if hdr["unit"]:
        raise ValueError("csv export is defined for tensor dumps")
    dofs = hdr["dofs"]
    flat = values.reshape(-1, dofs)
    flat_mask = grid.mask.reshape(-1)
    inside = flat_mask > 0
    t2 = np.sum(flat * flat, axis=-1)
    if dofs == 5:
        s = np.zeros(len(flat))
        beta = np.zeros(len(flat))
        if np.any(inside):
            d = tensor.decompose(flat[inside])
            s[inside] = d.s_l
            ok = inside & (t2 > 0.0)
            beta[ok] = tensor.biaxiality(flat[ok])
    else:
        s = np.sqrt(2.0 * t2)
        beta = np.zeros(len(flat))
    idx = np.indices(grid.shape).reshape(grid.dim, -1).T
    index_cols = ["i", "j", "k"][: grid.dim]
    with open(path_out, "w") as fh:
        fh.write("# " + _header(grid, dofs) + "\n")
        fh.write(",".join(index_cols + ["mask"] + [f"c{a+1}" for a in range(dofs)] + ["s", "beta2"]) + "\n")
        for row, m, cs, sv, bv in zip(idx, flat_mask, flat, s, beta):
            cols = [str(int(v)) for v in row] + [str(int(m))]
            cols += [_FMT % c for c in cs]
            cols += [_FMT % sv, _FMT % bv]
            fh.write(",".join(cols) + "\n")


def import_csv(path_in, path_out):
    """Rebuild a QFIELD dump from a CSV produced by export_csv."""
    with open(path_in) as fh:
        first = fh.readline()
        if not first.startswith("# QFIELD"):
            raise ValueError("csv lacks the QFIELD metadata comment")
        hdr = parse_header(first[2:].strip())
        fh.readline()  # column names
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    dim, dofs = hdr["dim"], hdr["dofs"]
    body = data[:, : dim + 1 + dofs]
    grid, values, _ = _assemble(hdr, body)
    _dump(path_out, grid, values, unit=hdr["unit"])


def write_csv(path, header_cols, rows):
    """Plain deterministic CSV writer for analysis tables."""
    with open(path, "w") as fh:
        fh.write(",".join(header_cols) + "\n")
        for row in rows:
            cols = []
            for v in row:
                if isinstance(v, str):
                    cols.append(v)
                elif v is None:
                    cols.append("")
                elif isinstance(v, (int, np.integer)):
                    cols.append(str(int(v)))
                else:
                    cols.append(_FMT % float(v))
            fh.write(",".join(cols) + "\n")
