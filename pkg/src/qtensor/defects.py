"""Defect location and characterization: isotropic sets, windings, core fits."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import tensor
from .fields import Field, uniaxial_fields
from .grid import Grid

_SQRT2 = np.sqrt(2.0)


@dataclass
class IsotropicComponent:
    nodes: np.ndarray  # (k, dim) integer indices
    centroid: np.ndarray  # (dim,) position
    count: int
    bbox: tuple  # ((lo…), (hi…)) node-index bounds, inclusive
    touches_boundary: bool


@dataclass
class DefectRecord:
    position: np.ndarray
    q_winding: float | None
    director_winding: float | None
    core_radius: float
    fitted_n: float
    fitted_alpha: float
    fit_residual: float

    def as_row(self, run_id, L):
        pos = list(self.position)
        return [run_id, L, *pos, self.q_winding, self.director_winding,
                self.core_radius, self.fitted_n, self.fitted_alpha, self.fit_residual]


def isotropic_set(grid: Grid, s, frac, s_ref):
    """Connected components of {s < frac * s_ref} among inside nodes.

    Face connectivity; components are returned sorted by centroid so the
    output order is deterministic.
    """
    if not 0.0 < frac < 1.0:
        raise ValueError("frac must lie strictly between 0 and 1")
    from scipy import ndimage

    low = grid.inside & (s < frac * s_ref)
    if not np.any(low):
        return []
    structure = ndimage.generate_binary_structure(grid.dim, 1)
    labels, count = ndimage.label(low, structure=structure)
    comps = []
    pos = grid.positions
    for k in range(1, count + 1):
        sel = labels == k
        nodes = np.argwhere(sel)
        centroid = pos[sel].mean(axis=0)
        comps.append(
            IsotropicComponent(
                nodes=nodes,
                centroid=centroid,
                count=len(nodes),
                bbox=(tuple(nodes.min(axis=0)), tuple(nodes.max(axis=0))),
                touches_boundary=bool(np.any(grid.boundary[sel])),
            )
        )
    comps.sort(key=lambda c: tuple(c.centroid))
    return comps


def winding_number(grid: Grid, values, loop, kind="q"):
    """Accumulated angle of a planar field along a closed node loop, / 2 pi.

    kind 'q': winding of the tensor components (c1, c2).  kind 'director':
    winding of a planar director through line-field (angle-doubling)
    lifting, so half-integer values are representable.  The loop must
    avoid zeros of the sampled field.
    """
    loop = np.asarray(loop)
    vecs = values[tuple(loop.T)]
    norms = np.linalg.norm(vecs, axis=-1)
    scale = norms.max() if len(norms) else 0.0
    if np.any(norms <= 1e-12 * max(scale, 1e-300)):
        raise ValueError("loop passes through a zero of the field")
    ang = np.arctan2(vecs[:, 1], vecs[:, 0])
    if kind == "director":
        ang = 2.0 * ang
    elif kind != "q":
        raise ValueError("kind must be 'q' or 'director'")
    steps = np.diff(np.concatenate([ang, ang[:1]]))
    steps = (steps + np.pi) % (2.0 * np.pi) - np.pi
    total = steps.sum() / (2.0 * np.pi)
    if kind == "director":
        # `total` is the winding of the doubled angle = twice the director
        # winding, so halving can produce half-integers
        return float(np.rint(total)) / 2.0
    return int(np.rint(total))


def rectangle_loop(grid: Grid, lo, hi):
    """Counterclockwise node cycle around an index box [lo, hi] (2D)."""
    i0, j0 = lo
    i1, j1 = hi
    seg1 = [(i, j0) for i in range(i0, i1)]
    seg2 = [(i1, j) for j in range(j0, j1)]
    seg3 = [(i, j1) for i in range(i1, i0, -1)]
    seg4 = [(i0, j) for j in range(j1, j0, -1)]
    return np.array(seg1 + seg2 + seg3 + seg4)


def enclosing_loop(grid: Grid, comp: IsotropicComponent, margin=2):
    """Smallest rectangle ring of inside nodes enclosing a component (2D)."""
    lo = np.array(comp.bbox[0]) - margin
    hi = np.array(comp.bbox[1]) + margin
    for _ in range(max(grid.shape)):
        if np.any(lo < 0) or np.any(hi >= np.array(grid.shape)):
            raise ValueError("component too close to the domain edge for a loop")
        loop = rectangle_loop(grid, lo, hi)
        if np.all(grid.inside[tuple(loop.T)]):
            return loop
        lo -= 1
        hi += 1
    raise ValueError("no enclosing loop of inside nodes exists")


def _quadratic_subgrid_min(grid: Grid, values, node):
    """Vertex of a least-squares paraboloid over the 3^dim stencil at node."""
    dim = grid.dim
    offsets = np.array(list(itertools.product((-1, 0, 1), repeat=dim)))
    idx = np.asarray(node) + offsets
    if np.any(idx < 0) or np.any(idx >= np.array(grid.shape)):
        return grid.positions[tuple(node)]
    samples = values[tuple(idx.T)]
    if not np.all(np.isfinite(samples)):
        return grid.positions[tuple(node)]
    x = offsets * grid.h
    cols = [np.ones(len(x))]
    cols += [x[:, a] for a in range(dim)]
    cols += [x[:, a] * x[:, b] for a in range(dim) for b in range(a, dim)]
    A = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(A, samples, rcond=None)
    lin = coef[1 : 1 + dim]
    H = np.zeros((dim, dim))
    k = 1 + dim
    for a in range(dim):
        for b in range(a, dim):
            if a == b:
                H[a, a] = 2.0 * coef[k]
            else:
                H[a, b] = H[b, a] = coef[k]
            k += 1
    try:
        shift = np.linalg.solve(H, -lin)
    except np.linalg.LinAlgError:
        shift = np.zeros(dim)
    if np.any(np.abs(shift) > 1.5 * grid.h):
        shift = np.clip(shift, -1.5 * grid.h, 1.5 * grid.h)
    return grid.positions[tuple(node)] + shift


def radial_shells(grid: Grid, s, center, r_in, r_out, mask=None):
    """Angular averages of s on shells of width h; returns (radii, means, counts)."""
    r = grid.radii(center)
    sel = grid.inside if mask is None else (grid.inside & mask)
    nshell = int(np.ceil((r_out - r_in) / grid.h))
    radii, means, counts = [], [], []
    for k in range(nshell):
        lo = r_in + k * grid.h
        hi = min(lo + grid.h, r_out)
        shell = sel & (r >= lo) & (r < hi)
        cnt = int(np.count_nonzero(shell))
        if cnt == 0:
            continue
        radii.append(float(r[shell].mean()))
        means.append(float(s[shell].mean()))
        counts.append(cnt)
    return np.array(radii), np.array(means), np.array(counts)


def fit_core_exponents(field: Field, record: DefectRecord, annulus, uni=None):
    """Power-law fit of the amplitude profile and the director scale factor.

    Log-log least squares of the angular-averaged amplitude over shells in
    [r_in, r_out] gives the exponent; the director factor is the mean of
    r^2 |grad n|^2 over the annulus nodes (computed sign-free from the
    tensor identity).  Requires at least 4 radial shells.  Returns
    (fitted_n, fitted_alpha, residual) and updates the record in place.
    """
    r_in, r_out = annulus
    grid = field.grid
    if r_in < 2.0 * grid.h:
        raise ValueError("annulus must start at r_in >= 2h")
    u = uni if uni is not None else uniaxial_fields(field)
    # angular averages in log space (geometric means): free of shell-binning
    # bias, so an exact power law fits exactly
    r = grid.radii(record.position)
    sel = grid.inside & (u.s > 0.0)
    nshell = int(np.ceil((r_out - r_in) / grid.h))
    lx, ly = [], []
    for k in range(nshell):
        lo = r_in + k * grid.h
        hi = min(lo + grid.h, r_out)
        shell = sel & (r >= lo) & (r < hi)
        if not np.any(shell):
            continue
        lx.append(float(np.mean(np.log(r[shell]))))
        ly.append(float(np.mean(np.log(u.s[shell]))))
    if len(lx) < 4:
        raise ValueError("fewer than 4 radial shells in the annulus")
    lx, ly = np.array(lx), np.array(ly)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))

    from .fields import line_field_gradsq

    gnsq = line_field_gradsq(grid, u.s, field)
    r = grid.radii(record.position)
    sel = grid.interior & (r >= r_in) & (r <= r_out) & ~u.iso_mask
    alpha = float(np.mean(r[sel] ** 2 * gnsq[sel])) if np.any(sel) else np.nan

    record.fitted_n = float(slope)
    record.fitted_alpha = alpha
    record.fit_residual = resid
    return float(slope), alpha, resid


def _cube_surface_degree(grid: Grid, n, center_node, half):
    """Degree of the director field over an enclosing cube surface.

    The degree is the summed signed solid angle of the image triangles
    over 4 pi, with each face oriented by its outward normal.  The input
    director is assumed globally sign-aligned away from the core (as
    produced by `uniaxial_fields`); point defects of a uniaxial field
    then yield integers up to quadrature error.
    """
    c = np.asarray(center_node)
    lo = c - half
    hi = c + half
    if np.any(lo < 0) or np.any(hi >= np.array(grid.shape)):
        return None
    total = 0.0
    for axis in range(3):
        axes = [a for a in range(3) if a != axis]
        # normal induced by the increasing (u, v) parameterization
        par_sign = -1.0 if axis == 1 else 1.0
        for side, face_sign in ((lo[axis], -1.0), (hi[axis], 1.0)):
            aa, bb = np.meshgrid(
                np.arange(lo[axes[0]], hi[axes[0]] + 1),
                np.arange(lo[axes[1]], hi[axes[1]] + 1),
                indexing="ij",
            )
            idx = [None, None, None]
            idx[axis] = np.full_like(aa, side)
            idx[axes[0]] = aa
            idx[axes[1]] = bb
            v = n[tuple(idx)]
            total += face_sign * par_sign * _patch_solid_angle(v)
    return float(total / (4.0 * np.pi))


def _patch_solid_angle(v):
    a = v[:-1, :-1]
    b = v[1:, :-1]
    c = v[1:, 1:]
    d = v[:-1, 1:]
    return _triangle_solid_angle(a, b, c) + _triangle_solid_angle(a, c, d)


def _triangle_solid_angle(a, b, c):
    """Signed solid angle of spherical triangles (Oosterom-Strackee)."""
    triple = np.einsum("...i,...i->...", a, np.cross(b, c))
    denom = (
        1.0
        + np.einsum("...i,...i->...", a, b)
        + np.einsum("...i,...i->...", b, c)
        + np.einsum("...i,...i->...", a, c)
    )
    return float(np.sum(2.0 * np.arctan2(triple, denom)))


def locate_defects(field: Field, p: tensor.MaterialParams, frac=0.3, fit_annulus=None):
    """Locate and characterize the defects of a converged field.

    Per isotropic component: sub-grid position from a quadratic fit of
    |Q|^2 around its minimum node, windings from the smallest enclosing
    loop (2D) or an enclosing cube surface (3D, where the tensor and
    director line field share one degree), core radius from the radial
    amplitude profile, and power-law core fits.  Components touching the
    boundary are skipped.  Records are sorted by position.
    """
    grid = field.grid
    u = uniaxial_fields(field)
    sp = p.s_plus_for(grid.dim)
    comps = isotropic_set(grid, u.s, frac, sp)
    qsq = tensor.trace2(field.values)
    qsq = np.where(grid.inside, qsq, np.inf)
    scale = grid.shape_params.get("radius", grid.shape_params.get("side", 1.0))
    records = []
    for comp in comps:
        if comp.touches_boundary:
            continue
        vals = qsq[tuple(comp.nodes.T)]
        node = comp.nodes[np.argmin(vals)]
        position = _quadratic_subgrid_min(grid, qsq, node)
        q_w = d_w = None
        if grid.dim == 2:
            try:
                loop = enclosing_loop(grid, comp)
                q_w = winding_number(grid, field.values, loop, kind="q")
                d_w = winding_number(grid, u.director.values, loop, kind="director")
            except ValueError:
                pass
        else:
            half = int(np.clip(np.ptp(comp.nodes, axis=0).max() + 2, 2, 6))
            deg = _cube_surface_degree(grid, u.director.values, node, half)
            if deg is not None:
                # a global head-tail flip of the line field negates the
                # degree, so only its magnitude is reported; the tensor and
                # its leading eigenvector share the same defect
                q_w = d_w = abs(float(np.rint(deg)))
        radii, means, _ = radial_shells(grid, u.s, position, 0.0, 0.5 * scale)
        above = np.nonzero(means > 0.5 * sp)[0]
        core_radius = float(radii[above[0]]) if len(above) else np.nan
        rec = DefectRecord(
            position=position,
            q_winding=q_w,
            director_winding=d_w,
            core_radius=core_radius,
            fitted_n=np.nan,
            fitted_alpha=np.nan,
            fit_residual=np.nan,
        )
        if fit_annulus is None:
            r_in = max(3.0 * grid.h, 0.0)
            r_out = 0.3 * scale
        else:
            r_in, r_out = fit_annulus
        try:
            fit_core_exponents(field, rec, (r_in, r_out), uni=u)
        except ValueError:
            pass
        records.append(rec)
    records.sort(key=lambda rec: tuple(rec.position))
    return records


def renormalized_energy_disk(points, degrees):
    """Interaction energy of defect positions in the unit disk.

    W = -2 pi sum_{i != j} d_i d_j log|b_i - b_j|
        - 2 pi sum_{i, j} d_i d_j R(b_i, b_j)

    with R(x, y) = log|1 - x conj(y)| in complex notation, the regular
    part of the disk Green function taken with the sign that renders W
    bounded below (a single defect is then confined, with its minimum at
    the center, and same-sign defects repel each other and the rim).
    """
    pts = np.asarray(points, dtype=float)
    deg = np.asarray(degrees, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) != len(deg):
        raise ValueError("points must be (k, 2) with matching degrees")
    z = pts[:, 0] + 1j * pts[:, 1]
    if np.any(np.abs(z) >= 1.0):
        raise ValueError("points must lie inside the unit disk")
    diff = np.abs(z[:, None] - z[None, :])
    off = ~np.eye(len(z), dtype=bool)
    if np.any(diff[off] == 0.0):
        raise ValueError("coincident defect positions")
    w = 0.0
    dd = deg[:, None] * deg[None, :]
    with np.errstate(divide="ignore"):
        w -= 2.0 * np.pi * np.sum(np.where(off, dd * np.log(np.where(off, diff, 1.0)), 0.0))
    reg = np.log(np.abs(1.0 - z[:, None] * np.conj(z)[None, :]))
    w -= 2.0 * np.pi * np.sum(dd * reg)
    return float(w)
