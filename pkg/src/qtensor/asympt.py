"""Quantitative small-elastic-constant diagnostics on converged fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor
from .fields import DirectorField, Field, director_gradsq, energy_density, gradsq_nodes, uniaxial_fields
from .grid import Grid


@dataclass
class RegionSpec:
    """Interior region away from singular points and the staircase shell.

    `delta` is the exclusion radius around each supplied singular point
    (at least 3h); `standoff` the number of erosion steps from the
    outside.  The defaults mirror the analysis region on which the
    small-L bounds hold with constants independent of L.
    """

    delta: float | None = None  # None: max(3h, 2 * core_radius)
    standoff: int = 2

    def resolve_delta(self, grid: Grid, core_radius=None):
        floor = 3.0 * grid.h
        if self.delta is not None:
            if self.delta < floor:
                raise ValueError("exclusion radius must be at least 3h")
            return self.delta
        if core_radius is not None and np.isfinite(core_radius):
            return max(floor, 2.0 * core_radius)
        return floor

    def build_mask(self, grid: Grid, singular_points=(), core_radius=None):
        delta = self.resolve_delta(grid, core_radius)
        mask = grid.interior & grid.standoff_mask(self.standoff)
        for pt in singular_points:
            mask &= grid.radii(pt) > delta
        if not np.any(mask):
            raise ValueError("region is empty after exclusions")
        return mask


@dataclass
class AsymptoticsReport:
    L: float
    sup_psi: float
    prop4_sup_err: float
    prop4_mean_err: float
    prop4_sup_rel: float
    prop4_mean_rel: float
    sup_grad_s: float
    gradn_err: float
    max_beta2: float
    lambda1_gap: float
    max_rl2: float
    max_principle_excess: float
    r2_supE: float

    def as_csv_row(self, run_id):
        return [
            run_id,
            self.L,
            self.sup_psi,
            self.prop4_sup_err,
            self.prop4_mean_err,
            self.sup_grad_s,
            self.gradn_err,
            self.max_beta2,
            self.lambda1_gap,
            self.max_principle_excess,
            self.r2_supE,
        ]


def psi_field(s, p: tensor.MaterialParams, dim=3):
    """Rescaled amplitude gap (s_plus - s) / L, nodewise."""
    return (p.s_plus_for(dim) - np.asarray(s, dtype=float)) / p.L


def prop4_prediction(gradn0_sq, p: tensor.MaterialParams, dim=3):
    """Limit profile of the rescaled amplitude gap.

    Obtained by linearizing the amplitude equation about the bulk minimum:
    psi -> 2 s+ |grad n0|^2 / V''(s+), which evaluates to
    9 |grad n0|^2 / sqrt(b^4 + 24 a^2 c^2) in 3D and
    2 s+_2d |grad n0|^2 / a^2 in the 2D reduction.
    """
    if dim == 3:
        return 9.0 * gradn0_sq / p.bulk_root
    return 2.0 * p.s_plus_2d * gradn0_sq / p.a2


def verify_prop4(s, n0: DirectorField, p: tensor.MaterialParams, region_mask):
    """Deviation of psi from its limit profile over a region.

    Returns sup and mean absolute errors plus the same normalized by
    sup psi over the region.  |grad n0|^2 is evaluated with the same
    central stencils as the other gradient diagnostics.
    """
    grid = n0.grid
    if not np.any(region_mask):
        raise ValueError("region is empty")
    psi = psi_field(s, p, grid.dim)
    pred = prop4_prediction(director_gradsq(grid, n0), p, grid.dim)
    diff = np.abs(psi - pred)[region_mask]
    sup_psi = float(np.abs(psi[region_mask]).max())
    denom = max(sup_psi, 1e-300)
    return {
        "sup_err": float(diff.max()),
        "mean_err": float(diff.mean()),
        "sup_rel": float(diff.max()) / denom,
        "mean_rel": float(diff.mean()) / denom,
        "sup_psi": sup_psi,
    }


def verify_lemma7(s, director: DirectorField, n0: DirectorField, region_mask):
    """(sup |grad s|, sup | |grad n|^2 - |grad n0|^2 |) over the region.

    Both decay along a decreasing-L schedule away from the defect set.
    """
    grid = n0.grid
    grad_s = np.sqrt(gradsq_nodes(grid, np.asarray(s, dtype=float)))
    gn = director_gradsq(grid, director)
    gn0 = director_gradsq(grid, n0)
    return (
        float(grad_s[region_mask].max()),
        float(np.abs(gn - gn0)[region_mask].max()),
    )


def check_max_principle(field: Field, p: tensor.MaterialParams):
    """max |Q| minus the stationary-solution norm bound (positive = violation)."""
    grid = field.grid
    norms = np.sqrt(tensor.trace2(field.values))
    return float(norms[grid.inside].max()) - p.q_norm_bound(grid.dim)


def biaxiality_report(field: Field, p: tensor.MaterialParams, region_mask, tol=1e-8):
    """(max beta^2, sup of 2 s+/3 - lambda_1, max R^2) over the region."""
    grid = field.grid
    if grid.dim != 3:
        raise ValueError("biaxiality diagnostics are 3D only")
    vals = field.values[region_mask]
    d = tensor.decompose(vals, tol=tol)
    t2 = tensor.trace2(vals)
    ok = t2 > 0.0
    beta = tensor.biaxiality(vals[ok]) if np.any(ok) else np.array([0.0])
    lam1 = d.eigenvalues[..., 0]
    gap = 2.0 * p.s_plus / 3.0 - lam1
    return (
        float(beta.max()),
        float(gap.max()),
        float((d.r_l**2).max()),
    )


def boundary_energy_diagnostic(field: Field, p: tensor.MaterialParams, samples, r):
    """max over samples of r^2 * sup of e_L on the half-ball of radius r/2.

    Samples are boundary points (away from singular-set projections); the
    half-ball is the inside portion of B(x0, r/2), taken with a one-cell
    standoff from the staircase shell.
    """
    grid = field.grid
    if r < 4.0 * grid.h:
        raise ValueError("r must be at least 4h")
    dens = energy_density(field, p)
    sel_base = grid.inside & grid.standoff_mask(1)
    out = 0.0
    for x0 in samples:
        dist = grid.radii(x0)
        sel = sel_base & (dist <= 0.5 * r)
        if not np.any(sel):
            continue
        out = max(out, r * r * float(dens[sel].max()))
    return out


def default_boundary_samples(grid: Grid, count=6):
    """Evenly spread boundary node positions (axis-aligned extremes first)."""
    bi = np.argwhere(grid.boundary)
    pos = grid.positions[tuple(bi.T)]
    picks = []
    for ax in range(grid.dim):
        picks.append(pos[np.argmax(pos[:, ax])])
        picks.append(pos[np.argmin(pos[:, ax])])
    return picks[:count]


def asymptotics_report(
    run_field: Field,
    s,
    director: DirectorField,
    n0: DirectorField,
    p: tensor.MaterialParams,
    region_mask,
    boundary_samples=None,
    boundary_r=None,
):
    """Full small-L report for one converged run."""
    grid = run_field.grid
    psi = psi_field(s, p, grid.dim)
    prop4 = verify_prop4(s, n0, p, region_mask)
    sup_grad_s, gradn_err = verify_lemma7(s, director, n0, region_mask)
    if grid.dim == 3:
        max_beta2, lam_gap, max_rl2 = biaxiality_report(run_field, p, region_mask)
    else:
        max_beta2, lam_gap, max_rl2 = 0.0, np.nan, 0.0
    samples = boundary_samples if boundary_samples is not None else default_boundary_samples(grid)
    r = boundary_r if boundary_r is not None else 6.0 * grid.h
    r2sup = boundary_energy_diagnostic(run_field, p, samples, r)
    return AsymptoticsReport(
        L=p.L,
        sup_psi=float(np.abs(psi[region_mask]).max()),
        prop4_sup_err=prop4["sup_err"],
        prop4_mean_err=prop4["mean_err"],
        prop4_sup_rel=prop4["sup_rel"],
        prop4_mean_rel=prop4["mean_rel"],
        sup_grad_s=sup_grad_s,
        gradn_err=gradn_err,
        max_beta2=max_beta2,
        lambda1_gap=lam_gap,
        max_rl2=max_rl2,
        max_principle_excess=check_max_principle(run_field, p),
        r2_supE=r2sup,
    )
