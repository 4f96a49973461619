"""Limiting harmonic maps: heat flow, singular sets, the 2D canonical map."""

from __future__ import annotations

import numpy as np

from . import tensor
from .fields import BoundaryDirector, DirectorField, Field
from .grid import Grid, axis_slices

SINGULAR_ENERGY_THRESHOLD = 4.0


def dirichlet_energy(grid: Grid, n):
    """Integral of |grad n|^2 by the edge quadrature."""
    h2 = grid.h * grid.h
    total = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        d = n[hi] - n[lo]
        total += np.sum(grid.edge_weight[ax] * np.sum(d * d, axis=-1)) / h2
    return float(total)


def _dirichlet_grad(grid: Grid, n):
    h2 = grid.h * grid.h
    g = np.zeros_like(n)
    e = 0.0
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        d = n[hi] - n[lo]
        t = (2.0 * grid.edge_weight[ax] / h2)[..., None] * d
        e += 0.5 * np.sum(t * d)
        g[hi] += t
        g[lo] -= t
    g -= np.sum(g * n, axis=-1)[..., None] * n
    g[~grid.interior] = 0.0
    return float(e), g


def local_scaled_energy(grid: Grid, n):
    """Sum of |n_u - n_v|^2 over the edges at each node (~ 2 h^2 |grad n|^2).

    A dimensionless, resolution-independent measure of director variation;
    a point singularity one cell away contributes more than the default
    flagging threshold of 4.
    """
    out = np.zeros(grid.shape)
    for ax in range(grid.dim):
        lo, hi = axis_slices(grid, ax)
        d2 = np.sum((n[hi] - n[lo]) ** 2, axis=-1)
        ok = grid.inside[lo] & grid.inside[hi]
        d2 = np.where(ok, d2, 0.0)
        out[lo] += d2
        out[hi] += d2
    out[~grid.inside] = 0.0
    return out


def stationarity_mask(grid: Grid, n, dilate=3, shell_standoff=2):
    """Nodes where discrete harmonic-map stationarity is a fair demand.

    Excludes flagged singular clusters (dilated: stationarity cannot hold
    at O(h) distance from a point defect) and a small standoff from the
    staircase shell, where the quadrature weights make the pointwise
    operator first-order inconsistent.
    """
    from scipy import ndimage

    flag = grid.inside & (local_scaled_energy(grid, n) > SINGULAR_ENERGY_THRESHOLD)
    if np.any(flag) and dilate > 0:
        structure = ndimage.generate_binary_structure(grid.dim, 1)
        flag = ndimage.binary_dilation(flag, structure=structure, iterations=dilate)
    return grid.interior & grid.standoff_mask(shell_standoff) & ~flag


def minimize_dirichlet(
    n0: DirectorField,
    boundary: BoundaryDirector,
    tol=1e-3,
    max_iters=200000,
    dt=None,
    method="flow",
):
    """Dirichlet-energy descent with pointwise renormalization.

    Stops when the tangent-projected gradient density drops below `tol`
    on the stationarity mask (away from flagged point defects, where the
    discrete bound cannot hold, and off the staircase shell).  The energy
    is nonincreasing along the descent.  `method` selects the heat flow
    with adaptive step (default) or the conjugate-gradient accelerator,
    which shares its fixed points and is much faster on large 3D grids.

    2D data with nonzero degree is rejected: no S1-valued Sobolev
    extension exists, and the punctured far field is served by
    `canonical_harmonic_2d` instead.
    """
    grid = n0.grid
    if grid.dim == 2 and boundary.degree not in (0, None):
        raise ValueError(
            "no S1-valued extension exists for nonzero boundary degree; "
            "use canonical_harmonic_2d"
        )
    n = n0.values.copy()
    n[grid.boundary_indices] = boundary.values
    n[~grid.inside] = 0.0
    if dt is None:
        dt = grid.h * grid.h / (8.0 * grid.dim)

    from .minimize import MinimizeOptions, _run_descent

    problem = _DirichletProblem(grid, n)
    opts = MinimizeOptions(
        mode="full",
        method="gradient-flow" if method == "flow" else "nonlinear-cg",
        dt=dt,
        grad_tol=tol,
        max_iters=max_iters,
        record_cadence=10**9,
    )
    x, _, _, _, _, _, _ = _run_descent(problem, (n,), opts)
    n = x[0]
    return DirectorField(grid, np.where(grid.inside[..., None], n, 0.0), check=False)


class _DirichletProblem:
    """Adapter exposing the Dirichlet energy to the shared descent drivers."""

    def __init__(self, grid, n_init):
        self.grid = grid
        self.vol = grid.h**grid.dim
        self._mask = stationarity_mask(grid, n_init)
        self._mask_age = 0

    def energy(self, x):
        return dirichlet_energy(self.grid, x[0])

    def energy_grad(self, x):
        e, g = _dirichlet_grad(self.grid, x[0])
        self._latest = x[0]
        return e, e, 0.0, (g,)

    def retract(self, x, d, a):
        n = x[0]
        trial = n + a * d[0]
        norm = np.linalg.norm(trial, axis=-1)
        ok = norm > 1e-12
        trial = np.where(ok[..., None], trial / np.maximum(norm, 1e-300)[..., None], n)
        out = n.copy()
        out[self.grid.interior] = trial[self.grid.interior]
        return (out,)

    def grad_max(self, g):
        # singular clusters can migrate early in the descent; refresh the
        # exclusion mask occasionally
        self._mask_age += 1
        if self._mask_age % 50 == 0:
            self._mask = stationarity_mask(self.grid, self._latest)
        gn = np.sqrt(np.sum(g[0] * g[0], axis=-1)) / self.vol
        return float(gn[self._mask].max()) if np.any(self._mask) else 0.0

    def dot(self, a, b):
        return float(np.sum(a[0] * b[0]))


def limiting_map(n: DirectorField, p: tensor.MaterialParams):
    """Uniaxial field of bulk-minimizing amplitude built on a director field."""
    grid = n.grid
    vals = np.zeros(grid.shape + (5 if grid.dim == 3 else 2,))
    if grid.dim == 3:
        vals[grid.inside] = tensor.make_uniaxial(p.s_plus, n.values[grid.inside])
    else:
        vals[grid.inside] = tensor.planar_coeffs(p.s_plus_2d, n.values[grid.inside])
    return Field(grid, vals)


def singular_set(n: DirectorField, threshold=SINGULAR_ENERGY_THRESHOLD):
    """Clusters of nodes whose local scaled director energy exceeds threshold.

    Returns a list of dicts with the energy-weighted centroid, node count
    and total scaled energy of each 26-connected cluster (empty when the
    field is smooth at the grid scale).
    """
    from scipy import ndimage

    grid = n.grid
    metric = local_scaled_energy(grid, n.values)
    flag = grid.inside & (metric > threshold)
    if not np.any(flag):
        return []
    structure = ndimage.generate_binary_structure(grid.dim, grid.dim)
    labels, count = ndimage.label(flag, structure=structure)
    out = []
    pos = grid.positions
    for k in range(1, count + 1):
        sel = labels == k
        w = metric[sel]
        centroid = np.sum(pos[sel] * w[:, None], axis=0) / np.sum(w)
        out.append(
            {
                "centroid": centroid,
                "nodes": int(np.count_nonzero(sel)),
                "energy": float(np.sum(w)),
            }
        )
    out.sort(key=lambda rec: tuple(rec["centroid"]))
    return out


def _unwrap_loop(deltas):
    wrapped = (deltas + np.pi) % (2.0 * np.pi) - np.pi
    return np.concatenate([[0.0], np.cumsum(wrapped)])


def canonical_harmonic_2d(grid: Grid, defects, boundary: BoundaryDirector):
    """S1-valued far field with prescribed punctures and boundary data.

    The angle is the sum of the defect angle kernels d_i atan2(y - y_i,
    x - x_i) plus the harmonic correction matching the boundary angle,
    obtained from a discrete Laplace solve on the interior.  Degrees must
    sum to the boundary winding.  Returns a DirectorField carrying the
    angle field as the attribute `angle`; it is smooth away from the
    puncture points.
    """
    if grid.dim != 2:
        raise ValueError("canonical harmonic map is a 2D construction")
    defects = [(np.asarray(pt, dtype=float), int(d)) for pt, d in defects]
    total = sum(d for _, d in defects)
    if boundary.degree is None or total != boundary.degree:
        raise ValueError(
            f"defect degrees sum to {total} but boundary winding is {boundary.degree}"
        )
    pos = grid.positions
    base = np.zeros(grid.shape)
    for pt, d in defects:
        base += d * np.arctan2(pos[..., 1] - pt[1], pos[..., 0] - pt[0])

    # boundary mismatch, unwrapped to a single-valued function along the loop
    loop = grid.boundary_loop()
    bvals = boundary.scatter()
    bang = np.arctan2(
        bvals[loop[:, 0], loop[:, 1], 1], bvals[loop[:, 0], loop[:, 1], 0]
    )
    mismatch = bang - base[loop[:, 0], loop[:, 1]]
    steps = np.diff(np.concatenate([mismatch, mismatch[:1]]))
    wrapped = (steps + np.pi) % (2.0 * np.pi) - np.pi
    if int(np.rint(wrapped.sum() / (2.0 * np.pi))) != 0:
        raise RuntimeError("boundary mismatch winds; defect degrees inconsistent")
    unwrapped = mismatch[0] + _unwrap_loop(wrapped[:-1])

    correction = _solve_laplace_dirichlet(grid, loop, unwrapped)
    angle = base + correction
    n = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    n[~grid.inside] = 0.0
    field = DirectorField(grid, n, check=False)
    field.angle = angle
    return field


def _solve_laplace_dirichlet(grid: Grid, loop, boundary_values):
    """Five-point Laplace solve with Dirichlet data on the boundary nodes."""
    from scipy import sparse
    from scipy.sparse.linalg import spsolve

    bc = np.zeros(grid.shape)
    bc[loop[:, 0], loop[:, 1]] = boundary_values

    idx = -np.ones(grid.shape, dtype=np.int64)
    ii, jj = np.nonzero(grid.interior)
    idx[ii, jj] = np.arange(len(ii))
    nunk = len(ii)
    rows, cols, vals = [], [], []
    rhs = np.zeros(nunk)
    for k, (i, j) in enumerate(zip(ii, jj)):
        rows.append(k)
        cols.append(k)
        vals.append(4.0)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = i + di, j + dj
            if grid.interior[ni, nj]:
                rows.append(k)
                cols.append(idx[ni, nj])
                vals.append(-1.0)
            else:
                rhs[k] += bc[ni, nj]
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(nunk, nunk))
    sol = spsolve(mat, rhs)
    out = bc.copy()
    out[ii, jj] = sol
    out[~grid.inside] = 0.0
    return out
